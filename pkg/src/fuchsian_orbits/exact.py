"""Exact arithmetic in the rings Z[2cos(pi/q)] with a certified real embedding.

Elements are integer coefficient vectors in the power basis 1, lam, lam^2, ...
where lam = 2cos(pi/q).  Products are reduced modulo the monic minimal
polynomial of lam.  Zero tests are exact; the real embedding is only used for
ordering and carries an explicit absolute error bound.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import mpmath
import numpy as np

__all__ = [
    "RingMismatchError",
    "UnsupportedRingError",
    "NumberRing",
    "RingElement",
    "cyclotomic_polynomial",
    "hecke_min_poly",
    "ring_for_hecke",
    "integer_ring",
    "MAX_DEGREE",
    "exact_signs",
]

MAX_DEGREE = 12
_WORK_DPS = 60


class RingMismatchError(ValueError):
    pass


class UnsupportedRingError(ValueError):
    pass


def _poly_mul(a: Sequence[int], b: Sequence[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _poly_divexact(num: Sequence[int], den: Sequence[int]) -> list[int]:
    # den monic, coefficients low -> high
    num = list(num)
    dn = len(den) - 1
    quot = [0] * (len(num) - dn)
    for k in range(len(quot) - 1, -1, -1):
        coef = num[k + dn]
        quot[k] = coef
        if coef:
            for j, d in enumerate(den):
                num[k + j] -= coef * d
    if any(num[:dn]):
        raise ArithmeticError("polynomial division is not exact")
    return quot


@lru_cache(maxsize=None)
def cyclotomic_polynomial(n: int) -> tuple[int, ...]:
    """Coefficients (low to high) of the n-th cyclotomic polynomial."""
    if n < 1:
        raise ValueError("n must be positive")
    poly = [-1] + [0] * (n - 1) + [1]  # y^n - 1
    for d in range(1, n):
        if n % d == 0:
            poly = _poly_divexact(poly, cyclotomic_polynomial(d))
    return tuple(poly)


def _chebyshev_sums(m: int) -> list[list[int]]:
    # P_k(x) = y^k + y^-k in terms of x = y + 1/y
    p = [[2], [0, 1]]
    for k in range(1, m):
        nxt = [0] + p[k]
        prev = p[k - 1] + [0] * (len(nxt) - len(p[k - 1]))
        p.append([u - v for u, v in zip(nxt, prev)])
    return p[: m + 1]


@lru_cache(maxsize=None)
def hecke_min_poly(q: int) -> tuple[int, ...]:
    """Monic minimal polynomial of 2cos(pi/q), low to high coefficients.

    Obtained from the (2q)-th cyclotomic polynomial, which is palindromic of
    even degree 2m, by writing y^-m Phi(y) as a polynomial in x = y + 1/y.
    """
    if q < 3:
        raise ValueError("q must be at least 3")
    cyc = cyclotomic_polynomial(2 * q)
    m = (len(cyc) - 1) // 2
    cheb = _chebyshev_sums(m)
    out = [0] * (m + 1)
    out[0] += cyc[m]
    for k in range(1, m + 1):
        for i, c in enumerate(cheb[k]):
            out[i] += cyc[m + k] * c
    return tuple(out)


def _is_irreducible(poly: Sequence[int]) -> bool:
    import sympy

    x = sympy.Symbol("x")
    expr = sum(int(c) * x**i for i, c in enumerate(poly))
    return bool(sympy.Poly(expr, x, domain="ZZ").is_irreducible)


@dataclass(frozen=True, eq=False)
class NumberRing:
    """The ring Z[lam] for lam a real root of a monic irreducible polynomial."""

    min_poly: tuple[int, ...]
    label: str
    approx_root: float
    root: mpmath.mpf = field(repr=False)
    root_error: float = field(repr=False)
    powers: np.ndarray = field(repr=False)

    @property
    def degree(self) -> int:
        return len(self.min_poly) - 1

    @property
    def embedding_root(self) -> mpmath.mpf:
        return self.root

    @classmethod
    def from_polynomial(cls, min_poly: Sequence[int], approx_root: float, label: str = "",
                        check_irreducible: bool = True) -> "NumberRing":
        min_poly = tuple(int(c) for c in min_poly)
        if min_poly[-1] != 1:
            raise ValueError("minimal polynomial must be monic")
        deg = len(min_poly) - 1
        if deg < 1:
            raise ValueError("degree must be positive")
        if deg > MAX_DEGREE:
            raise UnsupportedRingError(f"degree {deg} exceeds the configured limit {MAX_DEGREE}")
        if check_irreducible and deg > 1 and not _is_irreducible(min_poly):
            raise ValueError("polynomial is reducible over the rationals")
        with mpmath.workdps(_WORK_DPS):
            coeffs_hi = list(reversed(min_poly))
            root = mpmath.findroot(lambda t: mpmath.polyval(coeffs_hi, t), mpmath.mpf(approx_root))
            val = abs(mpmath.polyval(coeffs_hi, root))
            deriv = [c * (deg - i) for i, c in enumerate(coeffs_hi[:-1])]
            slope = abs(mpmath.polyval(deriv, root))
            if val >= mpmath.mpf(10) ** -30:
                raise ArithmeticError("root refinement failed")
            # Newton-style bound on the distance to the true root plus working-precision slack
            err = float(2 * val / slope + mpmath.mpf(10) ** (-_WORK_DPS + 5))
            powers = np.array([float(root**k) for k in range(deg)])
        return cls(min_poly, label or f"Z[{approx_root:.6g}]", float(root), root, err, powers)

    # construction helpers
    def element(self, coeffs: Iterable[int]) -> "RingElement":
        coeffs = [int(c) for c in coeffs]
        if len(coeffs) > self.degree:
            coeffs = _reduce(coeffs, self.min_poly)
        coeffs += [0] * (self.degree - len(coeffs))
        return RingElement(self, tuple(coeffs))

    def from_int(self, n: int) -> "RingElement":
        return self.element([int(n)])

    @property
    def zero(self) -> "RingElement":
        return self.from_int(0)

    @property
    def one(self) -> "RingElement":
        return self.from_int(1)

    @property
    def generator(self) -> "RingElement":
        """The element lam itself."""
        if self.degree == 1:
            return self.from_int(-self.min_poly[0])
        return self.element([0, 1])

    def mul_matrix(self, a: "RingElement") -> np.ndarray:
        """Integer matrix of multiplication by a on coefficient column vectors."""
        d = self.degree
        cols = []
        basis = self.one
        lam = self.generator
        for _ in range(d):
            cols.append((a * basis).coeffs)
            basis = basis * lam
        return np.array(cols, dtype=object).T

    def embed_array(self, coeffs: np.ndarray) -> np.ndarray:
        """Float embedding of coefficient arrays with last axis of length degree."""
        arr = np.asarray(coeffs)
        if arr.dtype == object:
            arr = arr.astype(float)
        return arr @ self.powers

    def embed_bound_array(self, coeffs: np.ndarray) -> np.ndarray:
        """Absolute error bound for :meth:`embed_array`."""
        arr = np.abs(np.asarray(coeffs).astype(float))
        ks = np.arange(self.degree)
        # root perturbation, rounding of stored powers, and the dot product itself
        deriv = ks * np.abs(self.powers) / max(abs(self.approx_root), 1e-300)
        scale = arr @ np.abs(self.powers)
        return arr @ (deriv * self.root_error) + scale * (self.degree + 2) * 2.0**-52

    def __repr__(self) -> str:
        return f"NumberRing({self.label}, min_poly={list(self.min_poly)})"


def _reduce(coeffs: list[int], min_poly: Sequence[int]) -> list[int]:
    deg = len(min_poly) - 1
    coeffs = list(coeffs)
    for k in range(len(coeffs) - 1, deg - 1, -1):
        c = coeffs[k]
        if c:
            coeffs[k] = 0
            for j in range(deg):
                coeffs[k - deg + j] -= c * min_poly[j]
    return coeffs[:deg]


@dataclass(frozen=True)
class RingElement:
    ring: NumberRing = field(compare=False, repr=False)
    coeffs: tuple[int, ...]

    def _check(self, other: "RingElement | int") -> "RingElement":
        if isinstance(other, (int, np.integer)):
            return self.ring.from_int(int(other))
        if not isinstance(other, RingElement):
            return NotImplemented
        if other.ring is not self.ring:
            raise RingMismatchError("operands belong to different rings")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return RingElement(self.ring, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return RingElement(self.ring, tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        prod = _poly_mul(self.coeffs, other.coeffs)
        return self.ring.element(_reduce(prod, self.ring.min_poly))

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, (int, np.integer)):
            other = self.ring.from_int(int(other))
        if not isinstance(other, RingElement):
            return NotImplemented
        return other.ring is self.ring and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((id(self.ring), self.coeffs))

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def embed(self) -> float:
        return self.embed_with_bound()[0]

    def embed_with_bound(self) -> tuple[float, float]:
        """Float value and a certified absolute error bound."""
        if self.is_zero():
            return 0.0, 0.0
        with mpmath.workdps(_WORK_DPS):
            val = mpmath.fsum(c * self.ring.root**k for k, c in enumerate(self.coeffs) if c)
            drift = sum(abs(c) * k * abs(float(self.ring.root)) ** max(k - 1, 0)
                        for k, c in enumerate(self.coeffs))
        fval = float(val)
        bound = drift * self.ring.root_error + abs(fval) * 2.0**-53 + 1e-300
        return fval, bound

    def sign(self) -> int:
        """Exact sign: zero iff all coefficients vanish, otherwise from the embedding."""
        if self.is_zero():
            return 0
        dps = _WORK_DPS
        while True:
            with mpmath.workdps(dps):
                root = self.ring.root if dps == _WORK_DPS else mpmath.findroot(
                    lambda t: mpmath.polyval(list(reversed(self.ring.min_poly)), t), self.ring.root)
                val = mpmath.fsum(c * root**k for k, c in enumerate(self.coeffs) if c)
                tol = mpmath.mpf(10) ** (-dps + 10) * (1 + sum(abs(c) for c in self.coeffs))
                if abs(val) > tol:
                    return 1 if val > 0 else -1
            dps *= 2
            if dps > 4000:
                raise ArithmeticError("sign could not be resolved")

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __float__(self):
        return self.embed()

    def __repr__(self) -> str:
        terms = []
        for k, c in enumerate(self.coeffs):
            if c:
                terms.append(f"{c}" if k == 0 else f"{c}*lam" + (f"^{k}" if k > 1 else ""))
        return "RingElement(" + (" + ".join(terms) or "0") + ")"


@lru_cache(maxsize=None)
def ring_for_hecke(q: int) -> NumberRing:
    """The ring Z[2cos(pi/q)]; for q = 3 this is the integers."""
    if q < 3:
        raise ValueError("q must be at least 3")
    poly = hecke_min_poly(q)
    if len(poly) - 1 > MAX_DEGREE:
        raise UnsupportedRingError(
            f"q={q} gives degree {len(poly) - 1}, above the configured limit {MAX_DEGREE}")
    approx = 2.0 * np.cos(np.pi / q)
    return NumberRing.from_polynomial(poly, approx, label=f"Z[2cos(pi/{q})]",
                                      check_irreducible=q <= 24)


def integer_ring() -> NumberRing:
    return ring_for_hecke(3)


def exact_signs(ring: NumberRing, coeffs: np.ndarray) -> np.ndarray:
    """Exact signs of many ring elements given as coefficient rows.

    The float embedding decides whenever it clears its certified bound; the
    remaining rows are settled exactly.
    """
    arr = np.asarray(coeffs)
    flat = arr.reshape(-1, ring.degree)
    vals = ring.embed_array(flat)
    bounds = ring.embed_bound_array(flat)
    out = np.sign(vals).astype(np.int8)
    unsure = np.abs(vals) <= bounds
    for i in np.nonzero(unsure)[0]:
        out[i] = RingElement(ring, tuple(int(c) for c in flat[i])).sign()
    return out.reshape(arr.shape[:-1])
