"""Nonuniform lattices in SL2(R): generators, cusps, scaling data and reduction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .exact import NumberRing, RingElement, integer_ring, ring_for_hecke

__all__ = [
    "ExactMatrix",
    "GroupElement",
    "CuspData",
    "Lattice",
    "build_sl2z",
    "build_hecke",
    "build_congruence",
    "build_custom",
    "c_gamma",
    "scaling_factor",
    "reduce_point",
    "cusp_membership_test",
    "parse_lattice_config",
    "lattice_from_config",
    "rotation",
    "diag_a",
    "shear_n",
    "ReductionError",
]


class ReductionError(RuntimeError):
    pass


# float constructors for the Iwasawa factors
def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def diag_a(t: float) -> np.ndarray:
    return np.array([[t, 0.0], [0.0, 1.0 / t]])


def shear_n(x: float) -> np.ndarray:
    return np.array([[1.0, x], [0.0, 1.0]])


@dataclass(frozen=True)
class ExactMatrix:
    """2x2 matrix with entries in a NumberRing."""

    a: RingElement
    b: RingElement
    c: RingElement
    d: RingElement

    @property
    def ring(self) -> NumberRing:
        return self.a.ring

    @classmethod
    def from_ints(cls, ring: NumberRing, rows: Sequence[Sequence[int]]):
        (a, b), (c, d) = rows
        return cls(ring.from_int(a), ring.from_int(b), ring.from_int(c), ring.from_int(d))

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        a = self.a * other.a + self.b * other.c
        b = self.a * other.b + self.b * other.d
        c = self.c * other.a + self.d * other.c
        d = self.c * other.b + self.d * other.d
        if isinstance(self, GroupElement) and isinstance(other, GroupElement):
            return GroupElement(a, b, c, d)
        return ExactMatrix(a, b, c, d)

    def det(self) -> RingElement:
        return self.a * self.d - self.b * self.c

    def trace(self) -> RingElement:
        return self.a + self.d

    def adjugate(self) -> "ExactMatrix":
        return ExactMatrix(self.d, -self.b, -self.c, self.a)

    def apply(self, vec: Sequence[RingElement]) -> tuple[RingElement, RingElement]:
        x, y = vec
        return (self.a * x + self.b * y, self.c * x + self.d * y)

    def to_float(self) -> np.ndarray:
        return np.array([[self.a.embed(), self.b.embed()], [self.c.embed(), self.d.embed()]])

    def entries(self) -> tuple[RingElement, RingElement, RingElement, RingElement]:
        return (self.a, self.b, self.c, self.d)

    def coefficient_block(self) -> np.ndarray:
        """Integer (2d x 2d) matrix acting on stacked coefficient vectors (x; y)."""
        ring = self.ring
        top = np.hstack([ring.mul_matrix(self.a), ring.mul_matrix(self.b)])
        bot = np.hstack([ring.mul_matrix(self.c), ring.mul_matrix(self.d)])
        return np.vstack([top, bot])

    def key(self) -> tuple:
        return tuple(e.coeffs for e in self.entries())

    def __neg__(self):
        cls = type(self)
        return cls(-self.a, -self.b, -self.c, -self.d)


@dataclass(frozen=True)
class GroupElement(ExactMatrix):
    """Determinant-one exact matrix."""

    def __post_init__(self):
        if self.det() != self.ring.one:
            raise ValueError("group element must have determinant 1")

    def inverse(self) -> "GroupElement":
        return GroupElement(self.d, -self.b, -self.c, self.a)

    @classmethod
    def identity(cls, ring: NumberRing) -> "GroupElement":
        return cls(ring.one, ring.zero, ring.zero, ring.one)

    def __pow__(self, n: int) -> "GroupElement":
        base = self if n >= 0 else self.inverse()
        out = GroupElement.identity(self.ring)
        for _ in range(abs(n)):
            out = out @ base
        return out


@dataclass(frozen=True)
class CuspData:
    """A cusp with its scaling transformation sigma = M / sqrt(w).

    M is exact with det M = w (the cusp width), so orbit vectors of the scaled
    orbit are u / sqrt(w) with u exact.
    """

    representative: object  # Fraction or math.inf
    sigma_numerator: ExactMatrix
    cusp_width: RingElement
    stabilizer_generator: GroupElement
    tau: Optional[GroupElement] = None  # SL2(Z) element sending infinity to the cusp

    @property
    def width_float(self) -> float:
        return self.cusp_width.embed()

    @property
    def sigma(self) -> np.ndarray:
        return self.sigma_numerator.to_float() / math.sqrt(self.width_float)

    @property
    def label(self) -> str:
        r = self.representative
        return "inf" if r == math.inf else str(r)

    def base_vector(self) -> tuple[RingElement, RingElement]:
        """Exact u0 = M e1; the scaled orbit starts at u0 / sqrt(w)."""
        return (self.sigma_numerator.a, self.sigma_numerator.c)


@dataclass(frozen=True, eq=False)
class Lattice:
    kind: str
    ring: NumberRing
    generators: tuple[GroupElement, ...]
    contains_minus_identity: bool
    covolume: float
    delta: float
    cusps: tuple[CuspData, ...]
    q: Optional[int] = None
    level: int = 1
    index_in_modular_group: Optional[int] = None
    domain_width: Optional[float] = None  # fundamental domain |Re z| <= width/2, |z| >= 1
    coset_reps: tuple[GroupElement, ...] = ()
    membership: Optional[Callable[[GroupElement], bool]] = field(default=None, repr=False)
    name: str = ""

    def __post_init__(self):
        if not self.covolume > 0:
            raise ValueError("covolume must be positive")
        if not (0 < self.delta <= 2.0 / 3.0 + 1e-15):
            raise ValueError("delta must lie in (0, 2/3]")

    @property
    def y_floor(self) -> Optional[float]:
        if self.domain_width is None:
            return None
        return math.sqrt(max(1.0 - self.domain_width**2 / 4.0, 0.0))

    @property
    def is_arithmetic(self) -> bool:
        return self.kind in ("sl2z", "congruence")

    def cusp(self, label: str | int = 0) -> CuspData:
        if isinstance(label, int):
            return self.cusps[label]
        for c in self.cusps:
            if c.label == str(label):
                return c
        raise KeyError(f"no cusp labelled {label!r}; known: {[c.label for c in self.cusps]}")

    def config_key(self) -> str:
        if self.kind == "sl2z":
            return "sl2z"
        if self.kind == "hecke":
            return f"hecke-q{self.q}"
        if self.kind == "congruence":
            return f"gamma-N{self.level}"
        return "custom-" + self.name

    def contains(self, g: GroupElement) -> bool:
        if self.membership is None:
            raise NotImplementedError("membership test is not available for this lattice")
        return self.membership(g)


def c_gamma(L: Lattice) -> float:
    return (2.0 if L.contains_minus_identity else 1.0) / (math.pi * L.covolume)


def _S(ring: NumberRing) -> GroupElement:
    return GroupElement(ring.zero, -ring.one, ring.one, ring.zero)


def _T(ring: NumberRing, step: RingElement) -> GroupElement:
    return GroupElement(ring.one, step, ring.zero, ring.one)


_SL2Z_CACHE: dict = {}


def build_sl2z(delta: float = 2.0 / 3.0) -> Lattice:
    key = ("sl2z", delta)
    if key in _SL2Z_CACHE:
        return _SL2Z_CACHE[key]
    ring = integer_ring()
    S, T = _S(ring), _T(ring, ring.one)
    ident = GroupElement.identity(ring)
    cusp = CuspData(math.inf, ident, ring.one, T, tau=ident)
    L = Lattice("sl2z", ring, (S, T), True, math.pi / 3.0, delta, (cusp,), q=3, level=1,
                index_in_modular_group=1, domain_width=1.0, coset_reps=(ident,),
                membership=lambda g: g.ring is ring, name="sl2z")
    _SL2Z_CACHE[key] = L
    return L


def build_hecke(q: int, delta: float = 2.0 / 3.0) -> Lattice:
    if q < 3:
        raise ValueError("Hecke groups need q >= 3")
    if q == 3:
        return build_sl2z(delta)
    ring = ring_for_hecke(q)
    lam = ring.generator
    S, T = _S(ring), _T(ring, lam)
    M = ExactMatrix(lam, ring.zero, ring.zero, ring.one)
    cusp = CuspData(math.inf, M, lam, T)
    return Lattice("hecke", ring, (S, T), True, math.pi * (1.0 - 2.0 / q), delta, (cusp,), q=q,
                   domain_width=lam.embed(), name=f"hecke{q}")


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def modular_index(N: int) -> int:
    idx = N**3
    for p in _prime_factors(N):
        idx = idx * (p * p - 1) // (p * p)
    return idx


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        qt = a // b
        a, b = b, a - qt * b
        x0, x1 = x1, x0 - qt * x1
        y0, y1 = y1, y0 - qt * y1
    return a, x0, y0


def complete_to_sl2z(a: int, c: int) -> tuple[int, int, int, int]:
    """Integer matrix (a, b; c, d) of determinant 1 with the given first column."""
    g, x, y = _ext_gcd(a, c)
    if abs(g) != 1:
        raise ValueError("column must be primitive")
    # a*x + c*y = g = +-1  ->  a*(g*x) - c*(-g*y) = 1
    return a, -g * y, c, g * x


def _mod_key(m: np.ndarray, N: int) -> tuple:
    return tuple(int(v) % N for v in m.ravel())


def build_congruence(N: int, delta: float = 2.0 / 3.0) -> Lattice:
    """Principal congruence subgroup Gamma(N)."""
    if N < 1:
        raise ValueError("N must be positive")
    if N == 1:
        return build_sl2z(delta)
    ring = integer_ring()
    S_int = np.array([[0, -1], [1, 0]], dtype=object)
    T_int = np.array([[1, 1], [0, 1]], dtype=object)
    ident = np.array([[1, 0], [0, 1]], dtype=object)
    # coset representatives of Gamma(N) in SL2(Z) by breadth-first search on SL2(Z/N)
    reps = {_mod_key(ident, N): ident}
    order = [ident]
    head = 0
    while head < len(order):
        r = order[head]
        head += 1
        for s in (S_int, T_int):
            m = r.dot(s)
            k = _mod_key(m, N)
            if k not in reps:
                reps[k] = m
                order.append(m)
    index = modular_index(N)
    if len(order) != index:
        raise AssertionError("coset enumeration mismatch")

    def to_ge(m) -> GroupElement:
        return GroupElement.from_ints(ring, [[int(m[0, 0]), int(m[0, 1])], [int(m[1, 0]), int(m[1, 1])]])

    # Schreier generators r s rep(r s)^-1
    gens: dict[tuple, GroupElement] = {}
    for r in order:
        for s in (S_int, T_int):
            m = r.dot(s)
            rep = reps[_mod_key(m, N)]
            rep_inv = np.array([[rep[1, 1], -rep[0, 1]], [-rep[1, 0], rep[0, 0]]], dtype=object)
            h = m.dot(rep_inv)
            if (h == ident).all():
                continue
            g = to_ge(h)
            if g.key() in gens or g.inverse().key() in gens:
                continue
            gens[g.key()] = g
    minus = N <= 2
    covol = index * math.pi / 3.0 / (1.0 if minus else 2.0)

    def member(g: GroupElement) -> bool:
        if g.ring is not ring:
            return False
        a, b, c, d = (e.coeffs[0] for e in g.entries())
        return (a - 1) % N == 0 and b % N == 0 and c % N == 0 and (d - 1) % N == 0

    # cusps: classes of primitive vectors mod N up to sign
    seen: set = set()
    cusp_cols: list[tuple[int, int]] = []
    box = max(N, 2)
    cands = [(a, c) for a in range(-box, box + 1) for c in range(0, box + 1) if math.gcd(a, c) == 1]
    cands.sort(key=lambda v: (v[1] != 0, v[0] != 0, v[0] ** 2 + v[1] ** 2, v[1], -v[0]))
    for a, c in cands:
        k1 = (a % N, c % N)
        k2 = ((-a) % N, (-c) % N)
        if k1 in seen:
            continue
        seen.add(k1)
        seen.add(k2)
        cusp_cols.append((a, c))
    cusps = []
    TN = _T(ring, ring.from_int(N))
    diagN = ExactMatrix.from_ints(ring, [[N, 0], [0, 1]])
    for a, c in cusp_cols:
        a_, b_, c_, d_ = complete_to_sl2z(a, c)
        tau = GroupElement.from_ints(ring, [[a_, b_], [c_, d_]])
        rep = math.inf if c == 0 else Fraction(a, c)
        cusps.append(CuspData(rep, tau @ diagN, ring.from_int(N), tau @ TN @ tau.inverse(), tau=tau))
    return Lattice("congruence", ring, tuple(gens.values()), minus, covol, delta, tuple(cusps),
                   q=3, level=N, index_in_modular_group=index, domain_width=1.0,
                   coset_reps=tuple(to_ge(m) for m in order), membership=member, name=f"gamma{N}")


def build_custom(ring: NumberRing, generators: Sequence[GroupElement], covolume: float,
                 contains_minus_identity: bool, cusp_width: RingElement,
                 delta: float = 2.0 / 3.0, name: str = "custom") -> Lattice:
    """A user-described lattice with a single cusp at infinity of the given width."""
    M = ExactMatrix(cusp_width, ring.zero, ring.zero, ring.one)
    gamma = _T(ring, cusp_width)
    cusp = CuspData(math.inf, M, cusp_width, gamma)
    return Lattice("custom", ring, tuple(generators), contains_minus_identity, covolume, delta,
                   (cusp,), name=name)


def cusp_membership_test(L: Lattice, g: GroupElement) -> bool:
    """True iff g fixes infinity, i.e. its lower-left entry is exactly zero."""
    return g.c.is_zero()


def _translation(L: Lattice, k: int) -> GroupElement:
    ring = L.ring
    step = ring.generator if L.kind == "hecke" else ring.one
    return _T(ring, step * k)


def reduce_point(L: Lattice, z: complex, max_iter: int = 10_000) -> tuple[complex, GroupElement]:
    """Move z into the standard fundamental domain; returns (z_reduced, word) with word.z = z_reduced.

    Available for SL2(Z) and Hecke groups.  On the boundary the representative
    with Re z <= 0 is preferred.
    """
    if L.kind not in ("sl2z", "hecke"):
        raise NotImplementedError("reduce_point is available for sl2z and hecke lattices")
    z = complex(z)
    if not z.imag > 0:
        raise ValueError("z must lie in the upper half plane")
    ring = L.ring
    w = L.domain_width
    S = _S(ring)
    word = GroupElement.identity(ring)
    tol = 1e-13
    for _ in range(max_iter):
        k = math.floor(z.real / w + 0.5)
        if k != 0:
            z = z - k * w
            word = _translation(L, -k) @ word
        r2 = abs(z) ** 2
        if r2 < 1.0 - tol or (abs(r2 - 1.0) <= tol and z.real > tol):
            z = -1.0 / z
            word = S @ word
            continue
        return z, word
    raise ReductionError("reduction did not converge")


def _reduce_vector(x: np.ndarray, step: float, step_elem: RingElement, ring: NumberRing,
                   max_iter: int = 2000, max_height: float = 1e6) -> GroupElement:
    """Word W (in S and the translation by step) with W x on the positive e1 axis.

    The stopping tolerance tracks the float error accumulated by W.  A word whose
    entries exceed ``max_height`` means x is not distinguishable from a non-cusp
    direction, and ReductionError is raised.
    """
    S = _S(ring)
    W = GroupElement.identity(ring)
    v = np.array(x, dtype=float)
    scale = float(np.hypot(*v))
    height = 1.0
    for _ in range(max_iter):
        a, c = v
        tol = 64 * np.finfo(float).eps * height * scale
        if abs(c) <= tol:
            if a < 0:
                W = (S @ S) @ W
            return W
        k = round(a / (step * c))
        if k != 0:
            W = _T(ring, step_elem * (-k)) @ W
            v = np.array([a - k * step * c, c])
            a, c = v
            height = float(np.abs(W.to_float()).max())
            if height > max_height:
                break
            if abs(c) <= 64 * np.finfo(float).eps * height * scale:
                continue
        W = S @ W
        v = np.array([-c, a])
    raise ReductionError("vector is not in a parabolic direction (reduction did not terminate)")


def scaling_factor(x, L: Lattice, cusp: Optional[CuspData] = None) -> float:
    """Scale factor lam with Gamma x = lam * Lambda_cusp, via ||x|| / sqrt(tr(S gamma_x))."""
    v = np.array([float(t) for t in x], dtype=float)
    if not np.any(v):
        raise ValueError("x must be nonzero")
    if L.kind == "hecke":
        lam = L.ring.generator
        W = _reduce_vector(v, lam.embed(), lam, L.ring)
        gen = _T(L.ring, lam)
    elif L.kind in ("sl2z", "congruence"):
        W = _reduce_vector(v, 1.0, L.ring.one, L.ring)
        gen = _T(L.ring, L.ring.from_int(L.level))
        if cusp is not None and L.kind == "congruence":
            col = W.inverse().apply((L.ring.one, L.ring.zero))
            a, c = (e.coeffs[0] for e in col)
            ta, tc = (e.coeffs[0] for e in cusp.tau.apply((L.ring.one, L.ring.zero)))
            N = L.level
            if not (((a - ta) % N == 0 and (c - tc) % N == 0) or
                    ((a + ta) % N == 0 and (c + tc) % N == 0)):
                raise ValueError("x does not point to the given cusp class")
    else:
        raise NotImplementedError("scaling_factor needs a built-in lattice")
    gamma = W.inverse() @ gen @ W
    tr = (_S(L.ring) @ gamma).trace().embed()
    if tr < 0:
        tr = -tr
    return float(np.hypot(*v) / math.sqrt(tr))


# ---------------------------------------------------------------- configuration

def parse_lattice_config(text: str) -> dict[str, str]:
    """Parse key=value lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _parse_elem(ring: NumberRing, text: str) -> RingElement:
    parts = [p for p in text.replace(";", " ").split() if p]
    return ring.element(int(p) for p in parts)


def lattice_from_config(cfg: Mapping[str, object] | str) -> Lattice:
    """Build a lattice from a mapping or config text.

    Keys: kind (sl2z | hecke | congruence | custom), q, N, delta.  Custom
    lattices also take ring_q, covolume, minus_identity, cusp_width and
    generators; ring elements are written as space separated coefficient
    lists, and matrices as four such lists separated by '|'.
    """
    if isinstance(cfg, str):
        cfg = parse_lattice_config(cfg)
    kind = str(cfg.get("kind", "sl2z")).lower()
    delta = float(cfg.get("delta", 2.0 / 3.0))
    if kind in ("sl2z", "modular"):
        return build_sl2z(delta)
    if kind == "hecke":
        return build_hecke(int(cfg.get("q", 3)), delta)
    if kind in ("congruence", "gamma"):
        return build_congruence(int(cfg.get("N", cfg.get("n", 1))), delta)
    if kind.startswith("gamma") and kind[5:].isdigit():
        return build_congruence(int(kind[5:]), delta)
    if kind == "custom":
        ring = ring_for_hecke(int(cfg.get("ring_q", 3)))
        gens = []
        for gtxt in str(cfg["generators"]).split(","):
            entries = [_parse_elem(ring, e) for e in gtxt.split("|")]
            if len(entries) != 4:
                raise ValueError("each generator needs four entries separated by '|'")
            gens.append(GroupElement(*entries))
        minus = str(cfg.get("minus_identity", "true")).lower() in ("1", "true", "yes")
        width = _parse_elem(ring, str(cfg.get("cusp_width", "1")))
        return build_custom(ring, gens, float(cfg["covolume"]), minus, width, delta,
                            name=str(cfg.get("name", "custom")))
    raise ValueError(f"unknown lattice kind {kind!r}")
