"""Pair statistics of scaled orbits: determinant tables, Phi, friends, determinant pairs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .exact import RingElement, exact_signs
from .fuchsian import CuspData, Lattice, c_gamma
from .orbit import DiscreteOrbit, HolonomySet
from .rows import totient_table
from .testfunctions import TestFunction

__all__ = [
    "ExactDeterminant",
    "PairTable",
    "PhiFunction",
    "build_pair_table",
    "phi_function",
    "partial_sum",
    "friends",
    "det_pairs",
    "pair_correlation",
    "length_density",
    "correlation_integral",
    "correlation_integral_ball_quadrature",
    "reduce_to_cusp_frame",
]


@dataclass(frozen=True)
class ExactDeterminant:
    """A determinant value numerator / denominator with exact numerator."""

    numerator: RingElement
    denominator: float

    def __float__(self) -> float:
        return self.numerator.embed() / self.denominator


@dataclass
class PairTable:
    lattice: Lattice
    cusp_a: CuspData
    cusp_b: CuspData
    max_c: float
    entries: dict
    is_homothetic_pair: bool
    c_values: np.ndarray = field(repr=False)       # sorted positive admissible values
    multiplicities: np.ndarray = field(repr=False)

    @property
    def c_gamma(self) -> float:
        return c_gamma(self.lattice)

    def phi(self, c) -> int:
        return int(self.entries.get(c, 0))


def _cusp_frame_residue(L: Lattice, cusp_a: CuspData, cusp_b: CuspData) -> tuple[int, int]:
    N = L.level
    ta, tb = cusp_a.tau, cusp_b.tau
    v = (ta.inverse() @ tb).apply((L.ring.one, L.ring.zero))
    return v[0].coeffs[0] % N, v[1].coeffs[0] % N


def build_pair_table(L: Lattice, cusp_a: Union[CuspData, int, str, None] = None,
                     cusp_b: Union[CuspData, int, str, None] = None, C: float = 100.0,
                     strategy: str = "auto") -> PairTable:
    """Admissible determinants 0 < c <= C with multiplicities phi_ab(c).

    phi_ab(c) counts points (s, c) of sigma_a^{-1} Lambda_b with 0 < s <= c.
    """
    if not C > 0:
        raise ValueError("C must be positive")
    if not L.contains_minus_identity:
        raise ValueError("the box count of determinant classes needs -I in the lattice")
    ca = L.cusps[0] if cusp_a is None else (cusp_a if isinstance(cusp_a, CuspData) else L.cusp(cusp_a))
    cb = ca if cusp_b is None else (cusp_b if isinstance(cusp_b, CuspData) else L.cusp(cusp_b))
    homothetic = ca.label == cb.label
    use_arith = L.is_arithmetic and strategy in ("auto", "arith")
    if use_arith and L.level == 1 and strategy == "auto":
        # the box count for the modular group is exactly Euler's totient
        phi = totient_table(int(math.floor(C + 1e-12)))
        entries, zero = {int(m): int(phi[m]) for m in range(1, len(phi))}, 1
    elif use_arith:
        entries, zero = _arith_table(L, ca, cb, C)
    else:
        orbit = DiscreteOrbit(L, cb, strategy="bfs" if strategy == "bfs" else "auto")
        entries, zero = _enumerated_table(orbit, ca, C)
    if zero:
        entries = {0: zero, **entries}
    pos = [(float(k), v) for k, v in entries.items() if float(k) > 0]
    pos.sort()
    cv = np.array([p[0] for p in pos])
    mv = np.array([p[1] for p in pos], dtype=np.int64)
    return PairTable(L, ca, cb, float(C), entries, homothetic, cv, mv)


def _arith_table(L: Lattice, ca: CuspData, cb: CuspData, C: float) -> tuple[dict, int]:
    # sigma_a^{-1} Lambda_b = diag(1, N) {eta primitive, eta = +-v mod N}
    N = L.level
    v = _cusp_frame_residue(L, ca, cb) if N > 1 else (1, 0)
    signs = (1, -1) if L.contains_minus_identity else (1,)
    m_max = int(math.floor(C / N + 1e-12))
    counts: dict = {}
    block = 2000
    for start in range(1, m_max + 1, block):
        m = np.arange(start, min(m_max, start + block - 1) + 1, dtype=np.int64)
        lens = N * m
        rows = np.repeat(m, lens)
        offs = np.arange(len(rows)) - np.repeat(np.cumsum(lens) - lens, lens) + 1
        ok = np.gcd(offs, rows) == 1
        cong = np.zeros(len(rows), dtype=bool)
        for sg in signs:
            cong |= ((rows - sg * v[1]) % N == 0) & ((offs - sg * v[0]) % N == 0)
        hit = np.bincount(rows[ok & cong] - start, minlength=len(m))
        for mm, h in zip(m, hit):
            if h:
                counts[int(N * mm)] = int(h)
    zero = int(any((1 - sg * v[0]) % N == 0 and (sg * v[1]) % N == 0 for sg in signs))
    return counts, zero


def _enumerated_table(orbit: DiscreteOrbit, ca: CuspData, C: float) -> tuple[dict, int]:
    ring = orbit.ring
    num, denom = orbit.frame_numerators(ca, math.sqrt(2.0) * C)
    s_num, t_num = num[:, 0, :], num[:, 1, :]
    s = ring.embed_array(s_num) / denom
    t = ring.embed_array(t_num) / denom
    t_zero = np.all(t_num == 0, axis=1)
    zero = int(np.sum(t_zero & (s > 0)))
    cand = np.nonzero((~t_zero) & (t > 0) & (t <= C * (1 + 1e-12)) & (s > -1e-9) & (s <= t * (1 + 1e-9) + 1e-9))[0]
    ok = (exact_signs(ring, t_num[cand]) > 0) & (exact_signs(ring, s_num[cand]) > 0) & (
        exact_signs(ring, t_num[cand] - s_num[cand]) >= 0)
    keep = cand[ok]
    counts: dict = {}
    integral = ring.degree == 1
    for row in t_num[keep]:
        coeffs = tuple(int(c) for c in row)
        if integral:
            key = Fraction(coeffs[0]) / Fraction(denom).limit_denominator(10**6)
            key = int(key) if key.denominator == 1 else key
        else:
            key = ExactDeterminant(ring.element(coeffs), denom)
        counts[key] = counts.get(key, 0) + 1
    return counts, zero


class PhiFunction:
    """Phi(t) = t * sum_{c >= t} phi(c) / c^3, completed beyond C_trunc by c_Gamma / C_trunc."""

    def __init__(self, table: PairTable, C_trunc: float):
        if C_trunc > table.max_c * (1 + 1e-12):
            raise ValueError(f"C_trunc={C_trunc} exceeds the table range {table.max_c}")
        sel = table.c_values <= C_trunc * (1 + 1e-12)
        self.c = table.c_values[sel]
        self.m = table.multiplicities[sel].astype(float)
        self.C = float(C_trunc)
        self.cg = table.c_gamma
        w = self.m / self.c**3
        self.tail = self.cg / self.C
        self.suffix = np.append(np.cumsum(w[::-1])[::-1], 0.0) + self.tail
        # antiderivative of t * Phi(t) at the breakpoints
        b = np.concatenate([[0.0], self.c])
        pieces = self.suffix[: len(self.c)] * (b[1:] ** 3 - b[:-1] ** 3) / 3.0
        self.F_at = np.concatenate([[0.0], np.cumsum(pieces)])
        cs = np.cumsum(self.m)
        band = (self.c >= self.C / 2)
        if band.any():
            dev = np.abs(cs[band] - 0.5 * self.cg * self.c[band] ** 2)
            dev_prev = np.abs(cs[band] - self.m[band] - 0.5 * self.cg * self.c[band] ** 2)
            self.partial_dev = float(max(dev.max(), dev_prev.max()))
        else:
            self.partial_dev = 0.5 * self.cg * self.C**2
        self.tail_rel = 4.0 * self.partial_dev / self.C**3

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        k = np.searchsorted(self.c, t, side="left")
        val = t * self.suffix[k]
        return np.where(t > self.C, self.cg, val)

    def tail_bound(self, t) -> np.ndarray:
        return np.asarray(t, float) * self.tail_rel

    def antiderivative(self, X) -> np.ndarray:
        """F(X) = int_0^X t Phi(t) dt."""
        X = np.asarray(X, float)
        Xc = np.minimum(X, self.C)
        k = np.searchsorted(self.c, Xc, side="left")
        prev = np.where(k > 0, self.c[np.maximum(k - 1, 0)], 0.0)
        out = self.F_at[k] + self.suffix[k] * (Xc**3 - prev**3) / 3.0
        beyond = np.maximum(X - self.C, 0.0)
        return out + self.cg * ((self.C + beyond) ** 2 - self.C**2) / 2.0


def phi_function(table: PairTable, t: float, C_trunc: Optional[float] = None) -> tuple[float, float]:
    """(Phi_ab(t), tail uncertainty bound)."""
    if not t > 0:
        raise ValueError("t must be positive")
    C = table.max_c if C_trunc is None else float(C_trunc)
    if C < t:
        raise ValueError("C_trunc must be at least t")
    f = PhiFunction(table, C)
    return float(f(t)), float(f.tail_bound(t))


def partial_sum(table: PairTable, T: float) -> int:
    """sum_{0 < c < T} phi_ab(c)."""
    if T > table.max_c * (1 + 1e-12):
        raise ValueError(f"T={T} exceeds the table range {table.max_c}")
    return int(table.multiplicities[table.c_values < T].sum())


# ---------------------------------------------------------------- point-pair statistics

def _grid_pairs(xy: np.ndarray, centers_mask: np.ndarray, eta: float, chunk: int = 200_000):
    """Yield (i, j, dist) for centers i and all j with cell distance <= 1 (cell size eta)."""
    cells = np.floor(xy / eta).astype(np.int64)
    span = int(cells[:, 1].max() - cells[:, 1].min() + 3) if len(cells) else 3
    ymin = int(cells[:, 1].min()) - 1 if len(cells) else 0
    key = cells[:, 0] * span + (cells[:, 1] - ymin)
    order = np.argsort(key, kind="stable")
    skey = key[order]
    centers = np.nonzero(centers_mask)[0]
    for a in range(0, len(centers), chunk):
        ci = centers[a : a + chunk]
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                nk = key[ci] + dx * span + dy
                lo = np.searchsorted(skey, nk, side="left")
                hi = np.searchsorted(skey, nk, side="right")
                cnt = hi - lo
                tot = int(cnt.sum())
                if tot == 0:
                    continue
                ii = np.repeat(ci, cnt)
                jj = order[np.repeat(lo, cnt) + (np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt))]
                d = np.hypot(*(xy[jj] - xy[ii]).T)
                yield ii, jj, d


def friends(S: HolonomySet, R: float, eta: float) -> int:
    """Ordered pairs (x, y), x in S with |x| <= R, y in S, 0 < |y - x| < eta."""
    if not (R > 0 and eta > 0):
        raise ValueError("R and eta must be positive")
    if not S.components:
        return 0
    xy, _ = S.points(R + eta)
    if len(xy) == 0:
        return 0
    inner = np.einsum("ij,ij->i", xy, xy) <= R * R * (1 + 1e-12)
    total = 0
    for _, _, d in _grid_pairs(xy, inner, eta):
        total += int(np.count_nonzero((d > 0) & (d < eta)))
    return total


def reduce_to_cusp_frame(points: np.ndarray, orbit: DiscreteOrbit, max_iter: int = 500) -> np.ndarray:
    """Float matrices g_x in the lattice with g_x sigma e1 = x, for orbit points x.

    Available for lattices generated by S and one translation (SL2(Z), Hecke).
    """
    L = orbit.lattice
    if L.kind not in ("sl2z", "hecke"):
        raise NotImplementedError("frame reduction needs an S, T generated lattice")
    step = L.domain_width
    a = points[:, 0].astype(float).copy()
    c = points[:, 1].astype(float).copy()
    n = len(a)
    W = np.zeros((n, 2, 2))
    W[:, 0, 0] = W[:, 1, 1] = 1.0
    scale = np.hypot(a, c)
    tol = 1e-9 * np.maximum(scale, 1.0)
    for _ in range(max_iter):
        act = np.abs(c) > tol
        if not act.any():
            break
        idx = np.nonzero(act)[0]
        k = np.rint(a[idx] / (step * c[idx]))
        a[idx] -= k * step * c[idx]
        W[idx, 0, :] -= (k * step)[:, None] * W[idx, 1, :]
        act2 = np.abs(c[idx]) > tol[idx]
        j = idx[act2]
        a[j], c[j] = -c[j], a[j].copy()
        r0 = W[j, 0, :].copy()
        W[j, 0, :] = -W[j, 1, :]
        W[j, 1, :] = r0
    else:
        raise RuntimeError("frame reduction did not terminate")
    neg = a < 0
    W[neg] *= -1.0
    # g_x = W^{-1}; W has determinant one
    g = np.empty_like(W)
    g[:, 0, 0] = W[:, 1, 1]
    g[:, 1, 1] = W[:, 0, 0]
    g[:, 0, 1] = -W[:, 0, 1]
    g[:, 1, 0] = -W[:, 1, 0]
    return g


def _same_orbit(o1: DiscreteOrbit, o2: DiscreteOrbit) -> bool:
    return o1 is o2 or (o1.lattice is o2.lattice and o1.cusp.label == o2.cusp.label)


def det_pairs(S: HolonomySet, R: float, D: float, s: float, method: str = "auto") -> int:
    """Ordered pairs (x, y) in S x S with |x| <= R, |y| <= s|x| and |x ^ y| <= D."""
    if not (R > 0 and D > 0 and s > 0):
        raise ValueError("R, D and s must be positive")
    total = 0
    for lam_i, orb_i in S.components:
        pts_i = orb_i.points(R / lam_i)
        if len(pts_i) == 0:
            continue
        x0 = pts_i.xy
        nx = lam_i * np.hypot(x0[:, 0], x0[:, 1])
        for lam_j, orb_j in S.components:
            fast = (method != "brute" and _same_orbit(orb_i, orb_j)
                    and orb_i.lattice.kind in ("sl2z", "hecke"))
            if fast:
                g = reduce_to_cusp_frame(x0, orb_i)
                table = orb_j.row_table()
                total += int(table.count_ellipses(g, None, s * nx / lam_j,
                                                  row_cap=D / (lam_i * lam_j) * (1 + 1e-12)).sum())
            else:
                ys = lam_j * orb_j.points(s * R / lam_j).xy
                xs = lam_i * x0
                ny = np.hypot(ys[:, 0], ys[:, 1])
                step = max(1, 4_000_000 // max(len(ys), 1))
                for a in range(0, len(xs), step):
                    xb = xs[a : a + step]
                    det = np.abs(np.outer(xb[:, 0], ys[:, 1]) - np.outer(xb[:, 1], ys[:, 0]))
                    ok = (det <= D * (1 + 1e-12)) & (ny[None, :] <= (s * nx[a : a + step])[:, None] * (1 + 1e-12))
                    total += int(ok.sum())
    return total


def pair_correlation(S: HolonomySet, R: float, s: float, c_M: float) -> float:
    """#{(x, y) : |x| <= R, 0 < |y - x| < s / sqrt(c_M)} / |S cap B_R|."""
    if not (R > 0 and s > 0 and c_M > 0):
        raise ValueError("R, s and c_M must be positive")
    n = S.count(R)
    if n == 0:
        raise ValueError("no points of S in the ball")
    return friends(S, R, s / math.sqrt(c_M)) / n


def length_density(S: HolonomySet, intervals: Sequence[tuple[float, float]], R: float) -> float:
    """Fraction of points of S in B_R whose length lies in the union of closed intervals."""
    xy, _ = S.points(R)
    if len(xy) == 0:
        raise ValueError("no points of S in the ball")
    r = np.hypot(xy[:, 0], xy[:, 1])
    hit = np.zeros(len(r), dtype=bool)
    for a, b in intervals:
        hit |= (r >= a) & (r <= b)
    return float(hit.mean())


# ---------------------------------------------------------------- correlation integrals

def correlation_integral(f: TestFunction, table: PairTable, mc_samples: int,
                         rng: np.random.Generator, C_trunc: Optional[float] = None,
                         constant: bool = False) -> tuple[float, float]:
    """Monte Carlo estimate (value, standard error) of the double integral of Phi(|x ^ y|) f(x, y).

    With ``constant=True`` Phi is replaced by c_Gamma (sanity mode).
    """
    phi = PhiFunction(table, table.max_c if C_trunc is None else C_trunc)
    n = int(mc_samples)
    R = f.R
    rad = R * np.sqrt(rng.random(n))
    ang = rng.random(n) * 2 * math.pi
    x = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    if f.kind == "pair_ball":
        r2 = f.R2 * np.sqrt(rng.random(n))
        a2 = rng.random(n) * 2 * math.pi
        y = np.stack([r2 * np.cos(a2), r2 * np.sin(a2)], axis=1)
        vol = (math.pi * R * R) * (math.pi * f.R2**2)
        weight = np.ones(n)
    elif f.kind == "pair_friend":
        r2 = f.eta * np.sqrt(rng.random(n))
        a2 = rng.random(n) * 2 * math.pi
        y = x + np.stack([r2 * np.cos(a2), r2 * np.sin(a2)], axis=1)
        vol = (math.pi * R * R) * (math.pi * f.eta**2)
        weight = np.ones(n)
    elif f.kind == "pair_det":
        rx = np.hypot(x[:, 0], x[:, 1])
        r2 = f.s * rx * np.sqrt(rng.random(n))
        a2 = rng.random(n) * 2 * math.pi
        y = np.stack([r2 * np.cos(a2), r2 * np.sin(a2)], axis=1)
        vol = math.pi * R * R
        det = np.abs(x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0])
        weight = math.pi * (f.s * rx) ** 2 * (det <= f.D)
    else:
        raise ValueError("pair test function required")
    wedge = np.abs(x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0])
    vals = weight * (table.c_gamma if constant else phi(wedge))
    return float(vol * vals.mean()), float(vol * vals.std(ddof=1) / math.sqrt(n))


def correlation_integral_ball_quadrature(table: PairTable, R: float,
                                         C_trunc: Optional[float] = None) -> tuple[float, float]:
    """Quadrature value of the integral of Phi(|x ^ y|) over B_R x B_R, with its tail uncertainty.

    Uses 8 pi int_0^R sqrt(R^2 - w^2) F(R w) / w^2 dw with F(X) = int_0^X t Phi(t) dt.
    """
    phi = PhiFunction(table, table.max_c if C_trunc is None else C_trunc)

    def integrand(w):
        if w <= 0:
            return 0.0
        return math.sqrt(max(R * R - w * w, 0.0)) * float(phi.antiderivative(R * w)) / (w * w)

    brk = [c / R for c in phi.c if c < R * R]
    pts = brk[:: max(1, len(brk) // 45)][:49]
    val, err = integrate.quad(integrand, 0.0, R, points=pts or None, limit=2000, epsabs=1e-10, epsrel=1e-10)
    total = 8 * math.pi * val
    # Phi is perturbed by at most tail_rel * t; propagate through the same integral
    tail = 8 * math.pi * integrate.quad(
        lambda w: math.sqrt(max(R * R - w * w, 0.0)) * phi.tail_rel * (R * w) ** 4 / 4.0 / (w * w) if w > 0 else 0.0,
        0.0, R, limit=200)[0]
    return total, abs(tail) + 8 * math.pi * abs(err)
