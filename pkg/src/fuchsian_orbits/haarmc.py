"""Monte Carlo on G/Gamma: Haar and cone samples, theta transforms, mean value checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .fuchsian import Lattice, c_gamma
from .orbit import DiscreteOrbit, HolonomySet
from .pairstats import PairTable, build_pair_table, correlation_integral_ball_quadrature
from .rows import RowLimitError, RowTable
from .testfunctions import TestFunction, ball_indicator, pair_ball

__all__ = [
    "HaarSample",
    "ConeSample",
    "HaarBatch",
    "CheckReport",
    "ThetaCapError",
    "sample_mu",
    "sample_cone",
    "sample_mu_batch",
    "sample_cone_batch",
    "worker_streams",
    "theta",
    "ball_counts",
    "first_moment_check",
    "pair_moment_check",
    "second_moment_check",
    "avg_pair_correlation",
]

MAX_REJECTION_ROUNDS = 200
THETA_NORM_CAP = 1e3


class ThetaCapError(RuntimeError):
    """Point enumeration for a theta transform would exceed the norm cap."""


@dataclass(frozen=True)
class HaarSample:
    """h = n_x a_sqrt(y) k_theta with h.i = z in the fundamental domain; g = h^{-1} acts on the lattice."""

    h: np.ndarray
    g: np.ndarray
    z: complex
    theta: float


@dataclass(frozen=True)
class ConeSample:
    nu: float
    A: np.ndarray
    base: HaarSample


@dataclass
class HaarBatch:
    h: np.ndarray       # (n, 2, 2)
    g: np.ndarray       # (n, 2, 2), lattice action
    z: np.ndarray       # complex (n,)
    theta: np.ndarray
    nu: Optional[np.ndarray] = None
    acceptance: float = 1.0

    @property
    def A(self) -> np.ndarray:
        if self.nu is None:
            return self.g
        return np.sqrt(self.nu)[:, None, None] * self.g

    def __len__(self) -> int:
        return len(self.theta)


@dataclass
class CheckReport:
    formula: str
    lattice: str
    params: dict
    n: int
    seed: Optional[int]
    estimate: float
    stderr: float
    reference: float
    reference_uncertainty: float
    z_score: float
    resample_rate: float
    rel_tolerance: float = 0.0
    breakdown: dict = field(default_factory=dict)

    @property
    def rel_gap(self) -> float:
        if self.reference == 0:
            return 0.0 if self.estimate == 0 else math.inf
        return abs(self.estimate - self.reference) / abs(self.reference)

    @property
    def passed(self) -> bool:
        """|estimate - reference| <= max(3 sigma, rel_tolerance * |reference|)."""
        sig = math.hypot(self.stderr, self.reference_uncertainty)
        gap = abs(self.estimate - self.reference)
        return bool(gap <= max(3.0 * sig, self.rel_tolerance * abs(self.reference)) + 1e-300)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rel_gap"] = self.rel_gap
        out["passed"] = self.passed
        return out


def _make_report(formula, L, params, n, seed, est, se, ref, ref_unc, resample, tol=0.0, breakdown=None):
    sig = math.hypot(se, ref_unc)
    z = (est - ref) / sig if sig > 0 else (0.0 if est == ref else math.copysign(math.inf, est - ref))
    return CheckReport(formula, L.config_key(), params, int(n), seed, float(est), float(se), float(ref),
                       float(ref_unc), float(z), float(resample), float(tol), breakdown or {})


# ---------------------------------------------------------------- sampling

def worker_streams(seed: Optional[int], workers: int = 1) -> list[np.random.Generator]:
    """Independent generators for each worker, spawned from one root seed."""
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(max(1, int(workers)))]


def _base_domain(L: Lattice) -> tuple[float, np.ndarray]:
    """Width of the base fundamental domain and float coset representatives acting on it."""
    if L.kind in ("sl2z", "hecke"):
        return float(L.domain_width), np.eye(2)[None]
    if L.coset_reps:
        reps = np.array([r.to_float() for r in L.coset_reps])
        return 1.0, reps
    raise NotImplementedError(f"no fundamental domain available for lattice kind {L.kind!r}")


def sample_mu_batch(L: Lattice, n: int, rng: np.random.Generator) -> HaarBatch:
    """n draws from the probability Haar measure on G/Gamma."""
    width, reps = _base_domain(L)
    y_floor = math.sqrt(max(1.0 - width * width / 4.0, 0.0))
    xs, ys = [], []
    need, drawn, kept = n, 0, 0
    for _ in range(MAX_REJECTION_ROUNDS):
        if need <= 0:
            break
        m = int(need * 1.3) + 16
        x = (rng.random(m) - 0.5) * width
        y = y_floor / (1.0 - rng.random(m))  # density y^-2 on [y_floor, inf)
        ok = x * x + y * y >= 1.0
        drawn += m
        kept += int(ok.sum())
        xs.append(x[ok][:need])
        ys.append(y[ok][:need])
        need -= len(xs[-1])
    else:
        raise RuntimeError("rejection sampling of the fundamental domain did not finish")
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    th = rng.random(n) * 2 * math.pi
    sy = np.sqrt(y)
    c, s = np.cos(th), np.sin(th)
    # h = n_x a_sqrt(y) k_theta
    h = np.empty((n, 2, 2))
    h[:, 0, 0] = sy * c + x / sy * s
    h[:, 0, 1] = -sy * s + x / sy * c
    h[:, 1, 0] = s / sy
    h[:, 1, 1] = c / sy
    hinv = np.empty_like(h)
    hinv[:, 0, 0] = h[:, 1, 1]
    hinv[:, 1, 1] = h[:, 0, 0]
    hinv[:, 0, 1] = -h[:, 0, 1]
    hinv[:, 1, 0] = -h[:, 1, 0]
    if len(reps) > 1:
        pick = rng.integers(len(reps), size=n)
        hinv = hinv @ reps[pick]
    return HaarBatch(h, hinv, x + 1j * y, th, None, kept / drawn)


def sample_cone_batch(L: Lattice, n: int, rng: np.random.Generator) -> HaarBatch:
    b = sample_mu_batch(L, n, rng)
    b.nu = 1.0 - rng.random(n)  # uniform on (0, 1]
    return b


def sample_mu(L: Lattice, rng: np.random.Generator) -> HaarSample:
    b = sample_mu_batch(L, 1, rng)
    return HaarSample(b.h[0], b.g[0], complex(b.z[0]), float(b.theta[0]))


def sample_cone(L: Lattice, rng: np.random.Generator) -> ConeSample:
    b = sample_cone_batch(L, 1, rng)
    base = HaarSample(b.h[0], b.g[0], complex(b.z[0]), float(b.theta[0]))
    return ConeSample(float(b.nu[0]), math.sqrt(b.nu[0]) * b.g[0], base)


# ---------------------------------------------------------------- theta transforms

def _row_extent(table: RowTable, M: np.ndarray, radius) -> np.ndarray:
    T = M @ table.basis
    det = T[:, 0, 0] * T[:, 1, 1] - T[:, 0, 1] * T[:, 1, 0]
    return np.asarray(radius) * np.hypot(T[:, 1, 0], T[:, 0, 0]) / np.abs(det)


def ball_counts(orbit: DiscreteOrbit, M: np.ndarray, radius, chunk: int = 20000) -> np.ndarray:
    """#{x in orbit : |M_i x| <= radius} for a batch of matrices."""
    M = np.asarray(M, float).reshape(-1, 2, 2)
    table = orbit.row_table()
    out = np.empty(len(M), dtype=np.int64)
    rad = np.broadcast_to(np.asarray(radius, float), (len(M),))
    for a in range(0, len(M), chunk):
        out[a : a + chunk] = table.count_ellipses(M[a : a + chunk], None, rad[a : a + chunk])
    return out


def _feasible(orbit: DiscreteOrbit, M: np.ndarray, radius: float) -> np.ndarray:
    table = orbit.row_table()
    return _row_extent(table, M, radius) <= table.max_t_limit


def theta(orbits: Sequence[DiscreteOrbit] | DiscreteOrbit, f: TestFunction, g: np.ndarray) -> float:
    """Sum of f over the transformed orbit points (ordered pairs for pair functions)."""
    if isinstance(orbits, DiscreteOrbit):
        orbits = [orbits]
    g = np.asarray(g, float)
    oa = orbits[0]
    ob = orbits[-1]
    if f.kind == "ball_indicator":
        return float(ball_counts(oa, g, f.R)[0])
    if f.kind == "pair_ball":
        return float(ball_counts(oa, g, f.R)[0] * ball_counts(ob, g, f.R2)[0])
    # generic pairs: enumerate both orbits inside the support
    ginv = np.linalg.norm(np.linalg.inv(g), 2)
    rad = f.support_radius * ginv
    if ginv > THETA_NORM_CAP:
        raise ThetaCapError(f"|g^-1| = {ginv:.3g} exceeds cap {THETA_NORM_CAP}")
    xa = oa.points(rad).xy @ g.T
    xb = ob.points(rad).xy @ g.T
    xa = xa[np.hypot(xa[:, 0], xa[:, 1]) <= f.R * (1 + 1e-12)]
    total = 0.0
    step = max(1, 2_000_000 // max(len(xb), 1))
    for a in range(0, len(xa), step):
        xx = np.repeat(xa[a : a + step], len(xb), axis=0)
        yy = np.tile(xb, (len(xa[a : a + step]), 1))
        total += float(f.pair_value(xx, yy).sum())
    return total


# ---------------------------------------------------------------- estimator plumbing

def _resampled_ball_counts(L: Lattice, orbits: Sequence[DiscreteOrbit], radii: Sequence[float], n: int,
                           rng: np.random.Generator, cone: bool) -> tuple[HaarBatch, list[np.ndarray], int]:
    """Draw n samples with computable counts; samples whose rows exceed the table cap are redrawn."""
    sampler = sample_cone_batch if cone else sample_mu_batch
    batch = sampler(L, n, rng)
    redrawn = 0
    for _ in range(100):
        A = batch.A
        bad = np.zeros(len(A), dtype=bool)
        for orb, r in zip(orbits, radii):
            bad |= ~_feasible(orb, A, r)
        if not bad.any():
            break
        k = int(bad.sum())
        redrawn += k
        fresh = sampler(L, k, rng)
        for name in ("h", "g", "z", "theta", "nu"):
            arr = getattr(batch, name)
            if arr is not None:
                arr[bad] = getattr(fresh, name)
    else:
        raise RowLimitError("could not draw samples inside the row table cap")
    A = batch.A
    counts = [ball_counts(orb, A, r) for orb, r in zip(orbits, radii)]
    return batch, counts, redrawn


def _run_streams(fn, seed, workers, n):
    """Split n draws across worker streams; returns concatenated per-sample values and redraw count."""
    streams = worker_streams(seed, workers)
    sizes = [n // len(streams) + (1 if i < n % len(streams) else 0) for i in range(len(streams))]
    vals, redrawn = [], 0
    for rng, m in zip(streams, sizes):
        if m == 0:
            continue
        v, r = fn(rng, m)
        vals.append(v)
        redrawn += r
    return np.concatenate(vals, axis=-1), redrawn


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def _rng_or_seed(rng, seed):
    if rng is not None and seed is not None:
        raise ValueError("pass either rng or seed")
    return seed


# ---------------------------------------------------------------- checks

def first_moment_check(L: Lattice, orbit: Optional[DiscreteOrbit], R: float, n: int,
                       seed: Optional[int] = None, workers: int = 1,
                       reference_scale: float = 1.0) -> CheckReport:
    """E_mu[#(g Lambda cap B_R)] against c_Gamma pi R^2."""
    if n < 1000:
        raise ValueError("n must be at least 1000")
    orbit = orbit or DiscreteOrbit(L)

    def job(rng, m):
        _, (cnt,), red = _resampled_ball_counts(L, [orbit], [R], m, rng, cone=False)
        return cnt.astype(float), red

    vals, red = _run_streams(job, seed, workers, n)
    est, se = _mean_se(vals)
    ref = c_gamma(L) * math.pi * R * R * reference_scale
    return _make_report("first-moment", L, {"R": R, "cusp": orbit.cusp.label, "workers": workers}, n, seed,
                        est, se, ref, 0.0, red / (n + red),
                        breakdown={"max_theta": float(vals.max()),
                                   "bias_bound": red / (n + red) * float(vals.max())})


def _pair_reference(L: Lattice, table: PairTable, f: TestFunction, C_trunc: float) -> tuple[float, float, float]:
    """(off-diagonal, its uncertainty, diagonal) reference pieces for a ball x ball function."""
    if f.R != f.R2:
        raise NotImplementedError("quadrature reference is implemented for equal radii")
    integral, unc = correlation_integral_ball_quadrature(table, f.R, C_trunc)
    cg = c_gamma(L)
    diag = (cg / 2.0) * f.diagonal_integral() if table.is_homothetic_pair else 0.0
    return cg * integral, cg * unc, diag


def pair_moment_check(L: Lattice, orbit_a: Optional[DiscreteOrbit], orbit_b: Optional[DiscreteOrbit],
                      f: TestFunction, n: int, seed: Optional[int] = None, workers: int = 1,
                      table_c: float = 2000.0, reference_scale: float = 1.0,
                      rel_tolerance: float = 0.05) -> CheckReport:
    """Cone average of det(A)^2 * Theta_pair(A) against the Phi correlation integral plus diagonal term."""
    if n < 1000:
        raise ValueError("n must be at least 1000")
    if f.kind != "pair_ball":
        raise NotImplementedError("the cone estimator supports ball x ball pair functions")
    orbit_a = orbit_a or DiscreteOrbit(L)
    orbit_b = orbit_b or orbit_a
    table = build_pair_table(L, orbit_a.cusp, orbit_b.cusp, C=table_c)
    off, off_unc, diag = _pair_reference(L, table, f, min(table_c, table.max_c))

    def job(rng, m):
        b, (na, nb), red = _resampled_ball_counts(L, [orbit_a, orbit_b], [f.R, f.R2], m, rng, cone=True)
        return b.nu**2 * na.astype(float) * nb, red

    vals, red = _run_streams(job, seed, workers, n)
    est, se = _mean_se(vals)
    ref = (off + diag) * reference_scale
    return _make_report(
        "pair-moment", L,
        {"R": f.R, "R2": f.R2, "cusp_a": orbit_a.cusp.label, "cusp_b": orbit_b.cusp.label,
         "table_c": table_c, "workers": workers},
        n, seed, est, se, ref, off_unc, red / (n + red), rel_tolerance,
        {"homothetic": table.is_homothetic_pair, "off_diagonal": off, "diagonal": diag,
         "main_term": c_gamma(L) ** 2 * (math.pi * f.R**2) * (math.pi * f.R2**2)})


def second_moment_check(L: Lattice, orbit: Optional[DiscreteOrbit], h: TestFunction, n: int,
                        seed: Optional[int] = None, workers: int = 1, table_c: float = 2000.0,
                        reference_scale: float = 1.0, rel_tolerance: float = 0.05) -> CheckReport:
    """Cone average of det(A)^2 (sum h(Ax))^2 against (c int h)^2 + c int(Phi - c)hh + diagonal.

    The square of the sum is the ordered-pair sum including coincident pairs x = y,
    so the diagonal term is (c/2) int (h(x)h(x) + h(x)h(-x)) dx.
    """
    if n < 1000:
        raise ValueError("n must be at least 1000")
    if h.kind != "ball_indicator":
        raise ValueError("h must be a ball indicator")
    orbit = orbit or DiscreteOrbit(L)
    cg = c_gamma(L)
    if h.R == 0:
        return _make_report("second-moment", L, {"R": 0.0}, n, seed, 0.0, 0.0, 0.0, 0.0, 0.0, rel_tolerance)
    f = pair_ball(h.R)
    table = build_pair_table(L, orbit.cusp, orbit.cusp, C=table_c)
    off, off_unc, diag = _pair_reference(L, table, f, min(table_c, table.max_c))
    main = (cg * h.integral()) ** 2
    residual = off - main

    def job(rng, m):
        b, (cnt,), red = _resampled_ball_counts(L, [orbit], [h.R], m, rng, cone=True)
        c = cnt.astype(float)
        return np.stack([b.nu**2 * c * c, b.nu * c]), red

    vals, red = _run_streams(job, seed, workers, n)
    est, se = _mean_se(vals[0])
    first = float(vals[1].mean())
    ref = (main + residual + diag) * reference_scale
    return _make_report(
        "second-moment", L, {"R": h.R, "cusp": orbit.cusp.label, "table_c": table_c, "workers": workers},
        n, seed, est, se, ref, off_unc, red / (n + red), rel_tolerance,
        {"main_term": main, "phi_residual": residual, "diagonal": diag,
         "variance_excess": est - main, "cone_first_moment": first})


def avg_pair_correlation(L: Lattice, S: Optional[HolonomySet], s: float, R: float, n: int,
                         seed: Optional[int] = None, workers: int = 1, points_per_sample: int = 16,
                         reference_scale: float = 1.0, rel_tolerance: float = 0.10) -> CheckReport:
    """Cone average of det(A) * R2(B_s, A(S), R) against pi s^2.

    R2 is estimated per cone sample from points drawn uniformly in A(S) cap B_R, each
    contributing its number of neighbours in the open punctured ball of radius s / sqrt(c_M).
    """
    if n < 1000:
        raise ValueError("n must be at least 1000")
    if S is None:
        S = HolonomySet([(1.0, DiscreteOrbit(L))])
    if len(S.components) != 1 or S.components[0][0] != 1.0:
        raise NotImplementedError("the cone estimator handles a single unscaled orbit")
    orbit = S.components[0][1]
    c_M = S.counting_constant
    eps = s / math.sqrt(c_M)
    table = orbit.row_table()
    k = int(points_per_sample)
    empty = 0

    def job(rng, m):
        nonlocal empty
        b, (inner,), red = _resampled_ball_counts(L, [orbit], [R], m, rng, cone=True)
        A = b.A
        out = np.zeros(m)
        for i in range(m):
            if inner[i] == 0:
                empty += 1
                out[i] = np.nan
                continue
            pts = table.sample_in_disk(A[i], np.zeros(2), R, k, rng)
            nb = table.count_ellipses(np.broadcast_to(A[i], (k, 2, 2)), pts, eps, closed=False) - 1
            out[i] = b.nu[i] * nb.mean()
        return out, red

    vals, red = _run_streams(job, seed, workers, n)
    vals = vals[~np.isnan(vals)]
    est, se = _mean_se(vals)
    ref = math.pi * s * s * reference_scale
    return _make_report("avg-paircorr", L, {"s": s, "R": R, "c_M": c_M, "points_per_sample": k,
                                            "workers": workers},
                        n, seed, est, se, ref, 0.0, red / (n + red), rel_tolerance,
                        {"empty_samples": empty})
