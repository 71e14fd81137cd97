"""Effective counting: discrepancy sweeps, cone second-moment discrepancy, congruence counts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .fuchsian import CuspData, Lattice, build_congruence, c_gamma
from .haarmc import _resampled_ball_counts, _run_streams, _mean_se, sample_cone_batch
from .orbit import DiscreteOrbit, count_transformed
from .rows import coprime_row_table, mobius_sieve
from .shapes import BorelShape, disk

__all__ = [
    "DiscrepancyReport",
    "SecondMomentDiscrepancy",
    "discrepancy_experiment",
    "fit_loglog",
    "second_moment_discrepancy",
    "congruence_count",
    "congruence_main_constant",
]


@dataclass
class DiscrepancyReport:
    shape: BorelShape
    A: np.ndarray
    radii: np.ndarray
    counts: np.ndarray
    main_terms: np.ndarray
    discrepancies: np.ndarray
    fitted_exponent: Optional[float]
    fit_intercept: Optional[float]
    fit_residual: Optional[float]
    excluded_zero: int
    target_exponent: float

    def rows(self) -> list[tuple[float, int, float, float]]:
        return list(zip(self.radii.tolist(), self.counts.tolist(), self.main_terms.tolist(),
                        self.discrepancies.tolist()))


def fit_loglog(radii: np.ndarray, values: np.ndarray) -> tuple[Optional[float], Optional[float], Optional[float], int]:
    """Least-squares slope of log|value| against log R over the upper half of the radii.

    Zero values are dropped.  Returns (slope, intercept, rms residual, number dropped).
    """
    radii = np.asarray(radii, float)
    values = np.abs(np.asarray(values, float))
    top = radii >= np.median(radii)
    zero = top & (values == 0)
    use = top & (values > 0)
    if use.sum() < 2:
        return None, None, None, int(zero.sum())
    x, y = np.log(radii[use]), np.log(values[use])
    slope, icpt = np.polyfit(x, y, 1)
    res = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return float(slope), float(icpt), res, int(zero.sum())


def discrepancy_experiment(L: Lattice, orbit: Optional[DiscreteOrbit], shape: BorelShape,
                           A: np.ndarray, radii: Sequence[float]) -> DiscrepancyReport:
    """count(A Lambda cap R Omega) |det A| - c_Gamma |Omega| R^2 for each radius."""
    radii = np.asarray(radii, float)
    if np.any(np.diff(radii) <= 0) or np.any(radii <= 0):
        raise ValueError("radii must be positive and increasing")
    orbit = orbit or DiscreteOrbit(L)
    A = np.asarray(A, float)
    det = abs(float(np.linalg.det(A)))
    counts = np.array([count_transformed(orbit, A, shape, R) for R in radii], dtype=np.int64)
    main = c_gamma(L) * shape.area * radii**2
    disc = counts * det - main
    slope, icpt, res, dropped = fit_loglog(radii, disc)
    return DiscrepancyReport(shape, A, radii, counts, main, disc, slope, icpt, res, dropped, 2.0 - L.delta)


@dataclass
class SecondMomentDiscrepancy:
    area: float
    estimate: float
    stderr: float
    ratio: float
    exponent: float
    resample_rate: float
    params: dict = field(default_factory=dict)


def second_moment_discrepancy(L: Lattice, orbit: Optional[DiscreteOrbit], B: BorelShape | float, n: int,
                              seed: Optional[int] = None, workers: int = 1,
                              min_area: float = 1.0) -> SecondMomentDiscrepancy:
    """Cone average of (det(A) Theta_B(A) - c_Gamma |B|)^2, reported against |B|^(2 - delta).

    ``B`` is a shape at unit scale or, for a disk, its area.
    """
    orbit = orbit or DiscreteOrbit(L)
    if isinstance(B, BorelShape):
        shape, area = B, B.area
        scale = 1.0
    else:
        area = float(B)
        shape, scale = disk(), math.sqrt(area / math.pi)
    if not area > min_area:
        raise ValueError(f"|B| must exceed {min_area}")
    cg = c_gamma(L)

    def job(rng, m):
        if shape.kind == "disk":
            b, (cnt,), red = _resampled_ball_counts(L, [orbit], [scale], m, rng, cone=True)
            nu = b.nu
        else:
            b = sample_cone_batch(L, m, rng)
            nu, red = b.nu, 0
            cnt = np.array([count_transformed(orbit, Ai, shape, scale) for Ai in b.A])
        return (nu * cnt - cg * area) ** 2, red

    vals, red = _run_streams(job, seed, workers, n)
    est, se = _mean_se(vals)
    expo = 2.0 - L.delta
    return SecondMomentDiscrepancy(area, est, se, est / area**expo, expo, red / (n + red),
                                   {"shape": shape.kind, "n": n, "seed": seed, "workers": workers})


def congruence_main_constant(N: int) -> float:
    """(1/N^3) sum_{(d, N) = 1} mu(d) / d^2, summed as an Euler product over primes not dividing N."""
    N = int(N)
    # sum over coprime squarefree d equals prod_{p not dividing N} (1 - p^-2) = (6/pi^2) / prod_{p | N} (1 - p^-2)
    local = 1.0
    m, p = N, 2
    while p * p <= m:
        if m % p == 0:
            local *= 1.0 - 1.0 / (p * p)
            while m % p == 0:
                m //= p
        p += 1
    if m > 1:
        local *= 1.0 - 1.0 / (m * m)
    return (6.0 / math.pi**2) / local / N**3


def _congruence_main_by_sieve(N: int, terms: int = 2_000_000) -> float:
    mu = mobius_sieve(terms).astype(float)
    d = np.arange(terms + 1, dtype=np.int64)
    sel = (mu != 0) & (np.gcd(d, N) == 1)
    sel[0] = False
    partial = float(np.sum(mu[sel] / d[sel].astype(float) ** 2))
    return partial / N**3


def congruence_count(N: int, cusp: CuspData | int | str | None, R: float,
                     method: str = "scan") -> tuple[int, float]:
    """(#{xi primitive, xi = v (mod N), |xi| <= R / sqrt(N)}, main term) with v = tau e1 of the cusp.

    ``method`` is "scan" (row-by-row gcd scan) or "rows" (Moebius row table).
    """
    N = int(N)
    if not 1 <= N <= 12:
        raise ValueError("N must lie in 1..12")
    if not R > 0:
        raise ValueError("R must be positive")
    if N == 1:
        v = (1, 0)
    else:
        L = build_congruence(N)
        c = L.cusps[0] if cusp is None else (cusp if isinstance(cusp, CuspData) else L.cusp(cusp))
        v = (c.tau.a.coeffs[0] % N, c.tau.c.coeffs[0] % N)
    rho = R / math.sqrt(N)
    main = congruence_main_constant(N) * math.pi * R * R
    if method == "rows":
        table = coprime_row_table(max(int(rho) + 2, 8), np.eye(2), N, v, signs=(1,))
        return int(table.count_ellipses(np.eye(2), None, rho)), main
    r2 = rho * rho * (1 + 1e-12)
    m = int(math.floor(rho))
    total = 0
    for t in range(-m, m + 1):
        if (t - v[1]) % N:
            continue
        half = int(math.floor(math.sqrt(max(r2 - t * t, 0.0))))
        s = np.arange(-half, half + 1, dtype=np.int64)
        ok = (np.gcd(s, t) == 1) & ((s - v[0]) % N == 0)
        total += int(ok.sum())
    return total, main
