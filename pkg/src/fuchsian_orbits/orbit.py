"""Enumeration of scaled discrete orbits Gamma sigma e1 and unions of them."""
from __future__ import annotations

import hashlib
import json
import math
import os
import pickle
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .exact import RingElement, exact_signs
from .fuchsian import CuspData, Lattice
from .rows import RowLimitError, RowTable, coprime_row_table, residue_row_table

__all__ = [
    "EnumerationError",
    "OrbitVector",
    "OrbitPoints",
    "DiscreteOrbit",
    "HolonomySet",
    "assemble_holonomy",
    "enumerate_ball",
    "count",
    "count_transformed",
    "CACHE_VERSION",
]

CACHE_VERSION = 1
_INT_SAFE = 2**62


class EnumerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OrbitVector:
    """An orbit point x = coords / sqrt(width) with exact coords."""

    coords: tuple[RingElement, RingElement]
    float_coords: tuple[float, float]
    norm_sq: float
    word_length: int
    width: float = 1.0


@dataclass
class OrbitPoints:
    """Array form of an enumeration, canonically sorted by (norm, angle)."""

    exact: np.ndarray      # (n, 2, degree) integer coefficients of the numerators
    xy: np.ndarray         # (n, 2) float coordinates
    norm_sq: np.ndarray
    depth: np.ndarray

    def __len__(self) -> int:
        return len(self.xy)

    def subset(self, mask) -> "OrbitPoints":
        return OrbitPoints(self.exact[mask], self.xy[mask], self.norm_sq[mask], self.depth[mask])

    def sorted(self) -> "OrbitPoints":
        ang = np.arctan2(self.xy[:, 1], self.xy[:, 0])
        order = np.lexsort((ang, np.round(self.norm_sq, 9)))
        return self.subset(order)


def _rows_to_keys(arr: np.ndarray) -> list:
    flat = arr.reshape(len(arr), -1)
    if flat.dtype == object:
        return [tuple(int(v) for v in r) for r in flat]
    flat = np.ascontiguousarray(flat)
    return [r.tobytes() for r in flat]


class DiscreteOrbit:
    """The scaled orbit Lambda = Gamma sigma e1 of a cusp, with a resumable cache.

    ``strategy`` selects the enumeration route: "bfs" walks the Cayley graph
    with exact deduplication; "arith" uses the congruence description of
    arithmetic orbits; "auto" picks "arith" whenever it applies.
    """

    def __init__(self, lattice: Lattice, cusp: Union[CuspData, int, str, None] = None,
                 prune_factor: Optional[float] = None, strategy: str = "auto",
                 cache_dir: Union[str, os.PathLike, None] = None, max_frontier: int = 3_000_000,
                 row_limit_cap: float = 400.0):
        self.lattice = lattice
        if cusp is None:
            cusp = lattice.cusps[0]
        elif not isinstance(cusp, CuspData):
            cusp = lattice.cusp(cusp)
        self.cusp = cusp
        if prune_factor is None:
            # S and T generated groups: the nearest-multiple reduction never increases norms
            prune_factor = 1.0 if lattice.kind in ("sl2z", "hecke") else 8.0
        self.prune_factor = float(prune_factor)
        if strategy not in ("auto", "bfs", "arith"):
            raise ValueError("strategy must be auto, bfs or arith")
        if strategy == "arith" and not lattice.is_arithmetic:
            raise ValueError("arithmetic enumeration needs sl2z or a congruence lattice")
        self.strategy = "arith" if (strategy == "auto" and lattice.is_arithmetic) else (
            "bfs" if strategy == "auto" else strategy)
        self.max_frontier = int(max_frontier)
        self.row_limit_cap = float(row_limit_cap)
        self.width = cusp.width_float
        self.ring = lattice.ring
        self.degree = lattice.ring.degree
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._init_bfs_state()
        self._row_table: Optional[RowTable] = None
        self._arith_cache: dict = {}
        if self.cache_dir is not None and self.strategy == "bfs":
            self._load_cache()

    # ------------------------------------------------------------------ basics
    @property
    def c_gamma(self) -> float:
        from .fuchsian import c_gamma

        return c_gamma(self.lattice)

    @property
    def sigma(self) -> np.ndarray:
        return self.cusp.sigma

    @property
    def cached_radius(self) -> float:
        return self._radius

    def _u0(self) -> np.ndarray:
        a, c = self.cusp.base_vector()
        return np.array([list(a.coeffs), list(c.coeffs)], dtype=np.int64)

    def _embed(self, exact: np.ndarray) -> np.ndarray:
        return self.ring.embed_array(exact) / math.sqrt(self.width)

    # ------------------------------------------------------------------ BFS
    def _init_bfs_state(self):
        gens = list(self.lattice.generators)
        keys = {g.key() for g in gens}
        for g in list(gens):
            inv = g.inverse()
            if inv.key() not in keys:
                gens.append(inv)
                keys.add(inv.key())
        self._gen_blocks = [g.coefficient_block() for g in gens]
        self._gen_max = max(int(np.max(np.abs(b.astype(object)))) for b in self._gen_blocks)
        self._dtype = np.int64
        u0 = self._u0().reshape(1, 2, self.degree)
        self._exact = [u0]
        xy = self._embed(u0)
        ns = np.einsum("ij,ij->i", xy, xy)
        self._norm = [ns]
        self._depth = [np.zeros(1, dtype=np.int64)]
        self._pending = (u0, ns, np.zeros(1, dtype=np.int64))
        self._seen = set(_rows_to_keys(u0))
        self._radius = 0.0

    def _blocks(self):
        dt = object if self._dtype is object else np.int64
        return [b.astype(dt) for b in self._gen_blocks]

    def _to_object(self):
        self._dtype = object
        self._exact = [e.astype(object) for e in self._exact]
        u, n, d = self._pending
        self._pending = (u.astype(object), n, d)
        allx = np.concatenate(self._exact)
        self._seen = set(_rows_to_keys(allx))

    def _bfs_extend(self, R: float) -> None:
        P2 = (self.prune_factor * R) ** 2 * (1 + 1e-12)
        u, ns, dp = self._pending
        take = ns <= P2
        frontier, f_depth = u[take], dp[take]
        keep = (u[~take], ns[~take], dp[~take])
        pend_u, pend_n, pend_d = [keep[0]], [keep[1]], [keep[2]]
        d2 = 2 * self.degree
        while len(frontier):
            if len(frontier) > self.max_frontier:
                raise EnumerationError(
                    f"frontier of {len(frontier)} vectors exceeds the cap {self.max_frontier} "
                    f"(radius {R}, prune factor {self.prune_factor})")
            if self._dtype is not object:
                mx = int(np.max(np.abs(frontier))) if frontier.size else 0
                if mx * self._gen_max * d2 >= _INT_SAFE:
                    self._to_object()
                    frontier = frontier.astype(object)
                    pend_u = [p.astype(object) for p in pend_u]
            flat = frontier.reshape(len(frontier), d2)
            kids = np.concatenate([flat @ b.T for b in self._blocks()])
            if self._dtype is not object:
                kids, first = np.unique(kids, axis=0, return_index=True)
            keys = _rows_to_keys(kids)
            fresh = []
            seen = self._seen
            for i, k in enumerate(keys):
                if k not in seen:
                    seen.add(k)
                    fresh.append(i)
            if not fresh:
                break
            new = kids[np.asarray(fresh)].reshape(-1, 2, self.degree)
            xy = self._embed(new)
            nn = np.einsum("ij,ij->i", xy, xy)
            depth = np.full(len(new), int(f_depth.max()) + 1 if len(f_depth) else 1, dtype=np.int64)
            self._exact.append(new)
            self._norm.append(nn)
            self._depth.append(depth)
            inside = nn <= P2
            frontier, f_depth = new[inside], depth[inside]
            pend_u.append(new[~inside])
            pend_n.append(nn[~inside])
            pend_d.append(depth[~inside])
        dt = object if self._dtype is object else np.int64
        self._pending = (np.concatenate([p.astype(dt) for p in pend_u]).reshape(-1, 2, self.degree),
                         np.concatenate(pend_n), np.concatenate(pend_d))
        self._exact = [np.concatenate([e.astype(dt) for e in self._exact])]
        self._norm = [np.concatenate(self._norm)]
        self._depth = [np.concatenate(self._depth)]
        self._radius = max(self._radius, R)

    # ------------------------------------------------------------------ arithmetic route
    def _arith_model(self) -> tuple[int, tuple[int, int], tuple[int, ...]]:
        N = self.lattice.level
        tau = self.cusp.tau
        v = (tau.a.coeffs[0] % N, tau.c.coeffs[0] % N) if N > 1 else (1, 0)
        signs = (1, -1) if self.lattice.contains_minus_identity else (1,)
        return N, v, signs

    def _arith_points(self, R: float) -> OrbitPoints:
        N, v, signs = self._arith_model()
        rho = R / math.sqrt(N)
        m = int(math.floor(rho + 1e-9))
        xs, ys = [], []
        r2 = rho * rho * (1 + 1e-12)
        for t in range(-m, m + 1):
            half = math.sqrt(max(r2 - t * t, 0.0))
            s = np.arange(-int(math.floor(half)), int(math.floor(half)) + 1, dtype=np.int64)
            ok = np.gcd(s, t) == 1
            cong = np.zeros(len(s), dtype=bool)
            for sg in signs:
                if (t - sg * v[1]) % N == 0:
                    cong |= (s - sg * v[0]) % N == 0
            s = s[ok & cong]
            xs.append(s)
            ys.append(np.full(len(s), t, dtype=np.int64))
        xi = np.stack([np.concatenate(xs), np.concatenate(ys)], axis=1)
        exact = (N * xi).reshape(-1, 2, 1)
        xy = math.sqrt(N) * xi.astype(float)
        ns = np.einsum("ij,ij->i", xy, xy)
        pts = OrbitPoints(exact, xy, ns, np.zeros(len(xy), dtype=np.int64))
        return pts.subset(ns <= R * R * (1 + 1e-12))

    # ------------------------------------------------------------------ public enumeration
    def points(self, R: float, strategy: Optional[str] = None) -> OrbitPoints:
        if not R > 0:
            raise ValueError("R must be positive")
        strat = strategy or self.strategy
        if strat == "arith":
            return self._arith_points(R).sorted()
        if R > self._radius:
            self._bfs_extend(R)
            self._save_cache()
        allx = self._exact[0]
        ns = self._norm[0]
        mask = ns <= R * R * (1 + 1e-12)
        xy = self._embed(allx[mask])
        return OrbitPoints(allx[mask], xy, ns[mask], self._depth[0][mask]).sorted()

    def enumerate_ball(self, R: float) -> list[OrbitVector]:
        pts = self.points(R)
        ring = self.ring
        out = []
        for ex, xy, ns, dp in zip(pts.exact, pts.xy, pts.norm_sq, pts.depth):
            coords = (ring.element(int(c) for c in ex[0]), ring.element(int(c) for c in ex[1]))
            out.append(OrbitVector(coords, (float(xy[0]), float(xy[1])), float(ns), int(dp), self.width))
        return out

    def count(self, R: float) -> int:
        if not R > 0:
            raise ValueError("R must be positive")
        table = self.row_table()
        try:
            return int(table.count_ellipses(np.eye(2), None, R))
        except RowLimitError:
            return len(self.points(R))

    # ------------------------------------------------------------------ frames and rows
    def frame_numerators(self, cusp_a: CuspData, radius_prime: float,
                         strategy: Optional[str] = None) -> tuple[np.ndarray, float]:
        """Points of sigma_a^{-1} Lambda as exact numerators adj(M_a) u over a float denominator.

        All points of norm <= radius_prime in the new frame are included.
        """
        sig_norm = np.linalg.norm(cusp_a.sigma, 2)
        pts = self.points(radius_prime * sig_norm * (1 + 1e-9), strategy=strategy)
        adj = cusp_a.sigma_numerator.adjugate().coefficient_block()
        flat = pts.exact.reshape(len(pts), -1)
        if flat.dtype != object and int(np.max(np.abs(flat), initial=0)) * int(
                np.max(np.abs(adj.astype(object)), initial=1)) * 2 * self.degree < _INT_SAFE:
            num = flat @ adj.astype(np.int64).T
        else:
            num = flat.astype(object) @ adj.T
        denom = math.sqrt(cusp_a.width_float * self.width)
        return num.reshape(-1, 2, self.degree), denom

    def row_table(self, t_limit: Optional[float] = None) -> RowTable:
        if self._row_table is not None and (t_limit is None or t_limit <= self._row_table.t_limit):
            return self._row_table
        if t_limit is None:
            t_limit = 16.0
        if self.lattice.is_arithmetic:
            N, v, signs = self._arith_model()
            self._row_table = coprime_row_table(max(int(math.ceil(t_limit)), 8),
                                                math.sqrt(N) * np.eye(2), N, v, signs)
        else:
            self._row_table = self._residue_table(t_limit)
        return self._row_table

    def _residue_table(self, t_limit: float) -> RowTable:
        T = float(t_limit)
        num, denom = self.frame_numerators(self.cusp, math.sqrt(2.0) * T)
        ring = self.ring
        s_num, t_num = num[:, 0, :], num[:, 1, :]
        s = ring.embed_array(s_num) / denom
        t = ring.embed_array(t_num) / denom
        t_zero = np.all(t_num == 0, axis=1)
        zero_s = s[t_zero]
        cand = (~t_zero) & (np.abs(t) <= T * (1 + 1e-9) + 1e-9) & (s > -1e-9) & (s <= np.abs(t) * (1 + 1e-9) + 1e-9)
        idx = np.nonzero(cand)[0]
        sgn_s = exact_signs(ring, s_num[idx])
        tabs = np.where((exact_signs(ring, t_num[idx]) < 0)[:, None], -t_num[idx], t_num[idx])
        sgn_gap = exact_signs(ring, tabs - s_num[idx])
        keep = idx[(sgn_s > 0) & (sgn_gap >= 0)]
        keys = _rows_to_keys(t_num[keep])
        return residue_row_table(t[keep], keys, s[keep], zero_s, T, self.sigma,
                                 extender=self._residue_table, max_t_limit=self.row_limit_cap)

    # ------------------------------------------------------------------ cache
    def _cache_path(self) -> Optional[Path]:
        if self.cache_dir is None:
            return None
        h = hashlib.sha256(self._cache_identity().encode()).hexdigest()[:16]
        return self.cache_dir / f"orbit-{self.lattice.config_key()}-{h}.pkl"

    def _cache_identity(self) -> str:
        gens = [g.key() for g in self.lattice.generators]
        return json.dumps({"lattice": self.lattice.config_key(), "cusp": self.cusp.label,
                           "u0": self._u0().tolist(), "gens": repr(gens),
                           "prune": self.prune_factor}, sort_keys=True)

    def _save_cache(self) -> None:
        path = self._cache_path()
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"version": CACHE_VERSION, "identity": self._cache_identity(),
                   "cached_radius": self._radius, "exact": self._exact[0], "norm": self._norm[0],
                   "depth": self._depth[0], "pending": self._pending}
        tmp = path.with_suffix(".tmp")
        with open(tmp, "wb") as fh:
            pickle.dump(payload, fh, protocol=pickle.HIGHEST_PROTOCOL)
        os.replace(tmp, path)

    def _load_cache(self) -> None:
        path = self._cache_path()
        if path is None or not path.exists():
            return
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
        if payload.get("version") != CACHE_VERSION or payload.get("identity") != self._cache_identity():
            return
        self._exact = [payload["exact"]]
        self._norm = [payload["norm"]]
        self._depth = [payload["depth"]]
        self._pending = payload["pending"]
        self._radius = float(payload["cached_radius"])
        if self._exact[0].dtype == object:
            self._dtype = object
        self._seen = set(_rows_to_keys(self._exact[0]))


def enumerate_ball(orbit: DiscreteOrbit, R: float) -> list[OrbitVector]:
    return orbit.enumerate_ball(R)


def count(orbit: DiscreteOrbit, R: float) -> int:
    return orbit.count(R)


def count_transformed(orbit: DiscreteOrbit, A: np.ndarray, shape, R: float) -> int:
    """|A(Lambda) cap R*shape|."""
    A = np.asarray(A, dtype=float)
    if abs(np.linalg.det(A)) < 1e-300:
        raise ValueError("A must be invertible")
    n = shape.count_rows(orbit.row_table(), A, R)
    if n is not None:
        return int(n)
    rad = np.linalg.norm(np.linalg.inv(A), 2) * R * shape.circumradius
    pts = orbit.points(rad * (1 + 1e-9))
    return int(shape.contains(pts.xy @ A.T / R).sum())


@dataclass
class HolonomySet:
    """Finite union of scaled orbits lam_i * Lambda_i, with multiset semantics."""

    components: list[tuple[float, DiscreteOrbit]] = field(default_factory=list)

    def __post_init__(self):
        for lam, _ in self.components:
            if not lam > 0:
                raise ValueError("component scales must be positive")

    def points(self, R: float) -> tuple[np.ndarray, np.ndarray]:
        """(xy, component index) for all points of norm <= R."""
        xs, ids = [np.zeros((0, 2))], [np.zeros(0, dtype=np.int64)]
        for i, (lam, orb) in enumerate(self.components):
            pts = orb.points(R / lam)
            xs.append(lam * pts.xy)
            ids.append(np.full(len(pts), i, dtype=np.int64))
        return np.concatenate(xs), np.concatenate(ids)

    def count(self, R: float) -> int:
        return int(sum(orb.count(R / lam) for lam, orb in self.components))

    @property
    def counting_constant(self) -> float:
        return float(sum(orb.c_gamma / lam**2 for lam, orb in self.components))


def assemble_holonomy(components: Iterable[tuple[float, object]]) -> HolonomySet:
    """Build a HolonomySet from (scale, orbit) pairs; an orbit may be a DiscreteOrbit,
    a Lattice (first cusp) or a (Lattice, cusp) tuple."""
    comps = []
    for lam, spec in components:
        if isinstance(spec, DiscreteOrbit):
            orb = spec
        elif isinstance(spec, Lattice):
            orb = DiscreteOrbit(spec)
        else:
            L, c = spec
            orb = DiscreteOrbit(L, c)
        comps.append((float(lam), orb))
    return HolonomySet(comps)
