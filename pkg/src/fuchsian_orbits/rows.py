"""Row decomposition of scaled orbits for fast counting in planar regions.

In the frame of its own cusp a scaled orbit is invariant under the unit
translation (s, t) -> (s + t, t).  Each horizontal row t therefore carries a
finite union of arithmetic progressions in s, and the number of orbit points
of a convex region reduces to counting progression members in one interval
per row.  Rows are described by signed "entries" (weight, modulus, residue):

    count(row, [lo, hi]) = sum_e weight_e * #{s in [lo, hi] : s = residue_e mod modulus_e}

which covers both explicit residue tables (Hecke groups) and Moebius sums
(coprimality conditions in the arithmetic case).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "RowTable",
    "RowLimitError",
    "coprime_row_table",
    "residue_row_table",
    "mobius_sieve",
    "totient_table",
]

_ENTRY_BUDGET = 2_000_000
_SLACK = 1e-9


class RowLimitError(RuntimeError):
    """Raised when a query needs rows beyond what the table can provide."""


def mobius_sieve(n: int) -> np.ndarray:
    """Moebius function on 0..n (index 0 unused)."""
    mu = np.ones(n + 1, dtype=np.int8)
    mu[0] = 0
    is_comp = np.zeros(n + 1, dtype=bool)
    for p in range(2, n + 1):
        if not is_comp[p]:
            is_comp[2 * p :: p] = True
            mu[p::p] *= -1
            mu[p * p :: p * p] = 0
    return mu


def totient_table(n: int) -> np.ndarray:
    """Euler phi on 0..n via the prime product formula."""
    phi = np.arange(n + 1, dtype=np.int64)
    composite = np.zeros(n + 1, dtype=bool)
    for p in range(2, n + 1):
        if not composite[p]:
            composite[2 * p :: p] = True
            phi[p::p] -= phi[p::p] // p
    return phi


@dataclass
class RowTable:
    basis: np.ndarray                 # model coords (s, t) -> plane
    row_vals: np.ndarray              # sorted nonzero row coordinates
    row_ptr: np.ndarray               # entries of row i live in [row_ptr[i], row_ptr[i+1])
    weight: np.ndarray
    modulus: np.ndarray
    residue: np.ndarray
    base: np.ndarray                  # entries spanning a superset of the row, for sampling
    zero_s: np.ndarray                # explicit points (s, 0)
    t_limit: float                    # rows with |t| <= t_limit are complete
    member: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    extender: Optional[Callable[[float], "RowTable"]] = field(default=None, repr=False)
    max_t_limit: float = math.inf

    def __post_init__(self):
        self.entry_row = np.repeat(np.arange(len(self.row_vals)), np.diff(self.row_ptr))

    # ------------------------------------------------------------ bookkeeping
    def ensure(self, t_needed: float) -> None:
        if t_needed <= self.t_limit:
            return
        if self.extender is None or t_needed > self.max_t_limit:
            raise RowLimitError(f"rows up to |t|={t_needed:.4g} requested, table covers {self.t_limit:.4g}")
        target = min(max(t_needed * 1.5, 2 * self.t_limit), max(self.max_t_limit, t_needed))
        fresh = self.extender(target)
        for name in ("row_vals", "row_ptr", "weight", "modulus", "residue", "base", "zero_s", "t_limit"):
            setattr(self, name, getattr(fresh, name))
        self.entry_row = fresh.entry_row

    def row_slice(self, tmin: float, tmax: float) -> tuple[int, int]:
        i0 = int(np.searchsorted(self.row_vals, tmin, side="left"))
        i1 = int(np.searchsorted(self.row_vals, tmax, side="right"))
        return i0, i1

    def row_counts_all(self) -> np.ndarray:
        """Points per row on the canonical window 0 < s <= |t| (for pair tables)."""
        t = self.row_vals[self.entry_row]
        cnt = _prog_count(np.full_like(t, 0.0), np.abs(t), self.residue, self.modulus, open_lo=True)
        return np.bincount(self.entry_row, weights=self.weight * cnt,
                           minlength=len(self.row_vals)).round().astype(np.int64)

    # ------------------------------------------------------------ counting
    def _intervals_to_count(self, i0: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """lo, hi of shape (n, rows) for rows i0.. ; returns (n,) counts."""
        n, nr = lo.shape
        e0, e1 = self.row_ptr[i0], self.row_ptr[i0 + nr]
        if e1 == e0:
            return np.zeros(n, dtype=np.int64)
        er = self.entry_row[e0:e1] - i0
        res, mod, w = self.residue[e0:e1], self.modulus[e0:e1], self.weight[e0:e1]
        out = np.zeros(n, dtype=np.float64)
        step = max(1, _ENTRY_BUDGET // max(e1 - e0, 1))
        for a in range(0, n, step):
            L = lo[a : a + step][:, er]
            H = hi[a : a + step][:, er]
            c = np.floor((H - res) / mod) - np.ceil((L - res) / mod) + 1.0
            np.maximum(c, 0.0, out=c)
            out[a : a + step] = c @ w
        return np.rint(out).astype(np.int64)

    def count_ellipses(self, M: np.ndarray, centers: Optional[np.ndarray], radii,
                       closed: bool = True, row_cap: Optional[float] = None) -> np.ndarray:
        """Points x of the orbit with ||M_i x - center_i|| <= r_i, for a batch of (M_i, center_i, r_i).

        M has shape (n, 2, 2) or (2, 2).  With ``row_cap`` only rows |t| <= row_cap count.
        """
        M = np.asarray(M, dtype=float)
        single = M.ndim == 2
        if single:
            M = M[None]
        n = M.shape[0]
        radii = np.broadcast_to(np.asarray(radii, dtype=float), (n,)).copy()
        centers = np.zeros((n, 2)) if centers is None else np.broadcast_to(np.asarray(centers, float), (n, 2))
        T = M @ self.basis
        det = T[:, 0, 0] * T[:, 1, 1] - T[:, 0, 1] * T[:, 1, 0]
        # second row of T^{-1}
        inv_r2 = np.stack([-T[:, 1, 0], T[:, 0, 0]], axis=1) / det[:, None]
        tc = np.einsum("ij,ij->i", inv_r2, centers)
        half = radii * np.hypot(inv_r2[:, 0], inv_r2[:, 1])
        tlo, thi = tc - half, tc + half
        if row_cap is not None:
            tlo = np.maximum(tlo, -row_cap)
            thi = np.minimum(thi, row_cap)
        need = float(np.max(np.maximum(np.abs(tlo), np.abs(thi)), initial=0.0))
        if row_cap is not None:
            need = min(need, row_cap)
        self.ensure(need)
        out = np.zeros(n, dtype=np.int64)
        # order by extent so each chunk touches few rows
        ext = np.maximum(np.abs(tlo), np.abs(thi))
        order = np.argsort(ext, kind="stable")
        T0 = T[:, :, 0]
        T1 = T[:, :, 1]
        A = np.einsum("ij,ij->i", T0, T0)
        pos = 0
        while pos < n:
            size = max(1, _ENTRY_BUDGET // max(1, self._entries_within(ext[order[pos]])))
            for _ in range(2):
                last = ext[order[min(n, pos + size) - 1]]
                size = max(1, min(size, _ENTRY_BUDGET // max(1, self._entries_within(last))))
            hi_idx = min(n, pos + size)
            idx = order[pos:hi_idx]
            emax = ext[idx[-1]]
            i0, i1 = self.row_slice(-emax - 1e-12, emax + 1e-12)
            if i1 > i0:
                t = self.row_vals[i0:i1]
                wx = t[None, :] * T1[idx, 0, None] - centers[idx, 0, None]
                wy = t[None, :] * T1[idx, 1, None] - centers[idx, 1, None]
                B = T0[idx, 0, None] * wx + T0[idx, 1, None] * wy
                C = wx * wx + wy * wy - radii[idx, None] ** 2
                Ai = A[idx, None]
                disc = B * B - Ai * C
                ok = disc >= -_SLACK * (B * B + np.abs(Ai * C))
                if row_cap is not None:
                    ok &= np.abs(t)[None, :] <= row_cap
                sq = np.sqrt(np.where(ok, np.maximum(disc, 0.0), 0.0))
                lo = (-B - sq) / Ai
                hi = (-B + sq) / Ai
                lo, hi = _slacken(lo, hi, closed)
                lo = np.where(ok, lo, 1.0)
                hi = np.where(ok, hi, 0.0)
                out[idx] += self._intervals_to_count(i0, lo, hi)
            pos = hi_idx
        if len(self.zero_s):
            s = self.zero_s
            px = s[None, :] * T0[:, 0, None] - centers[:, 0, None]
            py = s[None, :] * T0[:, 1, None] - centers[:, 1, None]
            d2 = px * px + py * py
            r2 = radii[:, None] ** 2
            tol = _SLACK * (1.0 + r2)
            hit = d2 <= r2 + tol if closed else d2 < r2 - tol
            out += hit.sum(axis=1)
        return out[0] if single else out

    def _entries_within(self, e: float) -> int:
        i0, i1 = self.row_slice(-e - 1e-12, e + 1e-12)
        return int(self.row_ptr[i1] - self.row_ptr[i0])

    def count_halfplanes(self, M: np.ndarray, normals: np.ndarray, offsets: np.ndarray,
                         t_range: tuple[float, float], disk_radius: Optional[float] = None,
                         closed: bool = True) -> int:
        """Points with n_k . (M x) <= h_k for all k, optionally also ||M x|| <= disk_radius."""
        T = np.asarray(M, float) @ self.basis
        tmin, tmax = t_range
        self.ensure(max(abs(tmin), abs(tmax)))
        i0, i1 = self.row_slice(tmin - 1e-12, tmax + 1e-12)
        total = 0
        if i1 > i0:
            t = self.row_vals[i0:i1]
            lo, hi, ok = _halfplane_intervals(T, t, normals, offsets, disk_radius)
            lo, hi = _slacken(lo, hi, closed)
            lo = np.where(ok, lo, 1.0)
            hi = np.where(ok, hi, 0.0)
            total += int(self._intervals_to_count(i0, lo[None], hi[None])[0])
        if len(self.zero_s) and tmin <= 0 <= tmax:
            pts = np.outer(self.zero_s, T[:, 0])
            inside = np.ones(len(pts), dtype=bool)
            for nv, h in zip(normals, offsets):
                v = pts @ nv
                inside &= (v <= h + _SLACK * (1 + abs(h))) if closed else (v < h - _SLACK * (1 + abs(h)))
            if disk_radius is not None:
                d2 = np.einsum("ij,ij->i", pts, pts)
                r2 = disk_radius**2
                inside &= (d2 <= r2 * (1 + _SLACK)) if closed else (d2 < r2 * (1 - _SLACK))
            total += int(inside.sum())
        return total

    # ------------------------------------------------------------ sampling
    def sample_in_disk(self, M: np.ndarray, center: np.ndarray, radius: float, k: int,
                       rng: np.random.Generator, max_tries: int = 10_000) -> np.ndarray:
        """k points drawn uniformly (with replacement) from {M x : ||M x - center|| <= radius}."""
        T = np.asarray(M, float) @ self.basis
        center = np.asarray(center, float)
        det = T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0]
        r2 = np.array([-T[1, 0], T[0, 0]]) / det
        tc = r2 @ center
        half = radius * math.hypot(*r2)
        self.ensure(max(abs(tc - half), abs(tc + half)))
        i0, i1 = self.row_slice(tc - half - 1e-12, tc + half + 1e-12)
        t = self.row_vals[i0:i1]
        lo, hi, ok = _disk_intervals(T, t, center, radius)
        lo = np.where(ok, lo, 1.0)
        hi = np.where(ok, hi, 0.0)
        e0, e1 = self.row_ptr[i0], self.row_ptr[i1]
        er = self.entry_row[e0:e1] - i0
        res, mod, w = self.residue[e0:e1], self.modulus[e0:e1], self.weight[e0:e1]
        per = np.maximum(_prog_count(lo[er], hi[er], res, mod), 0.0) * w
        row_cnt = np.bincount(er, weights=per, minlength=len(t))
        row_cnt = np.rint(row_cnt)
        zs = np.zeros(0)
        if len(self.zero_s):
            p = np.outer(self.zero_s, T[:, 0]) - center
            zs = self.zero_s[np.einsum("ij,ij->i", p, p) <= radius**2]
        weights = np.concatenate([row_cnt, [len(zs)]])
        total = weights.sum()
        if total <= 0:
            raise ValueError("region contains no orbit points")
        picks = rng.choice(len(weights), size=k, p=weights / total)
        out = np.empty((k, 2))
        base_idx = np.nonzero(self.base[e0:e1])[0]
        for j, row in enumerate(picks):
            if row == len(t):
                s_val, t_val = zs[rng.integers(len(zs))], 0.0
            else:
                cand = base_idx[er[base_idx] == row]
                cnts = np.maximum(_prog_count(np.full(len(cand), lo[row]), np.full(len(cand), hi[row]),
                                              res[cand], mod[cand]), 0.0)
                for _ in range(max_tries):
                    e = cand[rng.choice(len(cand), p=cnts / cnts.sum())]
                    first = math.ceil((lo[row] - res[e]) / mod[e])
                    m = first + int(rng.integers(int(round(cnts[cand == e][0]))))
                    s_val = res[e] + m * mod[e]
                    t_val = t[row]
                    if self.member is None or bool(self.member(np.array([s_val]), np.array([t_val]))[0]):
                        break
                else:
                    raise RuntimeError("rejection sampling within a row failed")
            out[j] = T @ np.array([s_val, t_val])
        return out


def _slacken(lo, hi, closed):
    tol = _SLACK * (1.0 + np.abs(lo) + np.abs(hi))
    if closed:
        return lo - tol, hi + tol
    return lo + tol, hi - tol


def _prog_count(lo, hi, res, mod, open_lo: bool = False):
    if open_lo:
        c = np.floor((hi - res) / mod) - np.floor((lo - res) / mod)
    else:
        c = np.floor((hi - res) / mod) - np.ceil((lo - res) / mod) + 1.0
    return c


def _disk_intervals(T, t, center, radius):
    T0, T1 = T[:, 0], T[:, 1]
    wx = t * T1[0] - center[0]
    wy = t * T1[1] - center[1]
    A = T0 @ T0
    B = T0[0] * wx + T0[1] * wy
    C = wx * wx + wy * wy - radius**2
    disc = B * B - A * C
    ok = disc >= -_SLACK * (B * B + np.abs(A * C))
    sq = np.sqrt(np.where(ok, np.maximum(disc, 0.0), 0.0))
    return (-B - sq) / A, (-B + sq) / A, ok


def _halfplane_intervals(T, t, normals, offsets, disk_radius):
    lo = np.full(len(t), -np.inf)
    hi = np.full(len(t), np.inf)
    ok = np.ones(len(t), dtype=bool)
    T0, T1 = T[:, 0], T[:, 1]
    for nv, h in zip(np.asarray(normals, float), np.asarray(offsets, float)):
        a = nv @ T0
        rhs = h - t * (nv @ T1)
        if abs(a) < 1e-300:
            ok &= rhs >= 0
        elif a > 0:
            hi = np.minimum(hi, rhs / a)
        else:
            lo = np.maximum(lo, rhs / a)
    if disk_radius is not None:
        dl, dh, dok = _disk_intervals(T, t, np.zeros(2), disk_radius)
        lo = np.maximum(lo, dl)
        hi = np.minimum(hi, dh)
        ok &= dok
    ok &= np.isfinite(lo) & np.isfinite(hi) & (lo <= hi + 1e-9 * (1 + np.abs(hi)))
    return lo, hi, ok


def _group_rows(t_keys: np.ndarray, *cols: np.ndarray):
    order = np.argsort(t_keys, kind="stable")
    t_sorted = t_keys[order]
    rows, starts = np.unique(t_sorted, return_index=True)
    ptr = np.append(starts, len(t_sorted)).astype(np.int64)
    return rows, ptr, [c[order] for c in cols]


def coprime_row_table(t_limit: int, basis: np.ndarray, level: int = 1,
                      vector: tuple[int, int] = (1, 0), signs: Sequence[int] = (1, -1),
                      max_t_limit: float = 5e6) -> RowTable:
    """Rows for {eta in Z^2 primitive : eta = sign * vector (mod level)} mapped by ``basis``."""
    N = int(level)
    T = max(int(math.ceil(t_limit)), 1)
    v1, v2 = int(vector[0]) % N, int(vector[1]) % N
    mu = mobius_sieve(T)
    ds = np.nonzero(mu)[0].astype(np.int64)
    reps = T // ds
    d_col = np.repeat(ds, reps)
    k = np.arange(len(d_col)) - np.repeat(np.cumsum(reps) - reps, reps) + 1
    t_pos = d_col * k
    mu_col = mu[d_col].astype(np.float64)
    t_all = np.concatenate([t_pos, -t_pos])
    d_all = np.concatenate([d_col, d_col])
    mu_all = np.concatenate([mu_col, mu_col])
    if N == 1:
        rows, ptr, (w, mod, base) = _group_rows(t_all.astype(float), mu_all, d_all.astype(float),
                                                (d_all == 1))
        res = np.zeros(len(w))
        zero_s = np.array([1.0, -1.0])
    else:
        parts_t, parts_w, parts_m, parts_r, parts_b = [], [], [], [], []
        for cls in range(N):
            sel = (t_all % N) == cls
            allowed = sorted({(sg * v1) % N for sg in signs if (sg * v2 - cls) % N == 0})
            if not allowed or not sel.any():
                continue
            d_sel, t_sel, mu_sel = d_all[sel], t_all[sel], mu_all[sel]
            g = np.gcd(d_sel, N)
            for r in allowed:
                ok = (r % g) == 0
                if not ok.any():
                    continue
                dd, gg, tt, mm = d_sel[ok], g[ok], t_sel[ok], mu_sel[ok]
                Np = N // gg
                dp = dd // gg
                rp = r // gg
                kk = np.zeros(len(dd), dtype=np.int64)
                for npv in np.unique(Np):
                    m = Np == npv
                    if npv == 1:
                        continue
                    inv = np.array([pow(int(x), -1, int(npv)) for x in (dp[m] % npv)], dtype=np.int64)
                    kk[m] = (rp[m] * inv) % npv
                L = dd * Np
                x0 = (dd * kk) % L
                parts_t.append(tt)
                parts_w.append(mm)
                parts_m.append(L.astype(float))
                parts_r.append(x0.astype(float))
                parts_b.append(dd == 1)
        t_cat = np.concatenate(parts_t).astype(float)
        rows, ptr, (w, mod, res, base) = _group_rows(
            t_cat, np.concatenate(parts_w), np.concatenate(parts_m), np.concatenate(parts_r),
            np.concatenate(parts_b))
        zero_s = np.array([s for s in (1.0, -1.0)
                           if any(((sg * v1 - int(s)) % N == 0 and (sg * v2) % N == 0) for sg in signs)])

    def member(s, t):
        return np.gcd(np.rint(s).astype(np.int64), np.rint(t).astype(np.int64)) == 1

    def extend(new_limit: float) -> RowTable:
        return coprime_row_table(int(math.ceil(new_limit)), basis, N, vector, signs, max_t_limit)

    return RowTable(np.asarray(basis, float), rows, ptr, w, mod, res, base, zero_s, float(T),
                    member=member, extender=extend, max_t_limit=max_t_limit)


def residue_row_table(t_vals: np.ndarray, t_keys: Sequence, s_vals: np.ndarray, zero_s: np.ndarray,
                      t_limit: float, basis: np.ndarray,
                      extender: Optional[Callable[[float], RowTable]] = None,
                      max_t_limit: float = math.inf) -> RowTable:
    """Rows from an explicit list of canonical points 0 < s <= |t| (one per progression).

    ``t_keys`` are exact row labels used for grouping; ``t_vals`` their float values.
    """
    t_vals = np.asarray(t_vals, float)
    s_vals = np.asarray(s_vals, float)
    if len(t_keys):
        # map exact keys to a representative float so equal rows group together
        first: dict = {}
        rep = np.empty(len(t_vals))
        for i, key in enumerate(t_keys):
            rep[i] = first.setdefault(key, t_vals[i])
    else:
        rep = t_vals
    rows, ptr, (mod, res) = _group_rows(rep, np.abs(rep), s_vals)
    w = np.ones(len(mod))
    base = np.ones(len(mod), dtype=bool)
    return RowTable(np.asarray(basis, float), rows, ptr, w, mod, res, base, np.asarray(zero_s, float),
                    float(t_limit), member=None, extender=extender, max_t_limit=max_t_limit)
