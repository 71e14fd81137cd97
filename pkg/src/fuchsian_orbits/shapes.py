"""Bounded planar shapes containing the origin, with orbit counting on dilates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .rows import RowTable

__all__ = ["BorelShape", "disk", "square", "sector", "annulus", "polygon"]


@dataclass(frozen=True, eq=False)
class BorelShape:
    kind: str
    params: dict = field(default_factory=dict)
    vertices: Optional[np.ndarray] = None

    # ----------------------------------------------------------- geometry
    @property
    def area(self) -> float:
        k = self.kind
        if k == "disk":
            return math.pi
        if k == "sector":
            return self.params["angle"] / 2.0
        if k == "annulus":
            return math.pi * (1.0 - self.params["r0"] ** 2)
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    @property
    def circumradius(self) -> float:
        if self.kind in ("disk", "sector", "annulus"):
            return 1.0
        return float(np.max(np.hypot(self.vertices[:, 0], self.vertices[:, 1])))

    @property
    def is_convex_polygon(self) -> bool:
        if self.vertices is None:
            return False
        v = self.vertices
        e = np.roll(v, -1, axis=0) - v
        cr = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        return bool(np.all(cr >= -1e-12) or np.all(cr <= 1e-12))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Membership of points (n, 2) in the unit-scale shape."""
        pts = np.atleast_2d(np.asarray(pts, float))
        r2 = np.einsum("ij,ij->i", pts, pts)
        k = self.kind
        if k == "disk":
            return r2 <= 1.0
        if k == "annulus":
            return (r2 <= 1.0) & (r2 >= self.params["r0"] ** 2)
        if k == "sector":
            ang = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * math.pi)
            return (r2 <= 1.0) & (ang <= self.params["angle"])
        return _point_in_polygon(pts, self.vertices)

    def _halfplanes(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.vertices
        if _signed_area(v) < 0:
            v = v[::-1]
        e = np.roll(v, -1, axis=0) - v
        normals = np.stack([e[:, 1], -e[:, 0]], axis=1)  # outward for counter-clockwise order
        offsets = np.einsum("ij,ij->i", normals, v)
        return normals, offsets

    # ----------------------------------------------------------- counting
    def count_rows(self, table: RowTable, A: np.ndarray, R: float) -> Optional[int]:
        """|A(orbit) cap R*shape| through the row table, or None if unsupported."""
        A = np.asarray(A, float)
        k = self.kind
        if k == "disk":
            return int(table.count_ellipses(A, None, R))
        if k == "annulus":
            outer = table.count_ellipses(A, None, R)
            inner = table.count_ellipses(A, None, self.params["r0"] * R, closed=False)
            return int(outer - inner)
        T = A @ table.basis
        Tinv = np.linalg.inv(T)
        rr = np.hypot(*Tinv[1])
        if k == "sector":
            alpha = self.params["angle"]
            t_rng = (-R * rr, R * rr)
            if alpha <= math.pi:
                normals = np.array([[0.0, -1.0], [-math.sin(alpha), math.cos(alpha)]])
                return table.count_halfplanes(A, normals, np.zeros(2), t_rng, disk_radius=R)
            if alpha >= 2 * math.pi:
                return int(table.count_ellipses(A, None, R))
            return None  # reflex sectors fall back to enumeration
        if self.is_convex_polygon:
            normals, offsets = self._halfplanes()
            verts = R * self.vertices
            tv = verts @ Tinv[1]
            return table.count_halfplanes(A, normals, R * offsets, (float(tv.min()), float(tv.max())))
        return None


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _point_in_polygon(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x1, y1 = verts[:, 0][None, :], verts[:, 1][None, :]
    x2, y2 = np.roll(verts[:, 0], -1)[None, :], np.roll(verts[:, 1], -1)[None, :]
    cond = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    inside = np.sum(cond & (x < xint), axis=1) % 2 == 1
    # boundary counts as inside
    ex, ey = x2 - x1, y2 - y1
    cross = ex * (y - y1) - ey * (x - x1)
    dot = (x - x1) * ex + (y - y1) * ey
    on_edge = (np.abs(cross) <= 1e-12 * (1 + np.abs(ex) + np.abs(ey))) & (dot >= -1e-12) & (dot <= ex * ex + ey * ey + 1e-12)
    return inside | on_edge.any(axis=1)


def disk() -> BorelShape:
    return BorelShape("disk")


def square() -> BorelShape:
    """The square [-1, 1]^2."""
    return polygon([(-1, -1), (1, -1), (1, 1), (-1, 1)], kind="square")


def sector(angle: float) -> BorelShape:
    if not 0 < angle <= 2 * math.pi:
        raise ValueError("sector angle must lie in (0, 2pi]")
    return BorelShape("sector", {"angle": float(angle)})


def annulus(r0: float) -> BorelShape:
    if not 0 <= r0 < 1:
        raise ValueError("inner radius must lie in [0, 1)")
    return BorelShape("annulus", {"r0": float(r0)})


def polygon(vertices: Sequence[Sequence[float]], kind: str = "polygon") -> BorelShape:
    v = np.asarray(vertices, float)
    if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
        raise ValueError("polygon needs at least three 2-d vertices")
    shape = BorelShape(kind, {}, v)
    if not shape.area > 0:
        raise ValueError("polygon has zero area")
    if not shape.contains(np.zeros((1, 2)))[0]:
        raise ValueError("shape must contain the origin")
    return shape
