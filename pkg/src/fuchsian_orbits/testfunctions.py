"""Indicator test functions on the plane and on pairs of points."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = ["TestFunction", "ball_indicator", "pair_ball", "pair_friend", "pair_det"]


@dataclass(frozen=True)
class TestFunction:
    """Bounded, compactly supported indicator of one of four kinds.

    ball_indicator(R):      1{|x| <= R}
    pair_ball(R, R2):       1{|x| <= R} 1{|y| <= R2}
    pair_friend(R, eta):    1{|x| <= R} 1{0 < |y - x| < eta}
    pair_det(R, D, s):      1{|x| <= R} 1{|y| <= s|x|} 1{|x ^ y| <= D}
    """

    kind: str
    R: float
    R2: Optional[float] = None
    eta: Optional[float] = None
    D: Optional[float] = None
    s: Optional[float] = None

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.kind not in ("ball_indicator", "pair_ball", "pair_friend", "pair_det"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if not self.R >= 0:
            raise ValueError("R must be nonnegative")

    @property
    def is_pair(self) -> bool:
        return self.kind != "ball_indicator"

    @property
    def support_radius(self) -> float:
        if self.kind == "ball_indicator":
            return self.R
        if self.kind == "pair_ball":
            return max(self.R, self.R2)
        if self.kind == "pair_friend":
            return self.R + self.eta
        return self.R * max(1.0, self.s)

    def integral(self) -> float:
        """Integral of the one-point function (ball_indicator only)."""
        if self.kind != "ball_indicator":
            raise ValueError("defined for ball_indicator")
        return math.pi * self.R**2

    def diagonal_integral(self) -> float:
        """Integral over x of f(x, x) + f(x, -x)."""
        if self.kind == "pair_ball":
            r = min(self.R, self.R2)
            return 2 * math.pi * r * r
        if self.kind == "pair_friend":
            # f(x, x) = 0 (punctured) and f(x, -x) needs 0 < 2|x| < eta
            r = min(self.R, self.eta / 2.0)
            return math.pi * r * r
        if self.kind == "pair_det":
            # both pairs have zero determinant and |y| = |x| <= s|x| iff s >= 1
            return 2 * math.pi * self.R**2 if self.s >= 1 else 0.0
        raise ValueError("pair functions only")

    def pair_value(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        y = np.atleast_2d(y)
        nx = np.hypot(x[:, 0], x[:, 1])
        ok = nx <= self.R
        if self.kind == "pair_ball":
            return (ok & (np.hypot(y[:, 0], y[:, 1]) <= self.R2)).astype(float)
        if self.kind == "pair_friend":
            d = np.hypot(*(y - x).T)
            return (ok & (d > 0) & (d < self.eta)).astype(float)
        if self.kind == "pair_det":
            det = np.abs(x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0])
            return (ok & (np.hypot(y[:, 0], y[:, 1]) <= self.s * nx) & (det <= self.D)).astype(float)
        raise ValueError("pair functions only")


def ball_indicator(R: float) -> TestFunction:
    return TestFunction("ball_indicator", float(R))


def pair_ball(R: float, R2: Optional[float] = None) -> TestFunction:
    return TestFunction("pair_ball", float(R), R2=float(R if R2 is None else R2))


def pair_friend(R: float, eta: float) -> TestFunction:
    return TestFunction("pair_friend", float(R), eta=float(eta))


def pair_det(R: float, D: float, s: float) -> TestFunction:
    return TestFunction("pair_det", float(R), D=float(D), s=float(s))
