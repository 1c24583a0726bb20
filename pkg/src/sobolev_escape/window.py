"""Smooth spectral windows shared by the symbol-level and matrix-level checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)

    def bump(y):
        safe = np.where(y > 0, y, 1.0)
        return np.where(y > 0, np.exp(-1.0 / safe), 0.0)

    a, b = bump(x), bump(1.0 - x)
    return a / (a + b)


@dataclass(frozen=True)
class MourreSpec:
    """Interval I = [a_lo, a_hi], positivity constant theta and window width.

    The window g equals 1 on I and vanishes outside
    [a_lo - margin, a_hi + margin].
    """

    a_lo: float
    a_hi: float
    theta: float
    margin: float = 0.02

    def __post_init__(self):
        if not self.a_lo < self.a_hi:
            raise ValueError("interval needs a_lo < a_hi")
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.margin <= 0:
            raise ValueError("window margin must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return self.a_lo - self.margin, self.a_hi + self.margin

    def window(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        rise = smooth_step((lam - (self.a_lo - self.margin)) / self.margin)
        fall = smooth_step(((self.a_hi + self.margin) - lam) / self.margin)
        return rise * fall
