"""The gluing ramp: a monotone C^3 profile rising from 0 to 1 with slope at most eps."""
from __future__ import annotations

import numpy as np


def _smoothstep(u):
    return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)


def _smoothstep_integral(u):
    return u ** 4 * (2.5 - 3.0 * u + u * u)


def ramp(tau, eps: float) -> np.ndarray:
    """phi_eps(tau): 0 for tau <= -eps, slope eps on [eps, 1/eps - eps], 1 for tau >= 1/eps + eps.

    The derivative is eps times a quintic smoothstep across each corner
    interval of width 2 eps, so phi' is C^2 and sup phi' = eps.  Infinite
    arguments map to 0 and 1.
    """
    tau = np.asarray(tau, dtype=float)
    lo, hi = -eps, 1.0 / eps - eps
    out = np.zeros(tau.shape)
    first = (tau > lo) & (tau < eps)
    mid = (tau >= eps) & (tau <= hi)
    last = (tau > hi) & (tau < hi + 2 * eps)
    out[first] = 2 * eps * eps * _smoothstep_integral((tau[first] - lo) / (2 * eps))
    out[mid] = eps * eps + eps * (tau[mid] - eps)
    u = (tau[last] - hi) / (2 * eps)
    out[last] = 1.0 - eps * eps + 2 * eps * eps * (u - _smoothstep_integral(u))
    out[tau >= hi + 2 * eps] = 1.0
    return out


def ramp_derivative(tau, eps: float) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    lo, hi = -eps, 1.0 / eps - eps
    out = np.zeros(tau.shape)
    first = (tau > lo) & (tau < eps)
    mid = (tau >= eps) & (tau <= hi)
    last = (tau > hi) & (tau < hi + 2 * eps)
    out[first] = eps * _smoothstep((tau[first] - lo) / (2 * eps))
    out[mid] = eps
    out[last] = eps * (1.0 - _smoothstep((tau[last] - hi) / (2 * eps)))
    return out


def ramp_saturation(eps: float) -> float:
    """Smallest argument at which the ramp equals 1."""
    return 1.0 / eps + eps
