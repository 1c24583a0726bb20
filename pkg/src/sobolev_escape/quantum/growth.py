"""Sobolev-norm growth measurement with a truncation-leak validity window."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .states import QuantumState, sobolev_norm


class WindowTooShortError(RuntimeError):
    pass


@dataclass
class GrowthReport:
    times: list[float]
    s_list: list[float]
    norms: dict[float, list[float]]
    leak: list[float]
    leak_cap: float
    T0: float
    T_valid: float
    time_origin: float
    slopes: dict[float, float]
    half_widths: dict[float, float]
    plain_slopes: dict[float, float]
    samples_in_window: int
    window_too_short: bool
    upper_bound_ok: dict[float, bool]
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        key = lambda s: repr(float(s))
        return {
            "s_list": [float(s) for s in self.s_list],
            "leak_cap": self.leak_cap,
            "T0": self.T0,
            "T_valid": self.T_valid,
            "time_origin": self.time_origin,
            "window": [self.T0 + self.time_origin, self.T_valid],
            "samples_in_window": self.samples_in_window,
            "slopes": {key(s): v for s, v in self.slopes.items()},
            "slope_half_widths": {key(s): v for s, v in self.half_widths.items()},
            "plain_slopes": {key(s): v for s, v in self.plain_slopes.items()},
            "upper_bound_ok": {key(s): v for s, v in self.upper_bound_ok.items()},
            "window_too_short": self.window_too_short,
            "warnings": list(self.warnings),
        }


def _fit(logt: np.ndarray, logn: np.ndarray) -> tuple[float, float]:
    if len(logt) < 3:
        return float("nan"), float("nan")
    res = stats.linregress(logt, logn)
    q = stats.t.ppf(0.975, len(logt) - 2)
    return float(res.slope), float(q * res.stderr)


def growth_report(states: Sequence[QuantumState], s_list: Sequence[float], leak_cap: float = 1e-6,
                  T0: float = 1.0, time_origin: float = 0.0, top_bands: int = 5,
                  min_samples: int = 20, upper_tol: float = 0.15, strict: bool = False) -> GrowthReport:
    """Fit log ||w(t)||_s against log(t - time_origin) on the pre-leak window.

    The window starts at clock value ``T0`` (clock = t - time_origin) and ends
    at T_valid, the first time the mass in the top ``top_bands`` degree bands
    exceeds ``leak_cap``.  A window shorter than one decade, or with fewer
    than ``min_samples`` samples, is flagged (raised with ``strict``).
    ``plain_slopes`` repeat the fit against log t on the same window.
    """
    times = np.array([s.time for s in states], dtype=float)
    order = np.argsort(times, kind="stable")
    states = [states[i] for i in order]
    times = times[order]
    leak = np.array([s.top_band_mass(top_bands) for s in states])
    over = np.flatnonzero(leak > leak_cap)
    T_valid = float(times[over[0]]) if len(over) else float(times[-1])
    clock = times - time_origin
    in_window = (clock >= T0) & (times <= T_valid) & (clock > 0)
    if len(over):
        in_window &= times < T_valid
    n_in = int(in_window.sum())
    notes = []
    too_short = (T_valid - time_origin) < 10.0 * T0 or n_in < min_samples
    if too_short:
        notes.append("window too short: truncation leak reached before one decade of growth; raise N")
        if strict:
            raise WindowTooShortError(notes[-1])
    norms, slopes, widths, plain, upper = {}, {}, {}, {}, {}
    for s in s_list:
        series = np.array([sobolev_norm(w, s) for w in states])
        norms[s] = series.tolist()
        if n_in >= 3:
            slopes[s], widths[s] = _fit(np.log(clock[in_window]), np.log(series[in_window]))
            pos = in_window & (times > 0)
            plain[s] = _fit(np.log(times[pos]), np.log(series[pos]))[0] if pos.sum() >= 3 else float("nan")
        else:
            slopes[s] = widths[s] = plain[s] = float("nan")
        upper[s] = bool(not math.isnan(slopes[s]) and slopes[s] <= s + upper_tol)
    return GrowthReport(
        times=times.tolist(), s_list=list(s_list), norms=norms, leak=leak.tolist(), leak_cap=leak_cap,
        T0=float(T0), T_valid=T_valid, time_origin=float(time_origin), slopes=slopes,
        half_widths=widths, plain_slopes=plain, samples_in_window=n_in, window_too_short=too_short,
        upper_bound_ok=upper, warnings=notes,
    )
