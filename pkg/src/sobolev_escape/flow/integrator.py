"""Batched Dormand-Prince 5(4) integration with projection and terminal events.

Every trajectory in the batch keeps its own step size, direction and end
time, so a few thousand orbits advance together in vectorised numpy.  After
each accepted step the caller's projection maps the state back onto the
constraint manifold and the right-hand side is re-evaluated there.  A
terminal event fires when g changes from positive to non-positive; its time
is bisected with genuine Runge-Kutta sub-steps rather than interpolants.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

REACHED_T = 0
ENTERED_SET = 1
STEP_FAILURE = 2
DRIFT_VIOLATION = 3
STATUS_NAMES = {REACHED_T: "reached_T", ENTERED_SET: "entered_set", STEP_FAILURE: "step_failure",
                DRIFT_VIOLATION: "drift_violation"}

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

Rhs = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class BatchResult:
    t: np.ndarray
    y: np.ndarray
    status: np.ndarray
    steps: np.ndarray
    max_drift: np.ndarray
    history: list | None = None
    status_names: dict = field(default_factory=lambda: dict(STATUS_NAMES))


def _stages(rhs: Rhs, y: np.ndarray, rows: np.ndarray, h: np.ndarray, k1: np.ndarray):
    """All seven stages for a step of signed size h (h has shape [m])."""
    ks = [k1]
    hh = h[:, None]
    for i in range(1, 7):
        acc = y.copy()
        for j, a in enumerate(_A[i]):
            if a != 0.0:
                acc += hh * a * ks[j]
        ks.append(rhs(acc, rows))
    y5 = y + hh * sum(b * k for b, k in zip(_B, ks) if b != 0.0)
    err = hh * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return y5, err


def _substep(rhs: Rhs, y: np.ndarray, rows: np.ndarray, h: np.ndarray) -> np.ndarray:
    return _stages(rhs, y, rows, h, rhs(y, rows))[0]


def integrate_batch(rhs: Rhs, y0, t_end, *, rtol: float = 1e-10, atol: float = 1e-12,
                    event: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
                    project: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None,
                    drift_tol: float = np.inf, h_init=None, h_max: float = np.inf,
                    max_steps: int = 200000, record: bool = False,
                    error_weights: np.ndarray | None = None) -> BatchResult:
    """Integrate dy/dt = rhs(y, rows) for each row of ``y0`` from t=0 to ``t_end``.

    ``t_end`` may be negative (backward integration) and may differ per row.
    ``rows`` passed to the callables index the original batch, so per-row
    data (target level, nearby attractor) can be looked up.  ``project``
    returns (projected state, drift before projection); a drift above
    ``drift_tol`` aborts that row.  With ``record`` the accepted states of
    every row are returned as a list of (times, states) pairs.
    """
    y = np.array(y0, dtype=float, copy=True)
    n, d = y.shape
    t_end = np.broadcast_to(np.asarray(t_end, dtype=float), (n,)).copy()
    direction = np.where(t_end < 0, -1.0, 1.0)
    span = np.abs(t_end)
    s = np.zeros(n)  # elapsed |t|
    status = np.full(n, -1, dtype=int)
    steps = np.zeros(n, dtype=int)
    max_drift = np.zeros(n)
    weights = np.ones(d) if error_weights is None else np.asarray(error_weights, dtype=float)
    all_rows = np.arange(n)
    hist_rows, hist_t, hist_y = [], [], []
    if record:
        hist_rows.append(all_rows.copy())
        hist_t.append(np.zeros(n))
        hist_y.append(y.copy())

    def f_signed(yy, rows):
        return direction[rows, None] * rhs(yy, rows)

    pending_rows, pending_y, pending_h, pending_s = [], [], [], []
    g_prev = event(y, all_rows) if event is not None else None
    # rows starting on or inside the set stop at once
    if g_prev is not None:
        inside = g_prev <= 0
        status[inside] = ENTERED_SET
    zero_span = (span == 0) & (status < 0)
    status[zero_span] = REACHED_T
    active = np.flatnonzero(status < 0)
    k1_full = np.zeros_like(y)
    if active.size:
        k1_full[active] = f_signed(y[active], active)
    if h_init is None:
        fn = np.linalg.norm(k1_full, axis=1)
        yn = np.linalg.norm(y, axis=1)
        h = np.where(fn > 0, 0.01 * np.maximum(yn, 1e-3) / np.where(fn > 0, fn, 1.0), 1e-3)
    else:
        h = np.broadcast_to(np.asarray(h_init, dtype=float), (n,)).copy()
    h = np.minimum(np.minimum(h, np.maximum(span, 1e-300)), h_max)

    while active.size:
        rows = active
        hs = np.minimum(h[rows], span[rows] - s[rows])
        hs = np.minimum(hs, h_max)
        y_old = y[rows]
        y_new, err = _stages(f_signed, y_old, rows, hs, k1_full[rows])
        scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
        en = np.sqrt(np.mean((weights * err / scale) ** 2, axis=1))
        en = np.where(np.isfinite(en), en, np.inf)
        ok = en <= 1.0
        factor = np.where(en > 0, 0.9 * np.power(np.maximum(en, 1e-300), -0.2), 5.0)
        factor = np.clip(factor, 0.2, 5.0)
        factor = np.where(ok, factor, np.minimum(factor, 1.0))
        h[rows] = hs * factor
        tiny = h[rows] < 1e-14 * np.maximum(1.0, s[rows])
        if np.any(tiny & ~ok):
            bad = rows[tiny & ~ok]
            status[bad] = STEP_FAILURE
        acc = rows[ok]
        if acc.size:
            ya = y_new[ok]
            if project is not None:
                ya, drift = project(ya, acc)
                max_drift[acc] = np.maximum(max_drift[acc], drift)
                violated = drift > drift_tol
                if np.any(violated):
                    status[acc[violated]] = DRIFT_VIOLATION
            s_new = s[acc] + hs[ok]
            fired = np.zeros(acc.size, dtype=bool)
            if event is not None:
                g_new = event(ya, acc)
                fired = (g_prev[acc] > 0) & (g_new <= 0) & (status[acc] < 0)
                if np.any(fired):
                    # located together after the loop
                    ev = acc[fired]
                    pending_rows.append(ev)
                    pending_y.append(y[ev].copy())
                    pending_h.append(hs[ok][fired])
                    pending_s.append(s[ev].copy())
                    status[ev] = ENTERED_SET
                g_prev[acc] = g_new
            y[acc] = ya
            s[acc] = s_new
            steps[acc] += 1
            done = (span[acc] - s[acc] <= 1e-14 * np.maximum(1.0, span[acc])) & (status[acc] < 0)
            status[acc[done]] = REACHED_T
            if record:
                keep = ~fired
                hist_rows.append(acc[keep])
                hist_t.append(direction[acc[keep]] * s[acc[keep]])
                hist_y.append(ya[keep].copy())
            over = (steps[acc] >= max_steps) & (status[acc] < 0)
            status[acc[over]] = STEP_FAILURE
            cont = acc[status[acc] < 0]
            if cont.size:
                k1_full[cont] = f_signed(y[cont], cont)
        active = np.flatnonzero(status < 0)

    if pending_rows:
        ev = np.concatenate(pending_rows)
        te, ye = _locate_event(f_signed, event, project, np.concatenate(pending_y), ev, np.concatenate(pending_h))
        y[ev] = ye
        s[ev] = np.concatenate(pending_s) + te
        if record:
            hist_rows.append(ev)
            hist_t.append(direction[ev] * s[ev])
            hist_y.append(ye.copy())
    history = None
    if record:
        r = np.concatenate(hist_rows)
        tt = np.concatenate(hist_t)
        yy = np.concatenate(hist_y)
        order = np.argsort(r, kind="stable")
        r, tt, yy = r[order], tt[order], yy[order]
        cuts = np.searchsorted(r, np.arange(n + 1))
        history = [(tt[cuts[i]:cuts[i + 1]], yy[cuts[i]:cuts[i + 1]]) for i in range(n)]
    return BatchResult(direction * s, y, status, steps, max_drift, history)


def _locate_event(f_signed, event, project, y0, rows, hs, iterations: int = 42):
    """Bisect the sub-step size at which g first becomes non-positive."""
    lo = np.zeros(rows.size)
    hi = hs.copy()
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        ym = _substep(f_signed, y0, rows, mid)
        if project is not None:
            ym = project(ym, rows)[0]
        inside = event(ym, rows) <= 0
        hi = np.where(inside, mid, hi)
        lo = np.where(inside, lo, mid)
    ye = _substep(f_signed, y0, rows, hi)
    if project is not None:
        ye = project(ye, rows)[0]
    return hi, ye
