"""First entry of projected orbits into tubes around K+ or K-, and the hitting time."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ShellGeometry
from .integrator import ENTERED_SET, REACHED_T, integrate_batch
from .limits import InvariantSet, InvariantSetReport, tube_samples
from .trajectory import ProjectedFlow, as_geometry


class HittingTimeError(RuntimeError):
    pass


@dataclass
class EntryResult:
    tau: np.ndarray  # signed projected time of entry (nan when not reached)
    state: np.ndarray  # final augmented state
    entered: np.ndarray  # bool
    status: np.ndarray


def tube_entry(geom: ShellGeometry, zeta, levels, centres: np.ndarray, radius: float, direction: int,
               tau_max: float, tol: float = 1e-10, extra0: np.ndarray | None = None, extra_rhs=None,
               error_weights=None) -> EntryResult:
    """Integrate until the orbit is within ``radius`` of its row's ``centres`` [n, k, 4].

    ``direction`` is +1 (forward) or -1 (backward).  Extra state components
    (quadratures) are integrated alongside via ``extra_rhs``.
    """
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    n = len(zeta)
    levels = np.broadcast_to(np.asarray(levels, dtype=float), (n,))
    y0 = zeta if extra0 is None else np.concatenate([zeta, extra0], axis=1)
    flow = ProjectedFlow(geom, levels.copy(), extra_rhs=extra_rhs)

    def event(y, rows):
        d = np.linalg.norm(y[:, None, :4] - centres[rows], axis=2)
        return np.min(d, axis=1) - radius

    res = integrate_batch(flow.rhs, y0, direction * tau_max, rtol=tol, atol=tol * 1e-2, event=event,
                          project=flow.project, error_weights=error_weights)
    entered = res.status == ENTERED_SET
    tau = np.where(entered, res.t, np.nan)
    return EntryResult(tau, res.y, entered, res.status)


def tube_transversality(geom: ShellGeometry, members: list, radius: float, level: float) -> float:
    """min over the tube boundary of the outward radial speed (z - c) . Xt / |z - c|.

    Positive for a tube the forward flow leaves (around a repellor); the
    negative of the max for an attractor tube is its inward margin.
    """
    ring = tube_samples(geom, members, radius, level, n_radial=1, n_angle=64)
    inv = InvariantSet(geom, members, level)
    centres = inv.fixed
    diff = ring[:, None, :] - centres[None]
    k = np.argmin(np.linalg.norm(diff, axis=2), axis=1)
    d = diff[np.arange(len(ring)), k]
    dn = np.linalg.norm(d, axis=1)
    ring, d = ring[dn > 0], d[dn > 0] / dn[dn > 0, None]
    return float(np.min(np.einsum("ij,ij->i", d, geom.projected_field(ring))))


def hitting_time(h, zeta, report: InvariantSetReport, tube_eps: float = 0.05, offset: float = 0.0,
                 tau_max: float = 200.0, tol: float = 1e-10, levels=None) -> np.ndarray:
    """t(zeta) = (projected time for the backward orbit to enter the K- tube) + offset.

    Points inside the K- tube get -inf; points on K+ itself get +inf.
    Satisfies t(Phi^tau zeta) = t(zeta) + tau.  ``levels`` defaults to each
    point's own level (K- is continued there).
    """
    geom = as_geometry(h)
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    zeta = zeta / np.linalg.norm(zeta, axis=1, keepdims=True)
    lev = geom.value(zeta) if levels is None else np.broadcast_to(np.asarray(levels, dtype=float), len(zeta))
    minus = InvariantSet(geom, report.repellors, report.level)
    plus = InvariantSet(geom, report.attractors, report.level)
    out = np.empty(len(zeta))
    d_minus = minus.distance(zeta, lev)
    d_plus = plus.distance(zeta, lev)
    inside = d_minus < tube_eps
    on_plus = d_plus <= 1e-13
    out[inside] = -np.inf
    out[on_plus] = np.inf
    todo = np.flatnonzero(~inside & ~on_plus)
    if todo.size:
        centres = minus.points_at(lev[todo])
        res = tube_entry(geom, zeta[todo], lev[todo], centres, tube_eps, -1, tau_max, tol)
        if not np.all(res.entered):
            bad = todo[~res.entered][0]
            raise HittingTimeError(f"did not reach K- tube within tau_max = {tau_max} (first failure at row {bad})")
        out[todo] = -res.tau + offset
    return out
