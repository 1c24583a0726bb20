"""Projected and full Hamiltonian trajectories."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import ShellGeometry
from .integrator import STATUS_NAMES, integrate_batch


class StepFailure(RuntimeError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    termination: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def as_geometry(h) -> ShellGeometry:
    return h if isinstance(h, ShellGeometry) else ShellGeometry(h)


class ProjectedFlow:
    """Right-hand side and projection for d zeta/d tau = Xt(zeta) on per-row levels.

    The first four state components are zeta; extra components (quadratures
    carried along the orbit) are left to ``extra_rhs``.
    """

    def __init__(self, geom: ShellGeometry, levels, extra_rhs=None, newton_iter: int = 3):
        self.geom = geom
        self.levels = np.atleast_1d(np.asarray(levels, dtype=float))
        self.extra_rhs = extra_rhs
        self.newton_iter = newton_iter

    def rhs(self, y, rows):
        zeta = y[:, :4]
        Xt, B = self.geom.projected_field_and_bracket(zeta)
        if self.extra_rhs is None:
            return Xt
        return np.concatenate([Xt, self.extra_rhs(zeta, B, y, rows)], axis=1)

    def project(self, y, rows):
        zeta = y[:, :4]
        level = self.levels[rows] if self.levels.size > 1 else np.full(len(rows), self.levels[0])
        drift = np.maximum(np.abs(self.geom.value(zeta) - level), np.abs(np.linalg.norm(zeta, axis=1) - 1.0))
        proj, _, _ = self.geom.project_to_level(zeta, level, tol=1e-15, max_iter=self.newton_iter)
        out = y.copy()
        out[:, :4] = proj
        return out, drift


def integrate_projected(h, zeta0, T: float, tol: float = 1e-10, level: float | None = None,
                        drift_tol: float = 1e-6, record: bool = True) -> Trajectory:
    """One orbit of the projected field for projected time T (negative: backward).

    The start point is first projected onto the sphere and onto ``level``
    (default: its own level).  Termination is ``reached_T`` or
    ``step_failure``; drift above ``drift_tol`` raises :class:`StepFailure`.
    """
    geom = as_geometry(h)
    zeta0 = np.asarray(zeta0, dtype=float).reshape(1, 4)
    zeta0 = zeta0 / np.linalg.norm(zeta0)
    lev = float(geom.value(zeta0)[0]) if level is None else float(level)
    zeta0, _, _ = geom.project_to_level(zeta0, lev)
    flow = ProjectedFlow(geom, [lev])
    res = integrate_batch(flow.rhs, zeta0, T, rtol=tol, atol=tol * 1e-2, project=flow.project,
                          drift_tol=drift_tol, record=record)
    status = STATUS_NAMES[int(res.status[0])]
    if status == "drift_violation":
        raise StepFailure(f"constraint drift {res.max_drift[0]:.2e} exceeded {drift_tol:.1e}")
    if record:
        times, states = res.history[0]
    else:
        times, states = np.array([0.0, res.t[0]]), np.vstack([zeta0, res.y])
    h_drift = np.abs(geom.value(states) - lev)
    rho_drift = np.abs(np.linalg.norm(states, axis=1) - 1.0)
    return Trajectory(times, states, status, {
        "level": lev, "h_drift": h_drift, "rho_drift": rho_drift,
        "max_step_drift": float(res.max_drift[0]), "steps": int(res.steps[0]),
    })


@dataclass
class FullFlowResult:
    trajectory: Trajectory
    blow_down: bool
    blow_down_time: float | None
    rho: np.ndarray
    h0: np.ndarray


def integrate_full(h, z0, t_span, tol: float = 1e-12, rho_floor: float = 1e-3,
                   max_step: float = np.inf) -> FullFlowResult:
    """Integrate dz/dt = X_h(z) in R^4 over ``t_span`` = (0, T), T of either sign.

    Collapse towards the origin stops the run at rho = rho_floor * rho(0);
    the blow-down time is then extrapolated with d(rho^2)/dt = 2{h, h0},
    which is constant to first order near the cone tip.
    """
    geom = as_geometry(h)
    z0 = np.asarray(z0, dtype=float)
    rho0 = float(np.linalg.norm(z0))
    if rho0 == 0:
        raise ValueError("the full flow needs z0 != 0")
    t0, t1 = float(t_span[0]), float(t_span[1])

    def rhs(t, z):
        return geom.hamiltonian_field(z[None, :])[0]

    def collapse(t, z):
        return np.linalg.norm(z) - rho_floor * rho0

    collapse.terminal = True
    collapse.direction = -1
    sol = solve_ivp(rhs, (t0, t1), z0, method="DOP853", rtol=tol, atol=tol * rho_floor * rho0,
                    events=collapse, dense_output=False, max_step=max_step)
    if sol.status == -1:
        raise StepFailure(sol.message)
    states = sol.y.T
    rho = np.linalg.norm(states, axis=1)
    blow = bool(sol.status == 1 and len(sol.t_events[0]))
    T_est = None
    termination = "reached_T"
    if blow:
        termination = "blow_down"
        z_end = sol.y_events[0][0]
        B_end = float(geom.bracket_h0(z_end[None, :])[0])
        T_est = float(sol.t_events[0][0] - float(np.dot(z_end, z_end)) / (2.0 * B_end))
    level = float(geom.value(z0[None, :])[0])
    traj = Trajectory(sol.t, states, termination, {
        "h_drift": np.abs(geom.value(states) - level), "level": level, "nfev": int(sol.nfev),
    })
    return FullFlowResult(traj, blow, T_est, rho, 0.5 * rho ** 2)
