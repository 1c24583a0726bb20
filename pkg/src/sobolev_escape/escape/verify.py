"""Sampled certification: {h, a} >= threshold on a shell, the certified level interval, Mourre positivity."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..flow import EmptySurfaceError, EnergyShellSpec, ShellGeometry, as_geometry, sample_energy_surface
from ..flow.surface import sphere_points
from ..symbols import SymbolExpr, as_symbol, compose_with_flow, poisson_bracket, resonant_average
from ..window import MourreSpec
from .config import EscapeError
from .function import EscapeFunction


@dataclass
class EscapeVerification:
    min_bracket: float
    worst_point: list
    passed: bool
    threshold: float
    level: float
    n_samples: int
    n_excluded: int
    method: str
    fd_step: float | None
    brackets: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"min_bracket": self.min_bracket, "worst_point": self.worst_point, "passed": self.passed,
                "threshold": self.threshold, "level": self.level, "n_samples": self.n_samples,
                "n_excluded": self.n_excluded, "method": self.method, "fd_step": self.fd_step}


def hamiltonian_step(geom: ShellGeometry, z: np.ndarray, t: float, substeps: int = 2) -> np.ndarray:
    """Classical RK4 for dz/dt = X_h(z) over time t."""
    dt = t / substeps
    f = geom.hamiltonian_field
    for _ in range(substeps):
        k1 = f(z)
        k2 = f(z + 0.5 * dt * k1)
        k3 = f(z + 0.5 * dt * k2)
        k4 = f(z + dt * k3)
        z = z + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return z


def _as_evaluator(a):
    if isinstance(a, EscapeFunction):
        return lambda z: a(z, strict=False)
    if isinstance(a, (SymbolExpr, str)):
        sym = as_symbol(a)
        return lambda z: np.asarray(sym(z), dtype=float)
    if callable(a):
        return lambda z: np.asarray(a(z), dtype=float)
    raise TypeError("a must be an EscapeFunction, a symbol or a callable")


def flow_derivative(h, a, z, fd_step: float = 1e-3) -> np.ndarray:
    """d/dt a(Phi^t z) at t = 0 by central differences with one Richardson step.

    D(s) = (a(Phi^s z) - a(Phi^-s z)) / 2s and the result is
    (4 D(s/2) - D(s)) / 3, accurate to O(s^4).
    """
    geom = as_geometry(h)
    ev = _as_evaluator(a)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    n = len(z)
    shifts = [fd_step, -fd_step, fd_step / 2, -fd_step / 2]
    moved = np.concatenate([hamiltonian_step(geom, z, s) for s in shifts])
    vals = ev(moved).reshape(4, n)
    d1 = (vals[0] - vals[1]) / (2 * fd_step)
    d2 = (vals[2] - vals[3]) / fd_step
    return (4 * d2 - d1) / 3


def shell_points(h, level: float, n: int, seed: int = 0) -> np.ndarray:
    return sample_energy_surface(EnergyShellSpec(h, level), n, seed=seed, geometry=as_geometry(h)).points


def verify_escape(h, a, n_samples: int = 10_000, fd_step: float = 1e-3, level: float | None = None,
                  threshold: float | None = None, seed: int = 0, method: str = "fd",
                  points: np.ndarray | None = None) -> EscapeVerification:
    """min of {h, a} over a quasi-random sample of Z_level (unit points; {h, a} has degree 0).

    ``method``: "fd" differentiates a along the Hamiltonian flow, "exact"
    uses the symbolic bracket (symbols only), "decomposed" the analytic
    decomposition of a built escape function (same h only).  The threshold
    defaults to delta_hat/2 for a built escape function and to 0 otherwise
    (pass needs min > 0 then).  Points where a cannot be evaluated are
    excluded and counted; more than 0.1 % exclusions fail the run.
    """
    geom = as_geometry(h)
    if level is None:
        if not isinstance(a, EscapeFunction):
            raise ValueError("level is required unless a is a built escape function")
        level = a.e0
    if threshold is None:
        threshold = a.delta_hat / 2 if isinstance(a, EscapeFunction) else 0.0
    pts = shell_points(geom, level, n_samples, seed) if points is None else np.atleast_2d(points)
    if method == "fd":
        br = flow_derivative(geom, a, pts, fd_step)
    elif method == "exact":
        if isinstance(a, EscapeFunction):
            raise ValueError("method 'exact' needs a symbolic a")
        br = np.asarray(poisson_bracket(geom.h, as_symbol(a))(pts), dtype=float)
    elif method == "decomposed":
        if not isinstance(a, EscapeFunction):
            raise ValueError("method 'decomposed' needs a built escape function")
        if not a.h.structurally_equal(geom.h):
            raise ValueError("the decomposition is only valid for the Hamiltonian a was built from")
        br = a.bracket(pts)
    else:
        raise ValueError(f"unknown method {method!r}")
    br = np.broadcast_to(np.asarray(br, dtype=float), (len(pts),))
    good = np.isfinite(br)
    n_excl = int(np.sum(~good))
    if not good.any():
        raise EscapeError("the bracket could not be evaluated at any sample point")
    i = int(np.flatnonzero(good)[np.argmin(br[good])])
    mn = float(br[i])
    ok = n_excl <= 1e-3 * len(pts) and (mn >= threshold if threshold > 0 else mn > 0)
    return EscapeVerification(mn, pts[i].tolist(), bool(ok), float(threshold), float(level), int(len(pts)),
                              n_excl, method, fd_step if method == "fd" else None, br)


@dataclass
class IntervalResult:
    lo: float
    hi: float
    checks: list

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def to_dict(self) -> dict:
        return {"interval": [self.lo, self.hi], "checks": self.checks}


def escape_interval(h, a, e0: float, step: float = 0.05, n_samples: int = 2000, threshold: float | None = None,
                    fd_step: float = 1e-3, method: str = "fd", seed: int = 0, refine: int = 3,
                    max_steps: int = 40) -> IntervalResult:
    """Largest [w_lo, w_hi] around e0 on whose sampled levels verify_escape passes.

    Levels e0 +- k*step are tried outward until the first failure (an empty
    or critical level counts as a failure); the gap to the failing level is
    then bisected ``refine`` times.  Returns [e0, e0] when even e0 fails.
    """
    checks = []

    def passes(w: float) -> bool:
        try:
            res = verify_escape(h, a, n_samples, fd_step, level=w, threshold=threshold, seed=seed, method=method)
            checks.append({"level": w, "min_bracket": res.min_bracket, "passed": res.passed,
                           "excluded": res.n_excluded})
            return res.passed
        except (EmptySurfaceError, EscapeError) as exc:
            checks.append({"level": w, "min_bracket": None, "passed": False, "error": str(exc)})
            return False

    if not passes(e0):
        return IntervalResult(e0, e0, checks)
    ends = []
    for sign in (-1, 1):
        good = e0
        bad = None
        for k in range(1, max_steps + 1):
            w = e0 + sign * k * step
            if passes(w):
                good = w
            else:
                bad = w
                break
        if bad is not None:
            for _ in range(refine):
                mid = 0.5 * (good + bad)
                if passes(mid):
                    good = mid
                else:
                    bad = mid
        ends.append(good)
    checks.sort(key=lambda c: c["level"])
    return IntervalResult(ends[0], ends[1], checks)


@dataclass
class MourreSymbolResult:
    passed: bool
    margin: float
    witness: dict | None
    range_estimate: list
    n_samples: int
    delta: float
    min_localized_bracket: float | None = None  # min of {<v>, a} - delta where g > 0

    def to_dict(self) -> dict:
        return {"passed": self.passed, "margin": self.margin, "witness": self.witness,
                "range_estimate": self.range_estimate, "n_samples": self.n_samples, "delta": self.delta,
                "min_localized_bracket": self.min_localized_bracket}


def effective_symbol(v0):
    """Resonant average of the driven symbol v0 composed with the backward oscillator flow."""
    v0 = as_symbol(v0)
    driven = v0 if v0.time_dependent else compose_with_flow(v0, -1)
    return resonant_average(driven)


def _level_points(avg, levels, n_per_level, seed, iters: int = 30):
    """Newton projection of sphere points onto the levels of a degree-0 average."""
    out = []
    for j, w in enumerate(levels):
        z = sphere_points(n_per_level, seed + 101 * j)
        for _ in range(iters):
            val = avg(z)
            g = avg.gradient(z)
            g2 = np.einsum("ij,ij->i", g, g)
            step = np.where(g2 > 1e-14, (val - w) / np.where(g2 > 1e-14, g2, 1.0), 0.0)
            z = z - step[:, None] * g
            z /= np.linalg.norm(z, axis=1, keepdims=True)
        keep = np.abs(avg(z) - w) < 1e-9
        out.append(z[keep])
    return np.concatenate(out) if out else np.zeros((0, 4))


def verify_mourre_symbol(v0, a, spec: MourreSpec, n_samples: int = 4000, delta: float | None = None,
                         seed: int = 0, fd_step: float = 1e-3, tol: float = 1e-9) -> MourreSymbolResult:
    """Check g^2(<v>) ({<v>, a} - delta) >= -tol on samples with |z| >= 1.

    <v> is the resonant average of v0 composed with the backward oscillator
    flow, i.e. the autonomous symbol generated by the driven problem.
    delta defaults to spec.theta.  Samples are drawn uniformly on the
    sphere and on levels spread over the window support, then scaled by
    radii in [1, 4].  A part of I outside the sampled range of <v> fails
    with that level as witness.
    """
    delta = spec.theta if delta is None else float(delta)
    avg = effective_symbol(v0)
    rng = np.random.default_rng(seed)
    base = sphere_points(n_samples, seed)
    vals = avg(base)
    lo_r, hi_r = float(vals.min()), float(vals.max())
    rng_est = [lo_r, hi_r]
    if spec.a_lo < lo_r or spec.a_hi > hi_r:
        w = spec.a_lo if spec.a_lo < lo_r else spec.a_hi
        return MourreSymbolResult(False, -math.inf, {"reason": "level outside the range of <v>", "level": w},
                                  rng_est, int(len(base)), delta)
    s_lo, s_hi = spec.support
    levels = np.linspace(max(s_lo, lo_r), min(s_hi, hi_r), 11)
    on_levels = _level_points(avg, levels, max(n_samples // 11, 16), seed + 1)
    pts = np.concatenate([base, on_levels])
    pts = pts * rng.uniform(1.0, 4.0, len(pts))[:, None]
    v = avg(pts)
    g = spec.window(v)
    if isinstance(a, EscapeFunction) or not isinstance(a, (SymbolExpr, str)):
        br = _average_flow_derivative(avg, a, pts, fd_step)
    else:
        br = avg.bracket(as_symbol(a), pts)
    q = g ** 2 * (br - delta)
    i = int(np.argmin(q))
    margin = float(q[i])
    passed = margin >= -tol
    witness = None if passed else {"reason": "negative localized bracket", "point": pts[i].tolist(),
                                   "level": float(v[i]), "bracket": float(br[i]), "window": float(g[i])}
    inside = g > 0
    loc = float(np.min(br[inside] - delta)) if inside.any() else None
    return MourreSymbolResult(bool(passed), margin, witness, rng_est, int(len(pts)), delta, loc)


def _average_flow_derivative(avg, a, z, fd_step):
    ev = _as_evaluator(a)

    def field(p):
        gr = avg.gradient(p)
        return np.concatenate([gr[:, 2:], -gr[:, :2]], axis=1)

    def step(p, t):
        k1 = field(p)
        k2 = field(p + 0.5 * t * k1)
        k3 = field(p + 0.5 * t * k2)
        k4 = field(p + t * k3)
        return p + t / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    n = len(z)
    moved = np.concatenate([step(z, s) for s in (fd_step, -fd_step, fd_step / 2, -fd_step / 2)])
    vals = ev(moved).reshape(4, n)
    d1 = (vals[0] - vals[1]) / (2 * fd_step)
    d2 = (vals[2] - vals[3]) / fd_step
    return (4 * d2 - d1) / 3
