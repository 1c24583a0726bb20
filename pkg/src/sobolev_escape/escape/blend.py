"""The positive degree-0 function m that equals {h, k+-} on the tubes."""
from __future__ import annotations

import numpy as np

from ..flow import InvariantSet, InvariantSetReport, sample_energy_surface, EnergyShellSpec
from ..window import smooth_step
from .config import EscapeConfig, EscapeError
from .local import default_tube_radius, estimate_delta, geometry_for, k_bracket


def bump(d, r) -> np.ndarray:
    """1 for d <= r, 0 for d >= 2r, smooth in between."""
    return 1.0 - smooth_step((np.asarray(d, dtype=float) - r) / r)


class BlendedBracket:
    """m = b+ {h,k+} + b- {h,k-} + (1 - b+ - b-) delta_fill on unit points.

    b+- are bumps in the distance to K+- continued to the point's own
    level; ``centres`` lets the caller pass precomputed continued points.
    """

    def __init__(self, geom, plus: InvariantSet, minus: InvariantSet, r_plus: float, r_minus: float,
                 fill: float):
        self.geom = geom
        self.plus = plus
        self.minus = minus
        self.r_plus = float(r_plus)
        self.r_minus = float(r_minus)
        self.fill = float(fill)

    def centres(self, levels):
        return self.plus.points_at(levels), self.minus.points_at(levels)

    def weights(self, zeta, c_plus, c_minus):
        d_plus = np.min(np.linalg.norm(zeta[:, None, :] - c_plus, axis=2), axis=1)
        d_minus = np.min(np.linalg.norm(zeta[:, None, :] - c_minus, axis=2), axis=1)
        return bump(d_plus, self.r_plus), bump(d_minus, self.r_minus), d_plus, d_minus

    def evaluate(self, zeta, c_plus, c_minus, B=None) -> np.ndarray:
        zeta = np.atleast_2d(zeta)
        bp, bm, _, _ = self.weights(zeta, c_plus, c_minus)
        if self.geom.f_tilde is None and B is not None:
            kp, km = B, -B
        else:
            kp = k_bracket(self.geom, zeta, +1)
            km = -kp
        return bp * kp + bm * km + (1.0 - bp - bm) * self.fill

    def __call__(self, z) -> np.ndarray:
        """m at arbitrary nonzero points (degree 0)."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        zeta = z / np.linalg.norm(z, axis=1, keepdims=True)
        c_plus, c_minus = self.centres(self.geom.value(zeta))
        return self.evaluate(zeta, c_plus, c_minus)


def build_m(h, cfg: EscapeConfig, report: InvariantSetReport, n_check: int = 10_000, seed: int = 0):
    """Assemble m and check min m >= delta_hat/2 on a shell sample.

    Returns (m, info) where info holds delta_hat, radii and the sampled
    minimum.  Raises :class:`EscapeError` when the 2r bump supports of the
    two tubes overlap or the check fails.
    """
    if not report.attractors or not report.repellors:
        raise EscapeError("the invariant-set report has no attractor or no repellor")
    geom = geometry_for(h, cfg)
    r_plus = cfg.tube_radius_plus or default_tube_radius(report)
    r_minus = cfg.tube_radius_minus or default_tube_radius(report)
    plus = InvariantSet(geom, report.attractors, report.level)
    minus = InvariantSet(geom, report.repellors, report.level)
    sep = plus.distance(minus.fixed).min() if len(minus.fixed) else np.inf
    if sep <= 2 * (r_plus + r_minus):
        raise EscapeError(f"tubes overlap: K+ and K- are {sep:.3g} apart but the bumps reach "
                          f"{2 * (r_plus + r_minus):.3g}; use smaller tube radii")
    delta_est, dinfo = estimate_delta(geom, report, r_plus, r_minus)
    delta_hat = cfg.delta_hat if cfg.delta_hat is not None else delta_est
    m = BlendedBracket(geom, plus, minus, r_plus, r_minus, fill=delta_hat)
    pts = sample_energy_surface(EnergyShellSpec(geom.h, report.level), n_check, seed=seed, geometry=geom).points
    c_plus, c_minus = m.centres(np.full(len(pts), report.level))
    vals = m.evaluate(pts, c_plus, c_minus)
    info = {"delta_hat": float(delta_hat), "delta_estimate": float(delta_est), "r_plus": float(r_plus),
            "r_minus": float(r_minus), "m_min": float(vals.min()), "m_samples": int(len(pts)), **dinfo}
    if vals.min() < delta_hat / 2:
        raise EscapeError(f"m drops to {vals.min():.3g} < delta_hat/2 = {delta_hat / 2:.3g}")
    return m, info
