"""Local escape functions k+- = +-h0/f near K+- and their brackets with h."""
from __future__ import annotations

import numpy as np

from ..flow import InvariantSet, InvariantSetReport, ShellGeometry, as_geometry, tube_samples
from ..symbols import as_symbol, h0_symbol, poisson_bracket
from .config import EscapeConfig, EscapeError


def geometry_for(h, cfg: EscapeConfig) -> ShellGeometry:
    geom = as_geometry(h)
    dens = cfg.density
    if dens is None and geom.f_tilde is None:
        return geom
    if geom.f_tilde is not None and dens is not None and geom.f_tilde.structurally_equal(dens):
        return geom
    return ShellGeometry(geom.h, dens)


def k_bracket(geom: ShellGeometry, zeta, sign: int) -> np.ndarray:
    """{h, k+-} on unit points: -+ (1 / 2f) * div_{f mu}(Xt), a degree-0 function.

    For f = 1 this is +-{h, h0}; the density contributes -+ df[Xt] / (2 f^2).
    """
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    f, _ = geom.density(zeta)
    return -sign * geom.divergence_weighted(zeta) / (2.0 * f)


def k_value(geom: ShellGeometry, z, sign: int) -> np.ndarray:
    z = np.atleast_2d(np.asarray(z, dtype=float))
    rho = np.linalg.norm(z, axis=1)
    f, _ = geom.density(z / rho[:, None])
    return sign * 0.5 * rho ** 2 / f


def k_symbol(cfg: EscapeConfig, sign: int):
    """k+- as an expression, for exact brackets."""
    dens = cfg.density
    k = h0_symbol() if dens is None else h0_symbol() / dens
    return k if sign > 0 else -k


def local_escape(h, cfg: EscapeConfig, z, sign: int, report: InvariantSetReport | None = None,
                 radius: float | None = None, check: str = "divergence"):
    """(k+-(z), {h, k+-}(z)) for z whose direction lies in the U+- tube.

    ``check="exact"`` takes the bracket from the symbolic Poisson bracket
    instead of the divergence formula.  With a report, points outside the
    tube raise :class:`EscapeError`.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    geom = geometry_for(h, cfg)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    rho = np.linalg.norm(z, axis=1)
    zeta = z / rho[:, None]
    if report is not None:
        members = report.attractors if sign > 0 else report.repellors
        r = radius if radius is not None else (cfg.tube_radius_plus if sign > 0 else cfg.tube_radius_minus)
        if r is None:
            r = default_tube_radius(report)
        d = InvariantSet(geom, members, report.level).distance(zeta, geom.value(zeta))
        if np.any(d > r):
            raise EscapeError(f"point outside the {'U+' if sign > 0 else 'U-'} tube "
                              f"(distance {float(np.max(d)):.3g} > radius {r:.3g})")
    k = k_value(geom, z, sign)
    if check == "exact":
        br = poisson_bracket(geom.h, k_symbol(cfg, sign))(z)
    elif check == "divergence":
        br = k_bracket(geom, zeta, sign)
    else:
        raise ValueError("check must be 'divergence' or 'exact'")
    return k, np.asarray(br, dtype=float)


def default_tube_radius(report: InvariantSetReport) -> float:
    r = report.tube_radius if report.tube_radius is not None else 0.1
    return 0.5 * r


def estimate_delta(geom: ShellGeometry, report: InvariantSetReport, r_plus: float, r_minus: float,
                   factor: float = 0.8) -> tuple[float, dict]:
    """factor * min of {h, k+-} over the bump supports (radius 2r) of both tubes."""
    plus = tube_samples(geom, report.attractors, 2 * r_plus, report.level, n_radial=8, n_angle=48)
    minus = tube_samples(geom, report.repellors, 2 * r_minus, report.level, n_radial=8, n_angle=48)
    bp = float(np.min(k_bracket(geom, plus, +1)))
    bm = float(np.min(k_bracket(geom, minus, -1)))
    low = min(bp, bm)
    if not low > 0:
        raise EscapeError(f"{{h, k+-}} is not positive on the tubes (min {low:.3g}); "
                          "shrink the tubes or supply another density f_tilde")
    return factor * low, {"min_bracket_plus": bp, "min_bracket_minus": bm,
                          "samples": [int(len(plus)), int(len(minus))]}
