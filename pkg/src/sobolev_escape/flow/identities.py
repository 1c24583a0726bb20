"""Pointwise identities on Z: weighted divergence, its flux oracle, the foliation residual."""
from __future__ import annotations

import numpy as np

from .geometry import ShellGeometry, contact_form


def _geometry(h, f_tilde=None) -> ShellGeometry:
    if isinstance(h, ShellGeometry):
        if f_tilde is None:
            return h
        return ShellGeometry(h.h, f_tilde)
    return ShellGeometry(h, f_tilde)


def divergence_projected(h, zeta, f_tilde=None) -> np.ndarray:
    """div_{f mu}(Xt) = df[Xt]/f - 2{h, h0} at unit points (mu the Leray area form)."""
    geom = _geometry(h, f_tilde)
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    return geom.divergence_weighted(zeta / np.linalg.norm(zeta, axis=1, keepdims=True))


def divergence_flux(h, zeta, f_tilde=None, step: float = 1e-3, inner_step: float = 1e-4,
                    normalization: str = "leray") -> np.ndarray:
    """Finite-difference flux of f Xt through a small tangent square, per unit area.

    The chart psi(u, v) projects zeta + u e1 + v e2 back onto Z.  With
    w = f mu(psi_u, psi_v), the divergence is
    [d/du (f mu(Xt, psi_v)) + d/dv (f mu(psi_u, Xt))] / w at the origin,
    all derivatives by central differences.
    """
    geom = _geometry(h, f_tilde)
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    zeta = zeta / np.linalg.norm(zeta, axis=1, keepdims=True)
    level = geom.value(zeta)
    frame = geom.tangent_frame(zeta)
    e1, e2 = frame[:, 0], frame[:, 1]

    def chart(u, v):
        p, _, _ = geom.project_to_level(zeta + u * e1 + v * e2, level, tol=1e-16, max_iter=8)
        return p

    def partials(u, v):
        du = (chart(u + inner_step, v) - chart(u - inner_step, v)) / (2 * inner_step)
        dv = (chart(u, v + inner_step) - chart(u, v - inner_step)) / (2 * inner_step)
        return du, dv

    def weighted_mu(p, a, b):
        return geom.density(p)[0] * geom.mu_tilde(p, a, b, normalization)

    total = np.zeros(len(zeta))
    for sign in (1.0, -1.0):
        p = chart(sign * step, 0.0)
        _, dv = partials(sign * step, 0.0)
        total += sign * weighted_mu(p, geom.projected_field(p), dv)
        p = chart(0.0, sign * step)
        du, _ = partials(0.0, sign * step)
        total += sign * weighted_mu(p, du, geom.projected_field(p))
    du, dv = partials(0.0, 0.0)
    w = weighted_mu(zeta, du, dv)
    return total / (2 * step) / w


def foliation_residual(h, zeta, frame=None) -> np.ndarray:
    """max_i |mu(Xt, e_i) - 2 |grad h| alpha(e_i)| with the unit-normal area form."""
    geom = _geometry(h)
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    if frame is None:
        frame = geom.tangent_frame(zeta)
    frame = np.asarray(frame, dtype=float).reshape(len(zeta), 2, 4)
    Xt = geom.projected_field(zeta)
    gnorm = np.linalg.norm(geom.grad(zeta), axis=1)
    res = [np.abs(geom.mu_tilde(zeta, Xt, frame[:, i], "unit") - 2 * gnorm * contact_form(zeta, frame[:, i]))
           for i in range(2)]
    return np.maximum(res[0], res[1])


def identity_residual(h, zeta) -> np.ndarray:
    """|div(Xt) + 2{h, h0}| with the divergence taken from the Jacobian (no closed form)."""
    geom = _geometry(h)
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    return np.abs(geom.divergence_intrinsic(zeta) + 2.0 * geom.bracket_h0(zeta))


def radial_tangency_residual(h, z) -> np.ndarray:
    """|d rho [Xt]| at arbitrary points z != 0."""
    geom = _geometry(h)
    z = np.atleast_2d(np.asarray(z, dtype=float))
    rho = np.linalg.norm(z, axis=1)
    return np.abs(np.einsum("ij,ij->i", z, geom.projected_field(z)) / rho)
