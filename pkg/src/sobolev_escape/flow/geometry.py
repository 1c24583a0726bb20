"""Pointwise geometry of a degree-0 Hamiltonian on the unit sphere.

Coordinates are ordered (x1, x2, xi1, xi2).  With {h, f} = grad_xi h . grad_x f
- grad_x h . grad_xi f the Hamiltonian field is X_h = (grad_xi h, -grad_x h),
and the projected field is

    Xt(z) = rho * (X_h - ({h, h0} / rho^2) z),     rho = |z|,

which is homogeneous of degree 0 and tangent to both the sphere and the
level sets of h.  All functions take arrays with trailing dimension 4.
"""
from __future__ import annotations

import numpy as np

from ..symbols import SymbolExpr, as_symbol, differentiate
from ..symbols.compile import CompiledBundle
from ..symbols.nodes import SPACE_VARS


def symplectic_form(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Omega(u, v) for Omega = dxi1^dx1 + dxi2^dx2, so Omega(grad h, X_h) = |grad h|^2."""
    return u[..., 2] * v[..., 0] - u[..., 0] * v[..., 2] + u[..., 3] * v[..., 1] - u[..., 1] * v[..., 3]


def liouville_volume(u1, u2, u3, u4) -> np.ndarray:
    """(Omega ^ Omega / 2)(u1, u2, u3, u4)."""
    w = symplectic_form
    return w(u1, u2) * w(u3, u4) - w(u1, u3) * w(u2, u4) + w(u1, u4) * w(u2, u3)


def contact_form(z: np.ndarray, v: np.ndarray) -> np.ndarray:
    """alpha(v) = (-xi . dx + x . dxi)(v) / 2 at z."""
    return 0.5 * (-z[..., 2] * v[..., 0] - z[..., 3] * v[..., 1] + z[..., 0] * v[..., 2] + z[..., 1] * v[..., 3])


def _row_dot(a, b):
    return np.einsum("...i,...i->...", a, b)


class ShellGeometry:
    """Compiled h, gradient and Hessian plus the derived fields.

    ``f_tilde`` is the positive degree-0 density used for weighted
    divergences; it defaults to the constant 1.
    """

    def __init__(self, h, f_tilde=None):
        self.h = as_symbol(h)
        if self.h.time_dependent:
            raise ValueError("the Hamiltonian must not depend on t")
        grads = [differentiate(self.h, v) for v in SPACE_VARS]
        self._first = CompiledBundle([self.h.root] + [g.root for g in grads])
        hess = []
        for i in range(4):
            for j in range(i, 4):
                hess.append(differentiate(grads[i], SPACE_VARS[j]).root)
        self._hess = CompiledBundle(hess)
        self.f_tilde: SymbolExpr | None = None if f_tilde is None else as_symbol(f_tilde)
        if self.f_tilde is not None:
            fg = [differentiate(self.f_tilde, v).root for v in SPACE_VARS]
            self._ftilde = CompiledBundle([self.f_tilde.root] + fg)

    # -- raw evaluations --------------------------------------------------
    def value_and_grad(self, z) -> tuple[np.ndarray, np.ndarray]:
        out = self._first(z)
        return out[..., 0], out[..., 1:]

    def value(self, z) -> np.ndarray:
        return self.value_and_grad(z)[0]

    def grad(self, z) -> np.ndarray:
        return self.value_and_grad(z)[1]

    def hessian(self, z) -> np.ndarray:
        flat = self._hess(z)
        H = np.empty(flat.shape[:-1] + (4, 4))
        k = 0
        for i in range(4):
            for j in range(i, 4):
                H[..., i, j] = H[..., j, i] = flat[..., k]
                k += 1
        return H

    def density(self, z) -> tuple[np.ndarray, np.ndarray]:
        """f_tilde and its gradient (1 and 0 by default)."""
        z = np.asarray(z, dtype=float)
        if self.f_tilde is None:
            return np.ones(z.shape[:-1]), np.zeros(z.shape)
        out = self._ftilde(z)
        return out[..., 0], out[..., 1:]

    # -- fields -------------------------------------------------------------
    @staticmethod
    def symplectic_gradient(g: np.ndarray) -> np.ndarray:
        return np.concatenate([g[..., 2:], -g[..., :2]], axis=-1)

    def hamiltonian_field(self, z) -> np.ndarray:
        return self.symplectic_gradient(self.grad(z))

    def bracket_h0(self, z) -> np.ndarray:
        """{h, h0}(z) = X_h . z."""
        z = np.asarray(z, dtype=float)
        return _row_dot(self.hamiltonian_field(z), z)

    def projected_field(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        rho = np.linalg.norm(z, axis=-1)[..., None]
        X = self.hamiltonian_field(z)
        B = _row_dot(X, z)[..., None]
        return rho * X - (B / rho) * z

    def projected_field_and_bracket(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=float)
        rho = np.linalg.norm(z, axis=-1)[..., None]
        X = self.hamiltonian_field(z)
        B = _row_dot(X, z)
        return rho * X - (B[..., None] / rho) * z, B

    def projected_jacobian(self, z) -> np.ndarray:
        """Ambient derivative of the projected field, shape [..., 4, 4]."""
        z = np.asarray(z, dtype=float)
        rho = np.linalg.norm(z, axis=-1)[..., None, None]
        _, g = self.value_and_grad(z)
        H = self.hessian(z)
        X = self.symplectic_gradient(g)
        JH = np.concatenate([H[..., 2:, :], -H[..., :2, :]], axis=-2)  # d X_h
        B = _row_dot(X, z)[..., None, None]
        gradB = X + np.einsum("...ji,...j->...i", JH, z)
        eye = np.eye(4)
        zz = z[..., :, None] * z[..., None, :]
        return (X[..., :, None] * z[..., None, :] / rho + rho * JH
                - z[..., :, None] * gradB[..., None, :] / rho - (B / rho) * eye + B * zz / rho ** 3)

    # -- surface geometry ------------------------------------------------------
    def tangent_frame(self, zeta) -> np.ndarray:
        """Orthonormal (e1, e2) spanning T Z, oriented so mu_tilde(e1, e2) > 0.

        Returns shape [..., 2, 4].
        """
        zeta = np.asarray(zeta, dtype=float)
        g = self.grad(zeta)
        n1 = zeta / np.linalg.norm(zeta, axis=-1, keepdims=True)
        g = g - _row_dot(g, n1)[..., None] * n1
        n2 = g / np.linalg.norm(g, axis=-1, keepdims=True)
        cand = np.broadcast_to(np.eye(4), zeta.shape[:-1] + (4, 4)).copy()
        for n in (n1, n2):
            cand -= np.einsum("...k,...jk->...j", n, cand)[..., :, None] * n[..., None, :]
        norms = np.linalg.norm(cand, axis=-1)
        i1 = np.argmax(norms, axis=-1)
        e1 = np.take_along_axis(cand, i1[..., None, None], axis=-2)[..., 0, :]
        e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
        cand -= _row_dot(cand, e1[..., None, :])[..., :, None] * e1[..., None, :]
        norms = np.linalg.norm(cand, axis=-1)
        i2 = np.argmax(norms, axis=-1)
        e2 = np.take_along_axis(cand, i2[..., None, None], axis=-2)[..., 0, :]
        e2 /= np.linalg.norm(e2, axis=-1, keepdims=True)
        flip = self.mu_tilde(zeta, e1, e2) < 0
        e2 = np.where(flip[..., None], -e2, e2)
        return np.stack([e1, e2], axis=-2)

    def mu_tilde(self, zeta, a, b, normalization: str = "leray") -> np.ndarray:
        """Area form on Z, mu = -i_V nu_S3 with nu_S3 = i_zeta (Omega^Omega/2).

        ``normalization="unit"`` takes V = grad h/|grad h| (the Riemannian area
        of Z, up to orientation).  The default ``"leray"`` takes
        V = grad h/|grad h|^2, the measure induced by Liouville on the level
        set; only this one satisfies div(Xt) = -2{h, h0} for every h.
        """
        zeta = np.asarray(zeta, dtype=float)
        g = self.grad(zeta)
        gn2 = np.sum(g * g, axis=-1, keepdims=True)
        if normalization == "leray":
            V = g / gn2
        elif normalization == "unit":
            V = g / np.sqrt(gn2)
        else:
            raise ValueError(f"unknown normalization {normalization!r}")
        z = zeta / np.linalg.norm(zeta, axis=-1, keepdims=True)
        return liouville_volume(V, z, np.asarray(a, dtype=float), np.asarray(b, dtype=float))

    def divergence_intrinsic(self, zeta, frame=None, normalization: str = "leray") -> np.ndarray:
        """div of the projected field from its Jacobian, without the closed form.

        Trace over T Z of the ambient Jacobian gives the Riemannian divergence;
        the Leray measure subtracts d log|grad h| [Xt].
        """
        zeta = np.asarray(zeta, dtype=float)
        if frame is None:
            frame = self.tangent_frame(zeta)
        D = self.projected_jacobian(zeta)
        e1, e2 = frame[..., 0, :], frame[..., 1, :]
        div = (_row_dot(e1, np.einsum("...ij,...j->...i", D, e1))
               + _row_dot(e2, np.einsum("...ij,...j->...i", D, e2)))
        if normalization == "unit":
            return div
        if normalization != "leray":
            raise ValueError(f"unknown normalization {normalization!r}")
        g = self.grad(zeta)
        HX = np.einsum("...ij,...j->...i", self.hessian(zeta), self.projected_field(zeta))
        return div - _row_dot(g, HX) / np.sum(g * g, axis=-1)

    def divergence_weighted(self, zeta) -> np.ndarray:
        """div_{f mu_tilde}(Xt) = df[Xt]/f - 2{h, h0} on the unit sphere."""
        zeta = np.asarray(zeta, dtype=float)
        Xt, B = self.projected_field_and_bracket(zeta)
        f, df = self.density(zeta)
        return _row_dot(df, Xt) / f - 2.0 * B

    # -- projection onto the shell ---------------------------------------------
    def project_to_level(self, z, level, tol: float = 1e-12, max_iter: int = 30):
        """Newton projection of points onto {|zeta| = 1, h = level} along grad h.

        Returns (zeta, residual, converged).
        """
        zeta = np.array(z, dtype=float, copy=True)
        level = np.broadcast_to(np.asarray(level, dtype=float), zeta.shape[:-1])
        zeta /= np.linalg.norm(zeta, axis=-1, keepdims=True)
        res = None
        for _ in range(max_iter):
            val, g = self.value_and_grad(zeta)
            res = val - level
            if np.all(np.abs(res) <= tol):
                break
            gn = np.sum(g * g, axis=-1)
            safe = np.where(gn > 0, gn, 1.0)
            step = np.where((gn > 0)[..., None], (res / safe)[..., None] * g, 0.0)
            zeta = zeta - step
            zeta /= np.linalg.norm(zeta, axis=-1, keepdims=True)
        val = self.value(zeta)
        res = val - level
        ok = np.isfinite(res) & (np.abs(res) <= 10 * tol)
        return zeta, res, ok

    def spherical_gradient_norm(self, zeta) -> np.ndarray:
        """|grad_{S^3} h|, equal to |grad h| at unit points by Euler's identity."""
        return np.linalg.norm(self.grad(zeta), axis=-1)
