"""Propagation by the autonomous averaged operator, plus a lab-frame check.

For v(t) = v0 o phi^{-t} the exact Egorov identity turns
i u' = (H0 + Op^w(v(t))) u into i w' = Op^w(v0) w with u = e^{-itH0} w, and
Sobolev norms of u and w coincide.  :func:`split_step_floquet` integrates
the lab-frame equation directly, re-quantising v(t) at every midpoint.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.sparse.linalg import expm_multiply

from ..symbols import as_symbol, compose_with_flow, substitute
from .basis import HermiteBasis2D
from .states import QuantumState
from .weyl import OperatorMatrix, assemble_weyl_matrix


class EigenPropagator:
    """exp(-i t M) through eigendecompositions of the blocks of M."""

    def __init__(self, op: OperatorMatrix):
        if not op.hermitian:
            raise ValueError("propagation needs a hermitian matrix")
        self.op = op
        self._blocks = op.blocks()
        self._eig: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _block_eig(self, i: int):
        if i not in self._eig:
            idx = self._blocks[i]
            sub = self.op.matrix[idx][:, idx].toarray()
            sub = 0.5 * (sub + sub.conj().T)
            try:
                self._eig[i] = np.linalg.eigh(sub)
            except np.linalg.LinAlgError as exc:
                raise RuntimeError(f"eigensolver failed on block {i}: {exc}") from exc
        return self._eig[i]

    def spectral_coefficients(self, c: np.ndarray):
        """Per occupied block: (indices, eigenvalues, eigenvectors, V^* c)."""
        out = []
        for i, idx in enumerate(self._blocks):
            cb = c[idx]
            if not np.any(cb):
                continue
            w, V = self._block_eig(i)
            out.append((idx, w, V, V.conj().T @ cb))
        return out

    def evolve(self, c: np.ndarray, times: Sequence[float]) -> list[np.ndarray]:
        parts = self.spectral_coefficients(np.asarray(c, dtype=complex))
        states = []
        for t in times:
            psi = np.zeros(len(c), dtype=complex)
            for idx, w, V, a in parts:
                psi[idx] = V @ (np.exp(-1j * w * t) * a)
            states.append(psi)
        return states

    def apply_function(self, fn, c: np.ndarray) -> np.ndarray:
        """fn(M) c by functional calculus."""
        out = np.zeros(len(c), dtype=complex)
        for idx, w, V, a in self.spectral_coefficients(np.asarray(c, dtype=complex)):
            out[idx] = V @ (fn(w) * a)
        return out


def evolve(M: OperatorMatrix, w0: QuantumState, times: Sequence[float], method: str = "eig",
           propagator: EigenPropagator | None = None) -> list[QuantumState]:
    """States exp(-i t M) w0 at the requested times.

    ``method="eig"`` diagonalises the blocks of M once; ``"krylov"`` steps
    with scipy's action-of-exponential routine and suits very large blocks.
    """
    times = [float(t) for t in times]
    if method == "eig":
        prop = propagator or EigenPropagator(M)
        coeffs = prop.evolve(w0.coefficients, times)
    elif method == "krylov":
        if not M.hermitian:
            raise ValueError("propagation needs a hermitian matrix")
        A = (-1j * M.matrix).tocsr()
        coeffs, c, t_prev = [], np.asarray(w0.coefficients, dtype=complex), 0.0
        for t in times:
            c = expm_multiply(A * (t - t_prev), c)
            if not np.all(np.isfinite(c)):
                raise RuntimeError("Krylov propagation broke down")
            coeffs.append(c.copy())
            t_prev = t
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    return [QuantumState(c, w0.basis, t) for c, t in zip(coeffs, times)]


def split_step_floquet(v0, basis: HermiteBasis2D, u0: QuantumState, t_final: float,
                       dt: float = 0.05, record_every: int | None = None):
    """Lab-frame integration of i u' = (H0 + Op^w(v0 o phi^{-t})) u.

    Strang splitting: exact diagonal half steps of H0 around a full step of
    the potential quantised at the midpoint time.  Returns the final state
    in the interaction picture (e^{itH0} u) and the list of recorded
    (t, lab-frame state) pairs.
    """
    v0 = as_symbol(v0)
    moving = compose_with_flow(v0, -1)
    energies = basis.energies()
    steps = max(1, int(np.ceil(t_final / dt - 1e-12)))
    dt = t_final / steps
    half = np.exp(-0.5j * dt * energies)
    u = np.asarray(u0.coefficients, dtype=complex).copy()
    record = []
    for k in range(steps):
        t_mid = (k + 0.5) * dt
        V = assemble_weyl_matrix(substitute(moving, {"t": t_mid}), basis, check_convergence=False)
        u = half * u
        u = EigenPropagator(V).evolve(u, [dt])[0]
        u = half * u
        if record_every and (k + 1) % record_every == 0:
            record.append(((k + 1) * dt, u.copy()))
    w = np.exp(1j * t_final * energies) * u
    return QuantumState(w, basis, t_final), record
