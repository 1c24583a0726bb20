"""Resonant average along the harmonic-oscillator flow."""
from __future__ import annotations

import math
import warnings

import numpy as np

from .compile import CompiledBundle
from .expr import SymbolExpr, as_symbol, compose_with_flow, differentiate
from .nodes import SPACE_VARS


class AveragedSymbol:
    """Evaluator for <v>(z) = (1/2pi) int_0^{2pi} v(t, phi^t z) dt.

    The integrand is the flow-composed tree, sampled at K equispaced nodes
    (periodic trapezoid).  Convergence is judged by comparing with the
    K/2-node rule, which reuses every other node; K doubles until the two
    agree to ``tol`` or ``max_nodes`` is reached.
    """

    def __init__(self, v, nodes: int = 256, tol: float = 1e-12, max_nodes: int = 4096,
                 adaptive: bool = True, _composed: SymbolExpr | None = None):
        self.symbol = as_symbol(v)
        self.composed = _composed if _composed is not None else compose_with_flow(self.symbol, +1)
        self.nodes = int(nodes)
        self.tol = tol
        self.max_nodes = max_nodes
        self.adaptive = adaptive
        self._bundle = CompiledBundle([self.composed.root])
        self._grad_bundle = None
        self.last_nodes_used = self.nodes

    def _samples(self, pts: np.ndarray, k: int, offset: int = 0, stride: int = 1) -> np.ndarray:
        """Integrand at nodes t_j = 2 pi j / k for j = offset, offset+stride, ..."""
        t = 2 * math.pi * np.arange(offset, k, stride) / k
        return self._bundle(pts[:, None, :], t[None, :])[..., 0]

    def _average(self, pts: np.ndarray, bundle_eval) -> np.ndarray:
        k = self.nodes
        samples = bundle_eval(pts, k, 0, 1)
        full = samples.mean(axis=1)
        while self.adaptive:
            half = samples[:, ::2].mean(axis=1)
            err = np.max(np.abs(full - half) / (1 + np.abs(full)), initial=0.0)
            if not np.isfinite(err) or err <= self.tol:
                break
            if 2 * k > self.max_nodes:
                warnings.warn(f"resonant average not converged with {k} nodes (change {err:.2e})",
                              RuntimeWarning, stacklevel=3)
                break
            odd = bundle_eval(pts, 2 * k, 1, 2)
            merged = np.empty((samples.shape[0], 2 * k) + samples.shape[2:])
            merged[:, 0::2] = samples
            merged[:, 1::2] = odd
            samples, k = merged, 2 * k
            full = samples.mean(axis=1)
        self.last_nodes_used = k
        return full

    def __call__(self, points, chunk: int = 4096) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 4)
        out = np.empty(len(flat))
        for s in range(0, len(flat), chunk):
            out[s:s + chunk] = self._average(flat[s:s + chunk], self._samples)
        return out.reshape(pts.shape[:-1])

    def at(self, p) -> float:
        return float(self(np.asarray(list(p), dtype=float)[None, :])[0])

    # -- derivatives ---------------------------------------------------------
    def derivative(self, var: str) -> "AveragedSymbol":
        """Average of the derivative of the composed integrand."""
        if var not in SPACE_VARS:
            raise ValueError("averages are time independent; differentiate in x1, x2, xi1, xi2")
        return AveragedSymbol(self.symbol, self.nodes, self.tol, self.max_nodes, self.adaptive,
                              _composed=differentiate(self.composed, var))

    def gradient(self, points, chunk: int = 2048) -> np.ndarray:
        if self._grad_bundle is None:
            self._grad_bundle = CompiledBundle(
                [differentiate(self.composed, v).root for v in SPACE_VARS])
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 4)
        out = np.empty((len(flat), 4))

        def grad_samples(p, k, offset, stride):
            t = 2 * math.pi * np.arange(offset, k, stride) / k
            return self._grad_bundle(p[:, None, :], t[None, :])

        for s in range(0, len(flat), chunk):
            out[s:s + chunk] = self._average(flat[s:s + chunk], grad_samples)
        return out.reshape(pts.shape)

    def bracket(self, a, points) -> np.ndarray:
        """{<v>, a} at the points, for a symbol ``a``."""
        a = as_symbol(a)
        ga = CompiledBundle([differentiate(a, v).root for v in SPACE_VARS])(points)
        gv = self.gradient(points)
        return (gv[..., 2] * ga[..., 0] + gv[..., 3] * ga[..., 1]
                - gv[..., 0] * ga[..., 2] - gv[..., 1] * ga[..., 3])


def resonant_average(v, nodes: int = 256, tol: float = 1e-12, adaptive: bool = True) -> AveragedSymbol:
    """Evaluator of the resonant average of ``v`` (default 256 trapezoid nodes)."""
    return AveragedSymbol(v, nodes=nodes, tol=tol, adaptive=adaptive)
