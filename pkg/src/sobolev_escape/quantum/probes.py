"""Matrix-level probes: exact Egorov conjugation and the localized commutator bound."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..symbols import as_symbol, compose_with_flow, substitute
from ..symbols import nodes as N
from ..window import MourreSpec
from .basis import HermiteBasis2D
from .weyl import OperatorMatrix, assemble_weyl_matrix, ladder_dilation


def polynomial_degree(node) -> int | None:
    """Total degree in (x, xi) if the tree is a polynomial, else None."""
    if isinstance(node, N.Const):
        return 0
    if isinstance(node, N.Var):
        return None if node.name == "t" else 1
    if isinstance(node, N.Func):
        if node.name == "neg":
            return polynomial_degree(node.arg)
        return 0 if not N.variables_in(node.arg) else None
    if isinstance(node, N.Neg):
        return polynomial_degree(node.arg)
    if isinstance(node, N.Pow):
        d = polynomial_degree(node.base)
        if d is None or (node.exponent < 0 and d > 0):
            return None
        return d * max(node.exponent, 0)
    if isinstance(node, N.Binary):
        a, b = polynomial_degree(node.left), polynomial_degree(node.right)
        if a is None or b is None:
            return None
        if isinstance(node, N.Mul):
            return a + b
        if isinstance(node, N.Div):
            return a if b == 0 else None
        return max(a, b)
    return None


def egorov_residual(f, t: float, basis: HermiteBasis2D | int, degree: int | None = None) -> float:
    """max |U M U^+ - Op^w(f o phi^t)| over degrees <= N - d, U = diag(e^{i(n1+n2+1)t}).

    ``degree`` overrides the polynomial degree d computed from the tree.
    """
    f = as_symbol(f)
    if isinstance(basis, int):
        basis = HermiteBasis2D(basis)
    d = polynomial_degree(f.root) if degree is None else int(degree)
    if d is None:
        raise ValueError("egorov_residual needs a polynomial symbol")
    M = assemble_weyl_matrix(f, basis, check_convergence=False).dense()
    phase = np.exp(1j * basis.energies() * t)
    lhs = phase[:, None] * M * phase.conj()[None, :]
    moved = substitute(compose_with_flow(f, 1), {"t": float(t)})
    rhs = assemble_weyl_matrix(moved, basis, check_convergence=False).dense()
    inner = np.flatnonzero(basis.degree <= basis.N - d)
    if len(inner) == 0:
        return 0.0
    return float(np.max(np.abs((lhs - rhs)[np.ix_(inner, inner)])))


@dataclass
class MatrixMourreResult:
    margin: float
    passed: bool
    theta: float
    E_cut: float
    interior_degree: int
    window_rank: float
    blocks_checked: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def mourre_matrices(f, N: int, coefficient: float = -1.0) -> tuple[OperatorMatrix, OperatorMatrix]:
    """Op^w(f) and Op^w(coefficient x1 xi1) over the basis of degree N + 2.

    Pair with ``matrix_mourre_check(..., a_degree=2)`` so the commutator is
    exact on degrees <= N.
    """
    big = HermiteBasis2D(N + 2)
    return assemble_weyl_matrix(f, big), ladder_dilation(big, coefficient)


def matrix_mourre_check(M: OperatorMatrix, A: OperatorMatrix, spec: MourreSpec, E_cut: float = 20.0,
                        a_degree: int = 2, tol: float = 1e-6) -> MatrixMourreResult:
    """Smallest eigenvalue of P (G i[M,A] G - theta G^2) P on H0-levels >= E_cut.

    The commutator is formed on the full basis and then compressed to the
    degrees <= N - a_degree, where A's reach keeps the compression exact.
    G = g(M) uses the compressed M.  An empty window gives margin 0.
    """
    if M.basis != A.basis:
        raise ValueError("M and A must share a basis")
    basis = M.basis
    C = (1j * (M.matrix @ A.matrix - A.matrix @ M.matrix)).tocsr()
    keep = np.flatnonzero(basis.degree <= basis.N - a_degree)
    inner = HermiteBasis2D(basis.N - a_degree)
    C = C[keep][:, keep]
    Mi = M.matrix[keep][:, keep].tocsr()
    # blocks of the union pattern so G and C are both block diagonal
    joint = OperatorMatrix((abs(Mi) + abs(C)).tocsr(), inner, True)
    margin, rank, checked = np.inf, 0.0, 0
    for idx in joint.blocks():
        high = inner.energies()[idx] >= E_cut
        if not high.any():
            continue
        Mb = Mi[idx][:, idx].toarray()
        w, V = np.linalg.eigh(0.5 * (Mb + Mb.conj().T))
        gw = spec.window(w)
        rank += float(np.sum(gw ** 2))
        G = (V * gw) @ V.conj().T
        X = G @ C[idx][:, idx].toarray() @ G - spec.theta * (G @ G)
        Y = X[np.ix_(high, high)]
        margin = min(margin, float(np.linalg.eigvalsh(0.5 * (Y + Y.conj().T)).min()))
        checked += 1
    if not np.isfinite(margin):
        margin = 0.0
    return MatrixMourreResult(margin=margin, passed=margin >= -tol, theta=spec.theta, E_cut=E_cut,
                              interior_degree=inner.N, window_rank=rank, blocks_checked=checked)
