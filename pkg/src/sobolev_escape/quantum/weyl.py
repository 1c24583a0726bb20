"""Weyl-quantised matrices in the truncated 2D Hermite basis.

Matrix elements use the cross-Wigner representation

    <phi_m, Op^w(f) phi_n> = int f(z) W(phi_n, phi_m)(z) dz,

where, per plane and in polar coordinates (r, theta),

    W(phi_n, phi_m) = (-1)^min(m,n) / pi * l_min^{|d|}(2 r^2) * exp(-i d theta),
    d = n - m,

and l_k^a(x) = sqrt(k!/(k+a)!) x^{a/2} e^{-x/2} L_k^{(a)}(x) are normalised
Laguerre functions.  Expanding f in angular harmonics exp(i(k1 th1 + k2 th2))
selects k = n - m and leaves a two-dimensional radial integral, evaluated in
the variables S = r1^2 + r2^2 (Gauss-Laguerre) and u = r1^2 / S
(Gauss-Legendre).  Degree-0 homogeneous symbols depend on u and the angles
only, so the origin causes no loss of accuracy.

The brute-force route integrates f against Wigner functions computed
directly from Hermite functions (complex-shifted Gauss-Hermite rule) on a
tensor grid in hyperspherical coordinates, with no selection rules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln, roots_genlaguerre, roots_hermite, roots_laguerre, roots_legendre

from ..symbols import as_symbol
from .basis import HermiteBasis2D


class QuadratureError(RuntimeError):
    """Matrix elements changed by more than the tolerance when orders doubled."""


@dataclass
class OperatorMatrix:
    """Sparse matrix of a quantised symbol over a Hermite basis.

    Selection rules make these matrices sparse (often block diagonal), so the
    storage is CSR; :meth:`dense` materialises the array when needed.
    """

    matrix: sp.csr_matrix
    basis: HermiteBasis2D
    hermitian: bool
    metadata: dict = field(default_factory=dict)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @property
    def shape(self):
        return self.matrix.shape

    def hermiticity_defect(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(np.max(np.abs(diff.data), initial=0.0))

    def blocks(self) -> list[np.ndarray]:
        """Index sets of the connected components of the sparsity pattern."""
        pattern = (abs(self.matrix) > 0).astype(np.int8)
        pattern = pattern + pattern.T
        n, labels = connected_components(pattern, directed=False)
        order = np.argsort(labels, kind="stable")
        splits = np.flatnonzero(np.diff(labels[order])) + 1
        return [np.sort(b) for b in np.split(order, splits)]

    def __matmul__(self, other):
        return self.matrix @ other


# ---------------------------------------------------------------------------
# special functions


def laguerre_functions(alpha: int, kmax: int, x: np.ndarray) -> np.ndarray:
    """l_k^alpha(x) for k = 0..kmax, shape (kmax+1,) + x.shape.

    Forward three-term recurrence on the normalised functions, which stay
    bounded by one, so no overflow occurs even for large degrees.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    if alpha == 0:
        out[0] = np.exp(-0.5 * x)
    else:
        out[0] = np.where(x > 0, np.exp(0.5 * alpha * logx - 0.5 * x - 0.5 * gammaln(alpha + 1.0)), 0.0)
    if kmax >= 1:
        out[1] = (1.0 + alpha - x) / math.sqrt(1.0 + alpha) * out[0]
    for k in range(1, kmax):
        a = (2 * k + 1 + alpha - x) / math.sqrt((k + 1.0) * (k + 1.0 + alpha))
        b = math.sqrt(k * (k + alpha) / ((k + 1.0) * (k + 1.0 + alpha)))
        out[k + 1] = a * out[k] - b * out[k - 1]
    return out


def hermite_functions_poly(nmax: int, q: np.ndarray) -> np.ndarray:
    """Normalised Hermite polynomials H_n(q) with phi_n(q) = H_n(q) exp(-q^2/2).

    ``q`` may be complex.  Shape (nmax+1,) + q.shape.
    """
    q = np.asarray(q)
    out = np.empty((nmax + 1,) + q.shape, dtype=np.result_type(q, float))
    out[0] = math.pi ** -0.25
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * q * out[0]
    for n in range(1, nmax):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * q * out[n] - math.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


# ---------------------------------------------------------------------------
# polar-selection assembly


def _radial_rules(q_s: int, q_u: int):
    s_nodes, s_weights = roots_laguerre(q_s)
    with np.errstate(over="ignore"):
        ws = np.exp(np.log(s_weights) + s_nodes) * s_nodes  # e^S undoes the weight, S is the Jacobian
    u_nodes, u_weights = roots_legendre(q_u)
    u = 0.5 * (u_nodes + 1.0)
    wu = 0.5 * u_weights
    return s_nodes, ws, u, wu


def _angular_harmonics(fn, s_nodes, u, n_theta):
    """FFT coefficients of f on the (S, u) grid; shape (qs, qu, K, K)."""
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    S = s_nodes[:, None, None, None]
    U = u[None, :, None, None]
    r1 = np.sqrt(S * U)
    r2 = np.sqrt(S * (1.0 - U))
    t1 = th[None, None, :, None]
    t2 = th[None, None, None, :]
    vals = fn(r1 * np.cos(t1), r2 * np.cos(t2), r1 * np.sin(t1), r2 * np.sin(t2))
    if not np.all(np.isfinite(vals)):
        raise ValueError("symbol is not finite on the quadrature grid")
    return np.fft.fft2(vals, axes=(2, 3)) / (n_theta * n_theta), float(np.max(np.abs(vals), initial=0.0))


def _polar_assembly(fn, basis: HermiteBasis2D, q_s: int, q_u: int, n_theta: int, harmonic_tol: float):
    N = basis.N
    s_nodes, ws, u, wu = _radial_rules(q_s, q_u)
    coeffs, scale = _angular_harmonics(fn, s_nodes, u, n_theta)
    mags = np.max(np.abs(coeffs), axis=(0, 1))
    cutoff = harmonic_tol * max(scale, 1e-300)
    freqs = np.fft.fftfreq(n_theta, d=1.0 / n_theta).astype(int)
    # harmonics near the Nyquist frequency signal aliasing
    high = np.abs(freqs) >= n_theta // 4
    alias = max(mags[high][:, :].max(initial=0.0), mags[:, high].max(initial=0.0))
    active = [(freqs[i], freqs[j]) for i in range(n_theta) for j in range(n_theta)
              if mags[i, j] > cutoff and abs(freqs[i]) <= N and abs(freqs[j]) <= N]

    s1 = 2.0 * (s_nodes[:, None] * u[None, :]).ravel()
    s2 = 2.0 * (s_nodes[:, None] * (1.0 - u[None, :])).ravel()
    weights = (ws[:, None] * wu[None, :]).ravel()
    lag1: dict[int, np.ndarray] = {}
    lag2: dict[int, np.ndarray] = {}

    rows, cols, vals = [], [], []
    for k1, k2 in active:
        a1, a2 = abs(k1), abs(k2)
        if a1 not in lag1:
            lag1[a1] = laguerre_functions(a1, N - a1, s1)
        if a2 not in lag2:
            lag2[a2] = laguerre_functions(a2, N - a2, s2)
        fk = coeffs[:, :, k1 % n_theta, k2 % n_theta].ravel()
        table = (lag1[a1] * (weights * fk)[None, :]) @ lag2[a2].T  # [min1, min2]
        # all basis states m with n = m + k inside the basis
        n1 = basis.n1 + k1
        n2 = basis.n2 + k2
        cols_k = basis.indices(n1, n2)
        ok = cols_k >= 0
        m1, m2 = basis.n1[ok], basis.n2[ok]
        lo1 = np.minimum(m1, n1[ok])
        lo2 = np.minimum(m2, n2[ok])
        sign = np.where((lo1 + lo2) % 2 == 0, 1.0, -1.0)
        rows.append(np.flatnonzero(ok))
        cols.append(cols_k[ok])
        vals.append(sign * table[lo1, lo2])
    dim = basis.dimension
    if rows:
        mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(dim, dim), dtype=complex)
    else:
        mat = sp.csr_matrix((dim, dim), dtype=complex)
    mat.sum_duplicates()
    meta = {"harmonics": sorted(active), "alias_level": float(alias / max(scale, 1e-300))}
    return mat, meta


# ---------------------------------------------------------------------------
# brute-force assembly


def wigner_reduced(nmax: int, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """e^{x^2+xi^2} W(phi_n, phi_m)(x, xi) for all n, m <= nmax: shape (n, m, ...).

    After the contour shift v -> v - i xi the defining integral becomes a
    Gauss-Hermite integral of a polynomial, so the rule is exact.
    """
    v, w = roots_hermite(nmax + 2)
    x = np.asarray(x, dtype=float)[..., None]
    xi = np.asarray(xi, dtype=float)[..., None]
    hp = hermite_functions_poly(nmax, x + v - 1j * xi)
    hm = hermite_functions_poly(nmax, x - v + 1j * xi)
    return np.einsum("n...j,m...j,j->nm...", hp, hm, w) / math.pi


def _direct_assembly(fn, basis: HermiteBasis2D, q_r: int, q_eta: int, n_theta: int):
    N = basis.N
    s, ws = roots_genlaguerre(q_r, 1.0)
    R = np.sqrt(s)
    wr = 0.5 * ws  # R^3 dR = s ds / 2, weight s e^{-s} supplied by the rule
    e, we = roots_legendre(q_eta)
    eta = 0.25 * math.pi * (e + 1.0)
    weta = 0.25 * math.pi * we * np.cos(eta) * np.sin(eta)
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    wth = 2 * math.pi / n_theta

    rho1 = R[:, None] * np.cos(eta)[None, :]
    rho2 = R[:, None] * np.sin(eta)[None, :]
    x1 = rho1[..., None] * np.cos(th)
    k1 = rho1[..., None] * np.sin(th)
    x2 = rho2[..., None] * np.cos(th)
    k2 = rho2[..., None] * np.sin(th)
    A = wigner_reduced(N, x1, k1)  # (n1, m1, R, eta, th1)
    B = wigner_reduced(N, x2, k2)  # (n2, m2, R, eta, th2)
    f = fn(x1[..., :, None], x2[..., None, :], k1[..., :, None], k2[..., None, :])
    if not np.all(np.isfinite(f)):
        raise ValueError("symbol is not finite on the quadrature grid")
    wgt = (wr[:, None] * weta[None, :])[..., None, None] * wth * wth
    C = np.einsum("retu,nmreu->nmret", f * wgt, B)
    full = np.einsum("pqret,nmret->pqnm", A, C)  # W(phi_p, phi_q) plane 1, W(phi_n, phi_m) plane 2
    dim = basis.dimension
    M = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        m1, m2 = basis.n1[i], basis.n2[i]
        M[i, :] = full[basis.n1, m1, basis.n2, m2]
    return sp.csr_matrix(M)


# ---------------------------------------------------------------------------


def assemble_weyl_matrix(f, basis: HermiteBasis2D | int, method: str = "polar-selection",
                         orders: tuple[int, int] | None = None, n_theta: int = 16,
                         check_convergence: bool | None = None, tol: float = 1e-8,
                         harmonic_tol: float = 1e-14) -> OperatorMatrix:
    """Matrix of Op^w(f) over ``basis``.

    ``method`` is ``"polar-selection"`` (default) or ``"direct-quadrature"``
    (brute-force oracle, intended for N <= 6).  With ``check_convergence``
    the polar rule is repeated with doubled radial and angular orders and a
    :class:`QuadratureError` is raised if any entry moves by more than
    ``tol``.  By default the check runs for N <= 60.
    """
    f = as_symbol(f)
    if f.time_dependent:
        raise ValueError("assemble_weyl_matrix needs a time-independent symbol")
    if isinstance(basis, int):
        basis = HermiteBasis2D(basis)
    N = basis.N
    fn = _vector_fn(f)
    if method == "direct-quadrature":
        q_r, q_eta = orders or (N + 6, 2 * N + 24)
        mat = _direct_assembly(fn, basis, q_r, q_eta, max(n_theta, 2 * N + 8))
        meta = {"method": method, "orders": {"radial": q_r, "polar": q_eta,
                                             "angular": max(n_theta, 2 * N + 8)}}
    elif method == "polar-selection":
        q_s, q_u = orders or (N // 2 + 8, N // 2 + 8)
        while True:
            mat, meta = _polar_assembly(fn, basis, q_s, q_u, n_theta, harmonic_tol)
            if meta["alias_level"] <= harmonic_tol or n_theta >= 128:
                break
            n_theta *= 2
        if check_convergence is None:
            check_convergence = N <= 60
        if check_convergence:
            ref, _ = _polar_assembly(fn, basis, 2 * q_s, 2 * q_u, 2 * n_theta, harmonic_tol)
            change = float(np.max(np.abs((ref - mat).data), initial=0.0))
            if change > tol:
                raise QuadratureError(f"Weyl matrix entries moved by {change:.2e} when orders doubled")
            meta["doubling_change"] = change
        meta.update({"method": method, "orders": {"S": q_s, "u": q_u, "angular": n_theta}})
    else:
        raise ValueError(f"unknown assembly method {method!r}")
    mat.eliminate_zeros()
    op = OperatorMatrix(mat, basis, hermitian=False, metadata=meta)
    op.hermitian = op.hermiticity_defect() <= 1e-10
    meta["symbol"] = f.text()
    return op


def _vector_fn(f):
    def fn(x1, x2, xi1, xi2):
        x1, x2, xi1, xi2 = np.broadcast_arrays(x1, x2, xi1, xi2)
        return f(np.stack([x1, x2, xi1, xi2], axis=-1))

    return fn


# ---------------------------------------------------------------------------
# ladder-operator matrices (independent of quadrature)


def position_momentum_matrices(basis: HermiteBasis2D) -> dict[str, sp.csr_matrix]:
    """x1, x2, xi1, xi2 from ladder operators: x = (a + a^+)/sqrt2, xi = (a - a^+)/(i sqrt2)."""
    dim = basis.dimension
    out = {}
    for plane, (nx, other) in enumerate(((basis.n1, basis.n2), (basis.n2, basis.n1))):
        # lowering operator a: |n> -> sqrt(n) |n-1>
        lower_n = nx - 1
        tgt = basis.indices(lower_n, other) if plane == 0 else basis.indices(other, lower_n)
        ok = tgt >= 0
        a = sp.csr_matrix((np.sqrt(nx[ok]).astype(complex), (tgt[ok], np.flatnonzero(ok))),
                          shape=(dim, dim))
        ad = a.conj().T.tocsr()
        name = "x1" if plane == 0 else "x2"
        out[name] = ((a + ad) / math.sqrt(2.0)).tocsr()
        out["xi" + name[1]] = ((a - ad) / (1j * math.sqrt(2.0))).tocsr()
    return out


def ladder_dilation(basis: HermiteBasis2D, coefficient: float = -1.0) -> OperatorMatrix:
    """Op^w(coefficient * x1 * xi1) = coefficient * (a^2 - a^+^2) / (2i), exactly."""
    # Products of truncated x and xi would corrupt the top band, so a^2 is
    # built directly.
    dim = basis.dimension
    n1, n2 = basis.n1, basis.n2
    tgt = basis.indices(n1 - 2, n2)
    ok = tgt >= 0
    a2 = sp.csr_matrix((np.sqrt(n1[ok] * (n1[ok] - 1.0)).astype(complex), (tgt[ok], np.flatnonzero(ok))),
                       shape=(dim, dim))
    mat = coefficient * (a2 - a2.conj().T) / 2j
    return OperatorMatrix(mat.tocsr(), basis, True, {"method": "ladder", "symbol": f"{coefficient}*x1*xi1"})
