import math
import warnings

import numpy as np
import pytest

from sobolev_escape.quantum import (HermiteBasis2D, QuantumState, assemble_weyl_matrix, coherent_state,
                                    egorov_residual, evolve, growth_report, ladder_dilation,
                                    matrix_mourre_check, mourre_matrices, position_momentum_matrices,
                                    random_low_energy_state, sobolev_norm, split_step_floquet)
from sobolev_escape.symbols import h0_symbol, parse_symbol, resonant_average
from sobolev_escape.window import MourreSpec

from conftest import Z_STAR


@pytest.fixture(scope="module")
def basis6():
    return HermiteBasis2D(6)


# --- basis ---------------------------------------------------------------------------


def test_basis_ordering(basis6):
    assert basis6.dimension == 28
    for k in range(7):
        assert np.all(basis6.degree[: (k + 1) * (k + 2) // 2] <= k)
    assert basis6.index(2, 3) == int(np.flatnonzero((basis6.n1 == 2) & (basis6.n2 == 3))[0])
    with pytest.raises(IndexError):
        basis6.index(5, 5)
    assert HermiteBasis2D(120).dimension == 7381


# --- assembly oracles ---------------------------------------------------------------------


def test_h0_quantizes_to_diagonal(basis6):
    M = assemble_weyl_matrix(h0_symbol(), basis6).dense()
    assert np.max(np.abs(M - np.diag(basis6.energies()))) <= 1e-10


def ladder_x1_squared(basis):
    """x1^2 = (a^2 + a^+^2 + 2 a^+ a + 1)/2 in the first plane, identity in the second."""
    M = np.zeros((basis.dimension, basis.dimension))
    for i, (n1, n2) in enumerate(zip(basis.n1, basis.n2)):
        M[i, i] = n1 + 0.5
        j = basis.indices(n1 + 2, n2)
        if j >= 0:
            M[i, j] = M[j, i] = math.sqrt((n1 + 1) * (n1 + 2)) / 2
    return M


def test_x1_squared_matches_ladder_formula(basis6):
    M = assemble_weyl_matrix(parse_symbol("x1^2"), basis6).dense()
    assert np.max(np.abs(M - ladder_x1_squared(basis6))) <= 1e-10


def test_position_matrices_square_to_ladder_formula():
    big = HermiteBasis2D(8)
    X = position_momentum_matrices(big)["x1"].toarray()
    inner = big.degree <= 6
    assert np.max(np.abs((X @ X)[np.ix_(inner, inner)] - ladder_x1_squared(big)[np.ix_(inner, inner)])) <= 1e-12


def test_ladder_dilation_matches_quadrature(basis6):
    A = ladder_dilation(basis6).dense()
    Q = assemble_weyl_matrix(parse_symbol("-x1*xi1"), basis6).dense()
    assert np.max(np.abs(A - Q)) <= 1e-10


@pytest.mark.parametrize("text", ["x1^2/(2*h0)", "x1^2", "(x1^2 + xi1^2)/(4*h0)", "x2*xi1/(2*h0) + x1"])
def test_polar_selection_matches_direct_quadrature(basis6, text):
    f = parse_symbol(text)
    polar = assemble_weyl_matrix(f, basis6).dense()
    direct = assemble_weyl_matrix(f, basis6, method="direct-quadrature").dense()
    assert np.max(np.abs(polar - direct)) <= 1e-8


def test_averaged_symbol_quantizes_like_closed_form(basis6, hstar):
    avg = resonant_average(hstar)
    closed = parse_symbol("(x1^2 + xi1^2)/(4*h0)")
    z = np.random.default_rng(0).normal(size=(20, 4))
    assert np.allclose(avg(z), closed(z), atol=1e-12)
    assert np.max(np.abs(assemble_weyl_matrix(closed, basis6).dense()
                         - assemble_weyl_matrix(closed, basis6, method="direct-quadrature").dense())) <= 1e-8


def test_hstar_selection_rules(basis6, hstar):
    M = assemble_weyl_matrix(hstar, basis6, method="direct-quadrature").dense()
    dm1 = np.abs(basis6.n1[:, None] - basis6.n1[None, :])
    allowed = (basis6.n2[:, None] == basis6.n2[None, :]) & np.isin(dm1, [0, 2])
    assert np.max(np.abs(M[~allowed])) <= 1e-10
    assert np.max(np.abs(M[allowed])) > 0.1


@pytest.mark.parametrize("text", ["x1^2/(2*h0)", "x2*xi1/(2*h0)", "sin(x1)*xi2"])
def test_real_symbols_give_hermitian_matrices(text):
    M = assemble_weyl_matrix(parse_symbol(text), HermiteBasis2D(12))
    assert M.hermiticity_defect() <= 1e-10


# --- states ---------------------------------------------------------------------------------


def test_coherent_state_oracles():
    basis = HermiteBasis2D(60)
    z = np.array([1.2, -0.4, 0.7, 0.9])
    u = coherent_state(z, basis)
    assert u.norm(0) == pytest.approx(1.0, abs=1e-12)
    assert u.energy() == pytest.approx(0.5 * z @ z + 1, abs=1e-8)
    ops = position_momentum_matrices(basis)
    for k, name in enumerate(["x1", "x2", "xi1", "xi2"]):
        assert u.expectation(ops[name]).real == pytest.approx(z[k], abs=1e-8)


def test_coherent_state_warns_on_truncation():
    with pytest.warns(RuntimeWarning, match="truncated"):
        coherent_state(Z_STAR * 2, HermiteBasis2D(20))


def test_sobolev_norm_examples(basis6):
    c = np.zeros(basis6.dimension, complex)
    c[basis6.index(2, 1)] = 1
    w = QuantumState(c, basis6)
    assert sobolev_norm(w, 1.5) == pytest.approx(4**1.5)
    u = random_low_energy_state(basis6, 4, seed=3)
    assert sobolev_norm(u, 0) == pytest.approx(np.linalg.norm(u.coefficients))
    shifted = np.zeros_like(u.coefficients)
    shifted[basis6.degree >= 1] = u.coefficients[basis6.degree >= 1]
    v = QuantumState(shifted / np.linalg.norm(shifted), basis6)
    norms = [v.norm(s) for s in np.linspace(0, 3, 13)]
    assert np.all(np.diff(norms) > 0)


def test_random_low_energy_state_support(basis6):
    u = random_low_energy_state(basis6, 3, seed=1)
    assert np.all(u.coefficients[basis6.degree > 3] == 0)
    assert u.norm() == pytest.approx(1.0)


# --- evolution ----------------------------------------------------------------------------------


def test_free_evolution_preserves_all_norms():
    basis = HermiteBasis2D(20)
    M = assemble_weyl_matrix(h0_symbol(), basis)
    u = random_low_energy_state(basis, 6, seed=0)
    for w in evolve(M, u, [0.5, 3.0, 17.0]):
        for s in (0, 0.5, 2):
            assert w.norm(s) == pytest.approx(u.norm(s), rel=1e-12)


def test_unitarity_and_krylov_agreement(hstar):
    basis = HermiteBasis2D(30)
    M = assemble_weyl_matrix(hstar, basis)
    u = coherent_state([1.5, 0, -1.5, 0], basis)
    times = [0.0, 2.0, 7.5]
    eig = evolve(M, u, times)
    kry = evolve(M, u, times, method="krylov")
    for a, b in zip(eig, kry):
        assert abs(a.norm() - 1) <= 1e-9
        assert np.max(np.abs(a.coefficients - b.coefficients)) <= 1e-9


def test_split_step_matches_effective_evolution(hstar):
    basis = HermiteBasis2D(40)
    u0 = coherent_state([1.5, 0, -1.5, 0], basis)
    w_eff = evolve(assemble_weyl_matrix(hstar, basis), u0, [10.0])[0]
    w_lab, record = split_step_floquet(hstar, basis, u0, 10.0, dt=0.05, record_every=20)
    assert np.max(np.abs(w_lab.coefficients - w_eff.coefficients)) <= 1e-6
    # Sobolev norms are frame independent
    for t, c in record:
        w = evolve(assemble_weyl_matrix(hstar, basis), u0, [t])[0]
        assert np.linalg.norm(c) == pytest.approx(1.0, abs=1e-9)
        for s in (0.5, 1.0):
            assert QuantumState(c, basis, t).norm(s) == pytest.approx(w.norm(s), rel=1e-5)


def test_energy_grows_linearly_before_leak(hstar):
    basis = HermiteBasis2D(80)
    u0 = coherent_state(Z_STAR, basis)
    ts = np.linspace(0, 20, 21)
    ws = evolve(assemble_weyl_matrix(hstar, basis), u0, ts)
    E = np.array([w.energy() for w in ws])
    slope = np.polyfit(ts, E, 1)[0]
    assert slope == pytest.approx(1.0, rel=0.1)


# --- growth report --------------------------------------------------------------------------------


def synthetic_states(basis, times, energy_of_t):
    out = []
    for t in times:
        c = np.zeros(basis.dimension, complex)
        c[basis.index(int(round(energy_of_t(t))) - 1, 0)] = 1.0
        out.append(QuantumState(c, basis, t))
    return out


def test_growth_report_recovers_exponent_on_exact_power_law():
    basis = HermiteBasis2D(400)
    times = np.linspace(0, 300, 301)
    # one basis state whose energy is round(1 + t); the norm is (1 + t)^s up to rounding
    rep = growth_report(synthetic_states(basis, times, lambda t: 1 + t), [0.0, 0.5, 1.0], T0=10.0,
                        leak_cap=1e-6)
    assert rep.slopes[0.0] == pytest.approx(0.0, abs=1e-12)
    assert rep.slopes[1.0] == pytest.approx(1.0, abs=0.02)
    assert rep.slopes[0.5] == pytest.approx(0.5, abs=0.01)


def test_growth_report_flags_short_window():
    basis = HermiteBasis2D(30)
    times = np.linspace(0, 40, 81)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = growth_report(synthetic_states(basis, times, lambda t: min(1 + t, 31)), [1.0], T0=5.0)
    assert rep.window_too_short
    assert rep.T_valid < 50


def test_unitary_run_has_zero_s0_slope(hstar):
    basis = HermiteBasis2D(60)
    u0 = coherent_state(Z_STAR, basis)
    ws = evolve(assemble_weyl_matrix(hstar, basis), u0, np.linspace(0, 30, 121))
    rep = growth_report(ws, [0.0], T0=9.0, time_origin=-8.0)
    assert abs(rep.slopes[0.0]) <= 0.02


def test_validity_window_grows_with_truncation(hstar):
    T = []
    for N in (60, 90, 120):
        basis = HermiteBasis2D(N)
        ws = evolve(assemble_weyl_matrix(hstar, basis), coherent_state(Z_STAR, basis), np.linspace(0, 150, 151))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            T.append(growth_report(ws, [1.0], T0=9.0, time_origin=-8.0).T_valid)
    assert T[0] <= T[1] <= T[2]


# --- Egorov and Mourre probes -------------------------------------------------------------------


@pytest.mark.parametrize("t", [0.3, 1.1, 2.9])
def test_egorov_exact_for_linear_symbol(t):
    assert egorov_residual(parse_symbol("x1"), t, 10) <= 1e-12


def test_egorov_invariants():
    assert egorov_residual(h0_symbol(), 0.7, 10) <= 1e-12
    for text in ("x1^2*xi2 + x2", "x1*xi1*x2^2"):
        assert egorov_residual(parse_symbol(text), 2 * np.pi, 10) <= 1e-12
        assert egorov_residual(parse_symbol(text), 0.9, 10) <= 1e-10


def test_egorov_rejects_non_polynomial(hstar):
    with pytest.raises(ValueError):
        egorov_residual(hstar, 0.5, 6)


@pytest.fixture(scope="module")
def mourre_pair(hstar):
    return mourre_matrices(hstar, 80)


def test_matrix_mourre_passes(mourre_pair):
    M, A = mourre_pair
    res = matrix_mourre_check(M, A, MourreSpec(0.4, 0.6, 0.4), E_cut=20)
    assert res.passed and res.margin >= -1e-6


def test_matrix_mourre_fails_above_symbol_bound(mourre_pair):
    M, A = mourre_pair
    res = matrix_mourre_check(M, A, MourreSpec(0.4, 0.6, 0.6), E_cut=20)
    assert not res.passed


def test_matrix_mourre_monotone_in_theta(mourre_pair):
    M, A = mourre_pair
    margins = [matrix_mourre_check(M, A, MourreSpec(0.4, 0.6, th), E_cut=20).margin for th in (0.2, 0.4, 0.6, 0.8)]
    assert np.all(np.diff(margins) <= 1e-12)


def test_matrix_mourre_empty_window_is_vacuous(mourre_pair):
    M, A = mourre_pair
    res = matrix_mourre_check(M, A, MourreSpec(2.0, 3.0, 0.4), E_cut=20)
    assert res.margin == 0.0 and res.passed
