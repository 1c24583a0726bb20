import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sobolev_escape.escape import (EscapeConfig, EscapeError, MourreSpec, bump, escape_interval, extend_escape,
                                   flow_derivative, global_escape, gluing_eta, hamiltonian_step, k_symbol,
                                   local_escape, ramp, ramp_derivative, ramp_saturation, verify_escape,
                                   verify_mourre_symbol)
from sobolev_escape.flow import InvariantSet, ShellGeometry, integrate_batch, tube_samples
from sobolev_escape.flow.trajectory import ProjectedFlow
from sobolev_escape.symbols import parse_symbol, poisson_bracket

from conftest import ZETA_MINUS, ZETA_PLUS

DILATION = parse_symbol("-x1*xi1")


@pytest.fixture(scope="module")
def sample_pts(shell_sample):
    return shell_sample.points[::5]  # 400 points


def tube_points(escape_fn, sign, radius_factor=0.9):
    members = escape_fn.report.attractors if sign > 0 else escape_fn.report.repellors
    r = escape_fn.m.r_plus if sign > 0 else escape_fn.m.r_minus
    return tube_samples(escape_fn.geom, members, radius_factor * r, 0.5, n_radial=3, n_angle=8)


def flow_projected(geom, zeta, tau):
    flow = ProjectedFlow(geom, geom.value(zeta))
    return integrate_batch(flow.rhs, zeta, tau, project=flow.project).y


# --- ramp -------------------------------------------------------------------------------------


def test_ramp_profile():
    eps = 0.05
    assert ramp(-eps, eps) == 0 and ramp(-np.inf, eps) == 0
    assert ramp(ramp_saturation(eps), eps) == 1 and ramp(np.inf, eps) == 1
    mid = np.linspace(eps, 1 / eps - eps, 50)
    assert np.allclose(np.diff(ramp(mid, eps)) / np.diff(mid), eps, rtol=1e-10)
    assert np.max(ramp_derivative(np.linspace(-1, 25, 10001), eps)) <= eps + 1e-15


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 30), st.floats(1e-4, 0.5), st.sampled_from([0.01, 0.05, 0.1, 0.2]))
def test_ramp_monotone_and_derivative_consistent(tau, step, eps):
    a, b = ramp(tau, eps), ramp(tau + step, eps)
    assert 0 <= a <= b <= 1
    h = 1e-6
    fd = (ramp(tau + h, eps) - ramp(tau - h, eps)) / (2 * h)
    assert fd == pytest.approx(float(ramp_derivative(tau, eps)), abs=1e-6)


@pytest.mark.parametrize("eps", [0.01, 0.05, 0.2])
def test_ramp_continuous_at_corners(eps):
    for c in (-eps, eps, 1 / eps - eps, 1 / eps + eps):
        assert abs(ramp(c + 1e-12, eps) - ramp(c - 1e-12, eps)) <= 1e-10


def test_bump_profile():
    assert bump(0.0, 0.1) == 1 and bump(0.1, 0.1) == 1 and bump(0.2, 0.1) == 0
    d = np.linspace(0, 0.3, 301)
    assert np.all(np.diff(bump(d, 0.1)) <= 0)


def test_config_validation():
    with pytest.raises(ValueError):
        EscapeConfig(eps=0.0)
    with pytest.raises(ValueError):
        EscapeConfig(eps=0.3)
    with pytest.raises(ValueError):
        EscapeConfig(cutoff_inner=1.0, cutoff_outer=0.5)
    cfg = EscapeConfig()
    assert cfg.cutoff(0.2) == 1 and cfg.cutoff(1.0) == 0
    assert cfg.hitting_offset == -cfg.eps


# --- local escape -------------------------------------------------------------------------------


def test_local_escape_on_gamma_plus(hstar, report):
    # k+ = h0 = 2 at rho = 2; the bracket is degree 0 and equals 1 on the ray
    k, br = local_escape(hstar, EscapeConfig(), 2 * ZETA_PLUS, +1, report=report)
    assert k[0] == pytest.approx(2.0, abs=1e-14)
    assert br[0] == pytest.approx(1.0, abs=1e-12)
    _, exact = local_escape(hstar, EscapeConfig(), 2 * ZETA_PLUS, +1, check="exact")
    assert exact[0] == pytest.approx(1.0, abs=1e-12)


def test_local_escape_divergence_matches_exact_bracket(hstar, escape_fn):
    for sign in (1, -1):
        z = 1.7 * tube_points(escape_fn, sign)
        _, div = local_escape(hstar, EscapeConfig(), z, sign)
        _, exact = local_escape(hstar, EscapeConfig(), z, sign, check="exact")
        assert np.max(np.abs(div - exact)) <= 1e-10
        assert np.all(div > 0)


def test_local_escape_density_scaling(hstar):
    z = 3 * ZETA_MINUS + np.array([0, 0.05, 0, 0.02])
    k1, b1 = local_escape(hstar, EscapeConfig(), z, -1)
    k2, b2 = local_escape(hstar, EscapeConfig(f_tilde="2"), z, -1)
    assert k2[0] == pytest.approx(k1[0] / 2) and k1[0] < 0
    assert b1[0] > 0 and b2[0] > 0


def test_local_escape_rejects_points_outside_tube(hstar, report):
    with pytest.raises(EscapeError):
        local_escape(hstar, EscapeConfig(), ZETA_MINUS, +1, report=report)


# --- m ----------------------------------------------------------------------------------------------


def test_m_equals_k_bracket_in_tubes(escape_fn, hstar):
    for sign in (1, -1):
        z = tube_points(escape_fn, sign)
        _, br = local_escape(hstar, EscapeConfig(), z, sign)
        assert np.array_equal(escape_fn.m(z), br)


def test_m_lower_bound_and_homogeneity(escape_fn, sample_pts):
    m = escape_fn.m(sample_pts)
    assert np.min(m) >= escape_fn.delta_hat / 2 > 0
    assert np.array_equal(escape_fn.m(3 * sample_pts), m) or np.allclose(escape_fn.m(3 * sample_pts), m,
                                                                          atol=1e-14)


def test_delta_is_minimum_over_components(escape_fn):
    per = escape_fn.info["per_component_delta"]
    assert len(per) == 2
    assert escape_fn.delta_hat == pytest.approx(0.8 * min(p["min_tube_bracket"] for p in per), rel=1e-12)


# --- l+- -------------------------------------------------------------------------------------------


def test_ell_plus_equals_k_inside_tube(escape_fn, hstar):
    z = 2 * tube_points(escape_fn, +1)
    k, _ = local_escape(hstar, EscapeConfig(), z, +1)
    assert np.allclose(escape_fn.ell(z, +1), k, rtol=1e-13)


def test_ell_independent_of_stopping_time(escape_fn, sample_pts):
    z = sample_pts[:100]
    a = escape_fn.ell(z, +1)
    b = escape_fn.ell(z, +1, extra_time=1.0)
    assert np.max(np.abs(a - b)) <= 1e-6
    c = escape_fn.ell(z, -1)
    d = escape_fn.ell(z, -1, extra_time=1.0)
    assert np.max(np.abs(c - d)) <= 1e-6


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_ell_degree_two(escape_fn, sample_pts, lam):
    z = 1.5 * sample_pts[:40]
    for sign in (1, -1):
        assert np.allclose(escape_fn.ell(lam * z, sign), lam**2 * escape_fn.ell(z, sign), rtol=1e-8)


def test_ell_derivative_along_flow_is_m(geom, report, sample_pts):
    # at the default tolerance 1e-10 the difference quotient amplifies
    # integration noise to ~3e-5; the identity itself needs the tighter run
    fine = global_escape(geom, EscapeConfig(tol=1e-12), report, seed=0)
    z = 2.0 * sample_pts[:40]
    for sign in (1, -1):
        d = flow_derivative(geom, lambda p: fine.ell(p, sign), z, 1e-3)
        assert np.max(np.abs(d - fine.m(z))) <= 1e-5


def test_extend_escape_wrapper(escape_fn, hstar, report, sample_pts):
    z = sample_pts[:5]
    assert np.array_equal(extend_escape(hstar, EscapeConfig(), z, +1, report, escape=escape_fn),
                          escape_fn.ell(z, +1))


# --- eta ------------------------------------------------------------------------------------------


def saturated_points(escape_fn):
    """Points of the U+ tube flowed forward past the ramp saturation time, so t_hit >= 1/eps + eps."""
    start = tube_points(escape_fn, +1)
    return flow_projected(escape_fn.geom, start, ramp_saturation(escape_fn.cfg.eps) + 2.0)


def test_eta_on_tubes(escape_fn, hstar, report):
    assert np.all(escape_fn.eta(np.array([ZETA_PLUS, -ZETA_PLUS])) == 1.0)
    assert np.all(escape_fn.eta(3 * saturated_points(escape_fn)) == 1.0)
    assert np.all(escape_fn.eta(3 * tube_points(escape_fn, -1)) == 0.0)
    assert np.all(gluing_eta(hstar, EscapeConfig(), ZETA_MINUS, report, escape=escape_fn) == 0.0)


def test_eta_below_one_on_outer_attractor_tube(escape_fn):
    # W+ = {eta = 1} is much thinner than the U+ tube
    ring = tube_points(escape_fn, +1)
    ring = ring[InvariantSet(escape_fn.geom, escape_fn.report.attractors, 0.5).distance(ring) > 1e-6]
    assert np.all(escape_fn.eta(ring) < 1.0)


def test_eta_bounds_and_slope(escape_fn, sample_pts):
    eta = escape_fn.eta(sample_pts)
    assert np.all((0 <= eta) & (eta <= 1))
    tau = 0.2
    moved = flow_projected(escape_fn.geom, sample_pts, tau)
    rate = (escape_fn.eta(moved) - eta) / tau
    assert np.all(rate >= -1e-12)
    assert np.max(rate) <= escape_fn.cfg.eps + 1e-9


def test_eta_monotone_along_one_orbit(escape_fn):
    start = (ZETA_MINUS + np.array([0, 0.12, 0, 0.07]))[None]
    start = escape_fn.geom.project_to_level(start, 0.5)[0]
    taus = np.linspace(0, 10, 21)
    pts = flow_projected(escape_fn.geom, np.repeat(start, len(taus), axis=0), taus)
    values = escape_fn.eta(pts)
    assert np.all(np.diff(values) >= -1e-12)
    assert values[-1] > values[0]


# --- the glued function ---------------------------------------------------------------------------


def test_a_equals_cutoff_times_ell_plus_on_attractor_tube(escape_fn):
    z = 0.6 * saturated_points(escape_fn)
    chi = escape_fn.cfg.cutoff(0.6)
    assert np.allclose(escape_fn(z), (1 - chi) * escape_fn.ell(z, +1), rtol=1e-12)


def test_a_degree_two_outside_unit_ball(escape_fn, sample_pts):
    z = 1.3 * sample_pts[:100]
    assert np.allclose(escape_fn(2 * z), 4 * escape_fn(z), rtol=1e-9)


def test_a_is_smooth_across_gluing_region(escape_fn):
    # second differences along a curve crossing the ramp stay bounded
    start = (ZETA_MINUS + np.array([0, 0.1, 0, 0.06]))[None]
    start = escape_fn.geom.project_to_level(start, 0.5)[0]
    pts = [start]
    for _ in range(80):
        pts.append(flow_projected(escape_fn.geom, pts[-1], 0.25))
    pts = np.concatenate(pts)
    vals = escape_fn(pts)
    assert np.all(np.isfinite(vals))
    second = np.abs(np.diff(vals, 2)) / 0.25**2
    assert np.max(second) <= 50.0


def test_cache_does_not_change_results(geom, report, sample_pts):
    cached = global_escape(geom, EscapeConfig(), report, seed=0)
    plain = global_escape(geom, EscapeConfig(), report, seed=0, use_cache=False)
    z = 1.4 * sample_pts[:60]
    assert np.array_equal(cached(z), plain(z))
    assert np.array_equal(cached(z), cached(z))


def test_build_is_deterministic(geom, report, sample_pts, escape_fn):
    first = global_escape(geom, EscapeConfig(), report, seed=0)
    again = global_escape(geom, EscapeConfig(), report, seed=0)
    assert again.delta_hat == first.delta_hat == escape_fn.delta_hat
    assert np.array_equal(again(sample_pts[:30]), first(sample_pts[:30]))
    # other batch splits agree up to vectorised rounding
    single = np.concatenate([again.__class__(geom, again.cfg, report, again.m, again.info)(p[None])
                             for p in sample_pts[:10]])
    assert np.allclose(single, first(sample_pts[:10]), rtol=1e-11, atol=0)


def test_escape_requires_simple_structure(geom, report):
    from dataclasses import replace
    with pytest.raises(EscapeError):
        global_escape(geom, EscapeConfig(), replace(report, verdict="inconclusive"))


# --- verification ------------------------------------------------------------------------------------


def test_hamiltonian_step_conserves_energy(geom, sample_pts):
    z = 2 * sample_pts[:50]
    moved = hamiltonian_step(geom, z, 1e-2)
    assert np.max(np.abs(geom.value(moved) - geom.value(z))) <= 1e-12


def test_pipeline_verifies(geom, escape_fn):
    ver = verify_escape(geom, escape_fn, n_samples=1000, seed=3)
    assert ver.passed
    assert ver.min_bracket >= escape_fn.delta_hat / 2 > 0
    assert ver.n_excluded == 0


def test_fd_bracket_matches_decomposed_route(geom, escape_fn, sample_pts):
    z = sample_pts[:200]
    fd = flow_derivative(geom, escape_fn, z, 1e-3)
    assert np.max(np.abs(fd - escape_fn.bracket(z))) <= 1e-4


def test_fd_bracket_matches_exact_bracket_in_tubes(geom, escape_fn, hstar):
    for sign in (1, -1):
        z = 1.5 * (saturated_points(escape_fn) if sign > 0 else tube_points(escape_fn, sign, 0.5))
        exact = poisson_bracket(hstar, k_symbol(EscapeConfig(), sign))(z)
        fd = flow_derivative(geom, escape_fn, z, 1e-3)
        assert np.max(np.abs(fd - exact)) <= 1e-6


@pytest.mark.parametrize("omega", [0.3, 0.5, 0.7])
def test_closed_form_escape_bound(geom, omega):
    ver = verify_escape(geom, DILATION, n_samples=2000, level=omega, method="exact", threshold=0.0)
    assert ver.min_bracket >= 2 * omega * (1 - omega) - 1e-8
    fd = verify_escape(geom, DILATION, n_samples=300, level=omega, method="fd", threshold=0.0)
    assert fd.min_bracket == pytest.approx(2 * omega * (1 - omega), abs=1e-5)


def test_zero_escape_fails(geom):
    ver = verify_escape(geom, parse_symbol("0"), n_samples=200, level=0.5)
    assert ver.min_bracket == 0.0 and not ver.passed


def test_closed_form_interval(geom):
    iv = escape_interval(geom, DILATION, 0.5, threshold=0.42, n_samples=500, method="exact")
    assert iv.lo <= 0.3 + 1e-9 and iv.hi >= 0.7 - 1e-9
    tighter = escape_interval(geom, DILATION, 0.5, threshold=0.48, n_samples=500, method="exact")
    assert iv.lo <= tighter.lo and tighter.hi <= iv.hi
    assert tighter.width < iv.width


def test_level_near_one_fails(geom):
    ver = verify_escape(geom, DILATION, n_samples=500, level=0.97, method="exact", threshold=0.42)
    assert not ver.passed


# --- Mourre symbol check -------------------------------------------------------------------------------


@pytest.mark.slow
def test_mourre_symbol_passes(hstar):
    res = verify_mourre_symbol(hstar, DILATION, MourreSpec(0.4, 0.6, 0.4), n_samples=1500)
    assert res.passed and res.margin >= -1e-9


def test_mourre_symbol_fails_above_bracket_max(hstar):
    res = verify_mourre_symbol(hstar, DILATION, MourreSpec(0.4, 0.6, 1.1), n_samples=500)
    assert not res.passed


def test_mourre_symbol_detects_interval_outside_range(hstar):
    res = verify_mourre_symbol(hstar, DILATION, MourreSpec(0.9, 1.2, 0.4), n_samples=500)
    assert not res.passed
    assert res.witness is not None
