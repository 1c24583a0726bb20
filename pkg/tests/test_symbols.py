import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sobolev_escape.symbols import (SymbolDomainError, SymbolExpr, SymbolSyntaxError, compose_with_flow,
                                    derivative_multi, differentiate, evaluated_equal, gradient, h0_symbol,
                                    h_star, ho_flow, homogenize, parse_symbol, poisson_bracket,
                                    resonant_average, seminorm_estimate, substitute)

from conftest import SQ2, Z_STAR

VARS = ("x1", "x2", "xi1", "xi2")
coord = st.floats(-3, 3, allow_nan=False)
point = st.tuples(coord, coord, coord, coord).filter(lambda p: math.hypot(*p) > 0.3)


def random_points(n, seed=0, lo=0.5, hi=3.0):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(n, 4))
    return p * rng.uniform(lo, hi, (n, 1)) / np.linalg.norm(p, axis=1, keepdims=True)


# --- parsing and evaluation -------------------------------------------------


def test_parse_h_star_matches_closed_form():
    h = parse_symbol("x1^2/(2*h0)")
    z = random_points(50)
    expected = z[:, 0] ** 2 / (np.sum(z**2, axis=1))
    assert np.allclose(h(z), expected, rtol=1e-14)


def test_parse_zero_is_constant():
    f = parse_symbol("0")
    assert np.all(f(random_points(10)) == 0)
    assert f.variables() == set()


@pytest.mark.parametrize("text", ["x1^(1/2)", "x1^0.5", "foo(x1)", "x1 +", "(x1", "x3"])
def test_parse_rejects_bad_input(text):
    with pytest.raises(SymbolSyntaxError):
        parse_symbol(text)


def test_non_integer_exponent_reports_offset():
    with pytest.raises(SymbolSyntaxError, match="byte offset 3"):
        parse_symbol("x1^(1/2)")


def test_evaluation_examples(hstar):
    assert hstar.at((1, 0, 0, 0)) == pytest.approx(1.0, abs=1e-15)
    assert hstar.at(Z_STAR) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(SymbolDomainError):
        hstar.at((0, 0, 0, 0))


@settings(max_examples=60, deadline=None)
@given(point)
def test_text_round_trip(p):
    for text in ["x1^2/(2*h0)", "sin(x1)*exp(-xi2^2) + sqrt(1 + x2^2)", "log(1+h0) - cos(t)*x1*xi1"]:
        f = parse_symbol(text)
        g = parse_symbol(f.text())
        assert g.at(p, 0.7) == pytest.approx(f.at(p, 0.7), rel=1e-12, abs=1e-12)


def test_homogeneity_check_flags(hstar):
    assert hstar.check_homogeneity()
    wrong = SymbolExpr.parse("x1 + xi1^2", 0.0, ("positive", 0.0))
    assert not wrong.check_homogeneity()


# --- derivatives and brackets -----------------------------------------------


def test_derivative_examples(hstar):
    assert differentiate(h0_symbol(), "x1").at((0.3, 1, 2, 3)) == pytest.approx(0.3)
    assert np.all(differentiate(h0_symbol(), "t")(random_points(5)) == 0)
    # finite-difference oracle at step 1e-5
    p = np.array([1.0, 0, 1, 0])
    e = np.array([1e-5, 0, 0, 0])
    fd = (hstar.at(p + e) - hstar.at(p - e)) / 2e-5
    assert differentiate(hstar, "x1").at(p) == pytest.approx(0.5, abs=1e-12)
    assert fd == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("text", ["x1^2/(2*h0)", "sin(x1*xi2) + x2^3", "exp(-h0)*xi1", "(x1 + 2*x2)/sqrt(1 + h0)"])
def test_symbolic_gradient_matches_central_differences(text):
    f = parse_symbol(text)
    z = random_points(40, seed=3)
    grad = np.column_stack([g(z) for g in gradient(f)])
    step = 1e-5
    for i in range(4):
        e = np.zeros(4)
        e[i] = step
        fd = (f(z + e) - f(z - e)) / (2 * step)
        assert np.allclose(grad[:, i], fd, rtol=1e-6, atol=1e-8)


def test_bracket_examples(hstar):
    assert evaluated_equal(poisson_bracket(h0_symbol(), parse_symbol("x1")), parse_symbol("xi1"))
    assert poisson_bracket(h0_symbol(), hstar).at(Z_STAR) == pytest.approx(-1.0, abs=1e-14)
    assert poisson_bracket(hstar, parse_symbol("-x1*xi1")).at((1, 0, 1, 0)) == pytest.approx(1.0, abs=1e-14)


def test_bracket_h0_hstar_closed_form(hstar):
    z = random_points(100, seed=5)
    h0 = np.sum(z**2, axis=1) / 2
    assert np.allclose(poisson_bracket(h0_symbol(), hstar)(z), z[:, 0] * z[:, 2] / h0, rtol=1e-12)


def test_bracket_against_finite_differences(hstar):
    f = parse_symbol("x1*xi2 + sin(x2)")
    z = random_points(30, seed=8)
    gh = np.column_stack([differentiate(hstar, v)(z) for v in VARS])
    gf = np.column_stack([differentiate(f, v)(z) for v in VARS])
    # {h, f} = d_xi h . d_x f - d_x h . d_xi f
    manual = gh[:, 2] * gf[:, 0] + gh[:, 3] * gf[:, 1] - gh[:, 0] * gf[:, 2] - gh[:, 1] * gf[:, 3]
    assert np.allclose(poisson_bracket(hstar, f)(z), manual, rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(point)
def test_bracket_antisymmetry_and_leibniz(p):
    h = parse_symbol("x1^2/(2*h0) + x2*xi1")
    f = parse_symbol("sin(x1) + xi2^2")
    g = parse_symbol("exp(-x2^2)*xi1")
    hf, fh = poisson_bracket(h, f).at(p), poisson_bracket(f, h).at(p)
    assert hf == pytest.approx(-fh, rel=1e-9, abs=1e-12)
    lhs = poisson_bracket(h, f * g).at(p)
    rhs = f.at(p) * poisson_bracket(h, g).at(p) + g.at(p) * poisson_bracket(h, f).at(p)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(point)
def test_degree_zero_symbols_annihilate_radial_field(p):
    # df[grad h0] = df[z] = 0 for positively homogeneous degree-0 f
    for f in (h_star(), homogenize(parse_symbol("x1*xi2 + sin(x2)"))):
        grad = np.array([differentiate(f, v).at(p) for v in VARS])
        assert abs(grad @ np.asarray(p)) <= 1e-9 * (1 + np.linalg.norm(grad))


def test_multi_derivative_order(hstar):
    a = derivative_multi(hstar, (1, 0, 1, 0))
    b = differentiate(differentiate(hstar, "xi1"), "x1")
    assert evaluated_equal(a, b)


# --- harmonic-oscillator flow -----------------------------------------------


def test_ho_flow_examples():
    rng = np.random.default_rng(0)
    p = rng.normal(size=4)
    assert np.allclose(ho_flow(p, 2 * np.pi), p, atol=1e-12)
    assert np.allclose(ho_flow(np.array([1.0, 0, 0, 0]), np.pi / 2), [0, 0, -1, 0], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(point, st.floats(-20, 20))
def test_ho_flow_conserves_h0(p, t):
    p = np.asarray(p)
    q = ho_flow(p, t)
    assert np.dot(q, q) == pytest.approx(np.dot(p, p), rel=1e-12)


def test_compose_with_flow_examples(hstar):
    z = random_points(20)
    moved = compose_with_flow(h0_symbol())
    assert evaluated_equal(moved, h0_symbol())
    x1 = compose_with_flow(parse_symbol("x1"))
    assert np.allclose(x1(z, np.pi), -z[:, 0])
    assert compose_with_flow(hstar).at((1, 0, 0, 0), np.pi / 2) == pytest.approx(0.0, abs=1e-15)


def test_compose_matches_numeric_flow(hstar):
    z = random_points(20, seed=2)
    t = 0.83
    moved = compose_with_flow(hstar)(z, t)
    direct = hstar(np.array([ho_flow(p, t) for p in z]))
    assert np.allclose(moved, direct, rtol=1e-13)


def test_substitute_time():
    f = substitute(compose_with_flow(parse_symbol("x1")), {"t": 0.0})
    assert "t" not in f.variables()
    assert evaluated_equal(f, parse_symbol("x1"))


# --- averaging ----------------------------------------------------------------


def test_average_examples(hstar):
    avg = resonant_average(hstar)
    assert avg.at((1, 0, 0, 0)) == pytest.approx(0.5, abs=1e-14)
    z = random_points(50)
    closed = (z[:, 0] ** 2 + z[:, 2] ** 2) / (2 * np.sum(z**2, axis=1))
    assert np.allclose(avg(z), closed, atol=1e-12)
    coarse = resonant_average(hstar, nodes=16, adaptive=False)
    assert np.allclose(coarse(z), avg(z), atol=1e-12)
    assert np.allclose(resonant_average(parse_symbol("3.5"))(z), 3.5)


def test_average_of_pulled_back_symbol_is_the_symbol():
    v = parse_symbol("x1^2/(2*h0) + 0.2*x2*xi1/h0")
    w = compose_with_flow(v, -1)
    z = random_points(40, seed=11)
    assert np.allclose(resonant_average(w)(z), v(z), atol=1e-10)


@pytest.mark.parametrize("s", [0.3, 1.7, -2.4])
def test_average_commutes_with_flow_pullback(s):
    v = parse_symbol("sin(x1)*xi2 + x2^2")
    moved = substitute(compose_with_flow(v), {"t": s})
    z = random_points(30, seed=4)
    assert np.allclose(resonant_average(moved)(z), resonant_average(v)(z), atol=1e-10)


def test_homogenize_examples(hstar):
    v0 = parse_symbol("x1*xi2 + sin(x2)")
    hv = homogenize(v0)
    z = random_points(40, lo=1.0, hi=4.0)
    assert np.allclose(homogenize(hstar)(z), hstar(z), atol=1e-14)
    for lam in (0.1, 10.0):
        assert np.allclose(hv(lam * z), hv(z), atol=1e-13)
    unit = z / np.linalg.norm(z, axis=1, keepdims=True)
    assert np.allclose(hv(unit), hv(z), atol=1e-14)


# --- seminorms ----------------------------------------------------------------


def test_seminorm_examples(hstar):
    est = seminorm_estimate(hstar, 0, 0.0, 2000, seed=0)
    assert est.value <= 1.0 + 1e-12
    assert est.value == pytest.approx(1.0, abs=1e-3)
    assert seminorm_estimate(parse_symbol("0"), 2, 0.0, 200, seed=0).value == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_average_seminorm_bounded_by_four_times_original(seed):
    rng = np.random.default_rng(seed)
    c = [float(x) for x in rng.normal(size=3)]
    w = parse_symbol(f"({c[0]!r}*x1*xi2 + {c[1]!r}*x2^2 + {c[2]!r}*x1*x2)/(2*h0)")
    avg_w = parse_symbol(f"({c[1]!r}*(x2^2 + xi2^2)/2 + {c[0]!r}*(x1*xi2 - xi1*x2)/2"
                          f" + {c[2]!r}*(x1*x2 + xi1*xi2)/2)/(2*h0)")
    # the closed-form average is checked first, then the seminorm inequality
    z = random_points(30, seed=seed)
    assert np.allclose(resonant_average(w)(z), avg_w(z), atol=1e-12)
    s_w = seminorm_estimate(w, 1, 0.0, 1000, seed=0).value
    s_avg = seminorm_estimate(avg_w, 1, 0.0, 1000, seed=0).value
    assert s_avg <= 4 * s_w
