import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma

from she_moments.quadrature import (
    AccuracyError,
    QuadConfig,
    TruncationError,
    heat_increment_bounds_check,
    integrate_adaptive,
    integrate_gaussian_weighted,
    integrate_sqrt_singular,
)
from she_moments.specialfn import erf, smooth_exp

CFG = QuadConfig(rel_tol=1e-11, abs_tol=0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        QuadConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadConfig(abs_tol=-1.0)


def test_constant():
    val, err = integrate_adaptive(lambda x: np.ones_like(x), 0.0, 1.0)
    assert val == pytest.approx(1.0, rel=1e-15) and err >= 0


def test_exp_over_sqrt():
    a, t = 1.0, 1.0
    want = math.sqrt(math.pi / a) * math.exp(a * t) * erf(math.sqrt(a * t))
    got = integrate_sqrt_singular(lambda s: np.exp(a * (t - s)) / np.sqrt(s), t, CFG)
    assert got == pytest.approx(want, rel=1e-10)


def test_beta_integral():
    t, n = 2.0, 3
    want = t ** (n / 2) * gamma(0.5) * gamma((n + 1) / 2) / gamma((n + 2) / 2)
    got = integrate_sqrt_singular(lambda s: (t - s) ** ((n - 1) / 2) / np.sqrt(s), t, CFG)
    assert got == pytest.approx(want, rel=1e-10)


def test_sqrt_singular_examples(frozen):
    assert integrate_sqrt_singular(lambda s: 1 / np.sqrt(s), 1.0, CFG) == pytest.approx(2.0, rel=1e-13)
    assert integrate_sqrt_singular(lambda s: np.exp(-s) / np.sqrt(s), 1.0, CFG) == pytest.approx(
        frozen["sqrt_weight_exp"], rel=1e-10
    )
    assert frozen["sqrt_weight_exp"] == pytest.approx(math.sqrt(math.pi) * erf(1.0), rel=1e-15)
    # Beta integral with n = 0 on [0, 1] has both ends singular
    from she_moments.quadrature import integrate_endpoint_singular

    got = integrate_endpoint_singular(lambda s: 1 / np.sqrt(s * (1 - s)), 0.0, 1.0, CFG)
    assert got == pytest.approx(math.pi, rel=1e-10)


def test_gaussian_weighted_examples(frozen):
    assert integrate_gaussian_weighted(lambda z: np.ones_like(z), 0.4, 2.0, CFG) == pytest.approx(1.0, rel=1e-12)
    assert integrate_gaussian_weighted(lambda z: z * z, 0.0, 3.0, CFG) == pytest.approx(3.0, rel=1e-12)
    beta, a = 0.8, 1.5
    got = integrate_gaussian_weighted(lambda z: np.exp(beta * np.abs(z)), 0.0, a, CFG, growth_rate=beta)
    assert got == pytest.approx(frozen["gauss_exp_abs"], rel=1e-10)
    assert got == pytest.approx(math.exp(beta**2 * a / 2) * smooth_exp(a, beta, 0.0), rel=1e-10)


def test_gaussian_truncation_flag():
    # growth undeclared: the window edge still carries mass
    with pytest.raises(TruncationError):
        integrate_gaussian_weighted(lambda z: np.exp(40 * np.abs(z)), 0.0, 1.0, CFG)


def test_nonconvergence_raises_with_estimate():
    cfg = QuadConfig(rel_tol=1e-14, abs_tol=0.0, max_subdivisions=3)
    with pytest.raises(AccuracyError) as ei:
        integrate_adaptive(lambda x: np.sin(200 * x) ** 2, 0.0, 10.0, cfg)
    assert math.isfinite(ei.value.estimate)


def test_bad_limits():
    with pytest.raises(ValueError):
        integrate_adaptive(np.sin, 1.0, 0.0)
    assert integrate_adaptive(np.sin, 1.0, 1.0) == (0.0, 0.0)


coef = st.floats(-3, 3)


@given(coef, coef, st.floats(0.1, 4), st.floats(-2, 2))
def test_linearity(alpha, beta, k, c):
    f = lambda x: np.exp(-k * x * x)
    g = lambda x: np.cos(c * x) + x**3
    a, b = -1.5, 2.0
    fa = integrate_adaptive(f, a, b, CFG)[0]
    ga = integrate_adaptive(g, a, b, CFG)[0]
    both = integrate_adaptive(lambda x: alpha * f(x) + beta * g(x), a, b, CFG)[0]
    scale = abs(alpha * fa) + abs(beta * ga) + 1e-300
    assert abs(both - (alpha * fa + beta * ga)) <= 1e-9 * scale


@given(st.floats(0.01, 10), st.floats(-2, 2), st.floats(0.1, 3))
def test_sqrt_singular_is_substitution(t, c, k):
    f = lambda s: np.exp(-k * s) * (1 + c * s) / np.sqrt(s)
    direct = integrate_sqrt_singular(f, t, CFG)
    sub = integrate_adaptive(lambda u: 2 * u * f(u * u), 0.0, math.sqrt(t), CFG)[0]
    assert direct == pytest.approx(sub, rel=1e-10, abs=1e-14)


def test_increment_examples():
    r = heat_increment_bounds_check(1.0, 1.0, 0.5, 0.3, 0.3)
    assert r.space_increment == 0.0
    r = heat_increment_bounds_check(1.0, 1.0, 1.0, 0.3, -0.2)
    assert r.time_increment == 0.0 and r.time_tail == 0.0
    r = heat_increment_bounds_check(1.0, 1.0, 0.0, 0.0, 0.0)
    assert r.time_tail == pytest.approx(1 / math.sqrt(math.pi), rel=1e-9)
    assert r.time_tail_bound == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    assert r.passed


@given(
    st.floats(0.1, 10),
    st.floats(0.01, 5),
    st.floats(0, 1),
    st.floats(-3, 3),
    st.floats(-3, 3),
)
def test_heat_increment_bounds(nu, t, frac, x, y):
    r = heat_increment_bounds_check(nu, t, frac * t, x, y)
    assert r.passed, r
