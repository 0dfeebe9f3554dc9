import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from she_moments.correlations import (
    CorrelationQuery,
    bc_lebesgue_discrepancy,
    bc_lebesgue_integral,
    heat_overlap_integral,
    log_two_point_lebesgue,
    two_point_bounds,
    two_point_delta,
    two_point_exact,
    two_point_lebesgue,
)
from she_moments.measures import Atom, ExpDensity, InitialMeasure, j0
from she_moments.moments import ModeError, ModelParams, second_moment_exact
from she_moments.specialfn import erf, heat_kernel

PAM = ModelParams.pam(1.0, 1.0)
LEB = InitialMeasure.lebesgue()
DELTA = InitialMeasure.delta()

measures = st.sampled_from(
    [
        LEB,
        DELTA,
        InitialMeasure((Atom(0.0, 1.0), Atom(1.0, 0.5))),
        InitialMeasure.exp_density(-0.8),
        InitialMeasure((Atom(0.3, 0.7), ExpDensity(-1.5, 0.4))),
    ]
)
quasi = st.builds(
    ModelParams.quasi_linear, st.floats(0.4, 2), st.floats(0.3, 1.3), st.floats(0, 0.8)
)


def test_query_validation():
    with pytest.raises(ValueError):
        CorrelationQuery(0.0, 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        CorrelationQuery(1.0, 0.0, 0.5, 0.0)
    q = CorrelationQuery(1.0, 0.2, 2.0, -0.3)
    assert q.tbar == 1.5 and q.dist == pytest.approx(0.5)


def test_lebesgue_frozen(frozen):
    q = CorrelationQuery(1.0, 0.0, 1.0, 0.5)
    assert two_point_lebesgue(PAM, q) == pytest.approx(frozen["two_point_lebesgue"], rel=1e-13)
    assert two_point_exact(PAM, LEB, q) == pytest.approx(frozen["two_point_lebesgue"], rel=1e-8)


def test_delta_frozen(frozen):
    q = CorrelationQuery(0.5, 0.2, 0.5, -0.3)
    assert two_point_delta(PAM, q) == pytest.approx(frozen["two_point_delta"], rel=1e-13)
    assert two_point_exact(PAM, DELTA, q) == pytest.approx(frozen["two_point_delta"], rel=1e-8)


def test_small_time_limit():
    q = CorrelationQuery(1e-10, 0.0, 1e-10, 0.3)
    assert two_point_lebesgue(PAM, q) == pytest.approx(1.0, abs=1e-4)
    assert two_point_exact(PAM, LEB, q) == pytest.approx(1.0, abs=1e-4)


def test_delta_closed_form_rejects_unequal_times():
    with pytest.raises(NotImplementedError):
        two_point_delta(PAM, CorrelationQuery(0.5, 0.0, 0.7, 0.0))
    with pytest.raises(ModeError):
        two_point_exact(ModelParams(nu=1.0, lip_upper=1.0), LEB, CorrelationQuery(0.5, 0.0, 0.5, 0.0))


@given(quasi, st.floats(0.05, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_lebesgue_closed_vs_quadrature(p, t, x, y):
    q = CorrelationQuery(t, x, t, y)
    assert two_point_lebesgue(p, q) == pytest.approx(two_point_exact(p, LEB, q), rel=1e-8)


@given(quasi, st.floats(0.05, 2), st.floats(0, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_lebesgue_unequal_times(p, t, gap, x, y):
    q = CorrelationQuery(t, x, t + gap, y)
    assert two_point_lebesgue(p, q) == pytest.approx(two_point_exact(p, LEB, q), rel=1e-8)


@given(quasi, st.floats(0.05, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_delta_closed_vs_quadrature(p, t, x, y):
    q = CorrelationQuery(t, x, t, y)
    assert two_point_delta(p, q) == pytest.approx(two_point_exact(p, DELTA, q), rel=1e-8)


@given(measures, quasi, st.floats(0.05, 1.5), st.floats(-1.5, 1.5))
def test_diagonal_is_second_moment(mu, p, t, x):
    q = CorrelationQuery(t, x, t, x)
    assert two_point_exact(p, mu, q) == pytest.approx(second_moment_exact(p, mu, t, x), rel=1e-8)


@given(measures, quasi, st.floats(0.05, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_symmetry_and_cauchy_schwarz(mu, p, t, x, y):
    q = CorrelationQuery(t, x, t, y)
    c = two_point_exact(p, mu, q)
    assert c == pytest.approx(two_point_exact(p, mu, q.swapped()), rel=1e-9)
    mx = second_moment_exact(p, mu, t, x)
    my = second_moment_exact(p, mu, t, y)
    assert c <= math.sqrt(mx * my) * (1 + 1e-8)
    assert c >= float(j0(mu, p.nu, t, x) * j0(mu, p.nu, t, y)) * (1 - 1e-10)


@given(measures, st.floats(0.4, 2), st.floats(0.3, 1.2), st.floats(0, 0.5), st.floats(0.1, 1.5), st.floats(-1, 1))
def test_bounds_ordering(mu, nu, lam, extra, t, y):
    p = ModelParams(nu=nu, lip_upper=lam * (1 + extra), vbar=0.3, lip_lower=lam, vlow=0.1)
    q = CorrelationQuery(t, 0.0, t, y)
    lo, hi = two_point_bounds(p, mu, q)
    mid = two_point_exact(ModelParams.quasi_linear(nu, lam * (1 + extra / 2), 0.2), mu, q)
    assert lo <= mid * (1 + 1e-9) and mid <= hi * (1 + 1e-9)


def test_bounds_zero_measure():
    p = ModelParams(nu=1.0, lip_upper=1.0, lip_lower=0.5)
    assert two_point_bounds(p, InitialMeasure(()), CorrelationQuery(0.5, 0.0, 0.5, 0.1)) == (0.0, 0.0)
    with pytest.raises(ValueError):
        two_point_bounds(ModelParams(nu=1.0, lip_upper=1.0), LEB, CorrelationQuery(0.5, 0.0, 0.5, 0.1))


@given(st.floats(0.2, 3), st.floats(0.05, 2), st.floats(0, 2), st.floats(0, 2))
def test_heat_overlap_integral(nu, t, gap, d):
    # the space integral of a product of heat kernels is a single heat kernel
    tau = t + gap
    # r = t - u^2 removes the endpoint singularity when tau == t
    f = lambda u: 2 * u * float(heat_kernel(nu, gap + 2 * u * u, d)) if u > 0 or gap > 0 else 0.0
    num = integrate.quad(f, 0.0, math.sqrt(t), epsabs=1e-14, epsrel=1e-11, limit=400)[0]
    assert heat_overlap_integral(nu, t, tau, d) == pytest.approx(num, rel=1e-8, abs=1e-12)


def test_log_two_point_lebesgue():
    q = CorrelationQuery(1.0, 0.0, 1.0, 0.5)
    assert math.exp(log_two_point_lebesgue(PAM, q)) == pytest.approx(two_point_lebesgue(PAM, q) - 1, rel=1e-12)
    far = CorrelationQuery(400.0, 0.0, 400.0, 3.0)
    assert math.isfinite(log_two_point_lebesgue(PAM, far))


def test_bc_discrepancy(frozen):
    assert bc_lebesgue_discrepancy(1.0, 1.0, 0.0) == pytest.approx(0.0, abs=1e-10)
    assert bc_lebesgue_discrepancy(1.0, 1.0, 1.0) == pytest.approx(frozen["bc_discrepancy_unit"], rel=1e-9)
    assert bc_lebesgue_discrepancy(1.0, 1e-4, 1.0) == pytest.approx(-1.0, abs=1e-9)
    for nu, t, dx in [(0.5, 2.0, 0.3), (2.0, 0.7, -1.2)]:
        bc_lebesgue_discrepancy(nu, t, dx, check=True, tol=1e-9)
    with pytest.raises(ValueError):
        bc_lebesgue_integral(1.0, 0.0, 1.0)


def test_unequal_times_not_equal_time_formula():
    # the equal-time bracket evaluated at the mean time overshoots when tau > t
    q = CorrelationQuery(1.0, 0.0, 2.0, 0.5)
    exact = two_point_exact(PAM, LEB, q)
    naive = 1.0 + math.exp(log_two_point_lebesgue(PAM, q))
    assert naive > exact * (1 + 1e-3)
    assert two_point_lebesgue(PAM, q) == pytest.approx(exact, rel=1e-9)
