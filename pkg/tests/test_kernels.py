import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from she_moments.convolution import convolve_l0
from she_moments.kernels import (
    KernelContext,
    b_n,
    h_fn,
    kernel_k,
    kernel_series,
    l0,
    ln_kernel,
    log_h_fn,
    log_kernel_k,
    time_overlap,
)
from she_moments.quadrature import QuadConfig, integrate_adaptive, integrate_sqrt_singular
from she_moments.specialfn import heat_kernel

nus = st.floats(0.1, 5)
lams = st.floats(0.1, 2.5)
times = st.floats(0.01, 5)
xs = st.floats(-4, 4)

UNIT = KernelContext(1.0, 1.0)


def test_context():
    ctx = KernelContext(0.7, 1.3)
    assert ctx.b == pytest.approx(1.3**2 / math.sqrt(4 * math.pi * 0.7), rel=1e-15)
    with pytest.raises(ValueError):
        KernelContext(0.0, 1.0)


def test_l0_examples(frozen):
    assert l0(KernelContext(1.0, 0.0), 0.5, 0.1) == 0.0
    assert l0(UNIT, 1.0, 0.0) == pytest.approx(1 / (2 * math.pi), rel=1e-15)
    assert l0(UNIT, 1.0, 0.0) == pytest.approx(frozen["l0_unit"], rel=1e-15)
    assert l0(UNIT, 0.0, 0.0) == 0.0


@given(nus, lams, times, xs)
def test_l0_is_lam2_heat_squared(nu, lam, t, x):
    ctx = KernelContext(nu, lam)
    assert l0(ctx, t, x) == pytest.approx(lam**2 * heat_kernel(nu, t, x) ** 2, rel=1e-12, abs=1e-300)


def test_ln_examples(frozen):
    assert ln_kernel(UNIT, 0, 0.7, 0.2) == pytest.approx(l0(UNIT, 0.7, 0.2), rel=1e-14)
    assert ln_kernel(UNIT, 1, 0.5, 0.3) == pytest.approx(frozen["l1_quadrature"], rel=1e-9)
    ratios = [b_n(UNIT, n, 1.0) / b_n(UNIT, n - 1, 1.0) for n in (10, 50, 200)]
    assert ratios[0] > ratios[1] > ratios[2] and ratios[2] < 0.1


def test_l1_by_space_time_quadrature():
    ctx = UNIT
    got = convolve_l0(lambda s, y: l0(ctx, s, y), ctx, 0.5, 0.3, lambda s: [(0.0, math.sqrt(s / 2))])
    assert got == pytest.approx(ln_kernel(ctx, 1, 0.5, 0.3), rel=1e-8)


@given(nus, lams, st.integers(0, 60), times, xs)
def test_ln_factorization(nu, lam, n, t, x):
    ctx = KernelContext(nu, lam)
    assert ln_kernel(ctx, n, t, x) == pytest.approx(l0(ctx, t, x) * b_n(ctx, n, t), rel=1e-11, abs=1e-300)


def test_k_examples(frozen):
    assert kernel_k(KernelContext(1.0, 0.0), 1.0, 0.3) == 0.0
    s = kernel_series(UNIT, 1.0, 0.5)
    assert abs(s.value - kernel_k(UNIT, 1.0, 0.5)) / kernel_k(UNIT, 1.0, 0.5) <= 1e-10
    assert kernel_k(UNIT, 1.0, 0.5) == pytest.approx(frozen["k_closed"], rel=1e-13)
    partial = sum(ln_kernel(UNIT, n, 1.0, 0.5) for n in range(41))
    assert partial == pytest.approx(frozen["k_series_40"], rel=1e-13)


def test_k_convolution_identity():
    got = convolve_l0(lambda s, y: kernel_k(UNIT, s, y), UNIT, 0.8, 0.0, lambda s: [(0.0, math.sqrt(s / 2))])
    want = kernel_k(UNIT, 0.8, 0.0) - l0(UNIT, 0.8, 0.0)
    assert abs(got - want) / kernel_k(UNIT, 0.8, 0.0) <= 1e-6


@given(nus, lams, times, xs)
def test_k_series_matches_closed_form(nu, lam, t, x):
    ctx = KernelContext(nu, lam)
    s = kernel_series(ctx, t, x)
    k = kernel_k(ctx, t, x)
    if k > 1e-290:
        assert abs(s.value - k) <= 1e-10 * k
    # the number of terms tracks b sqrt(pi t); 200 suffices up to lam^4 t / nu ~ 100
    if lam**4 * t / nu <= 100:
        assert s.terms <= 200


@given(nus, lams, times, xs, xs)
def test_k_over_gaussian_independent_of_x(nu, lam, t, x, y):
    ctx = KernelContext(nu, lam)
    a = log_kernel_k(ctx, t, x) - math.log(heat_kernel(nu / 2, t, x)) if heat_kernel(nu / 2, t, x) > 0 else None
    b = log_kernel_k(ctx, t, y) - math.log(heat_kernel(nu / 2, t, y)) if heat_kernel(nu / 2, t, y) > 0 else None
    if a is not None and b is not None:
        assert a == pytest.approx(b, rel=1e-10, abs=1e-10)
    # the H + 1 form of the time factor
    g = heat_kernel(nu / 2, t, x)
    want = g * (lam**2 / math.sqrt(4 * math.pi * nu * t) + lam**4 / (4 * nu) * (h_fn(ctx, t) + 1))
    assert kernel_k(ctx, t, x) == pytest.approx(want, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_root_series_converges(m, t):
    ctx = UNIT
    terms = np.array([b_n(ctx, n, t) ** (1 / m) for n in range(260)])
    partial = np.cumsum(terms)
    assert np.all(np.isfinite(partial))
    assert np.max(terms[200:]) <= 1e-12 * partial[-1]


def test_h_examples(frozen):
    assert h_fn(UNIT, 0.0) == 0.0
    assert h_fn(UNIT, 1.0) == pytest.approx(frozen["h_closed"], rel=1e-14)
    assert frozen["h_quadrature"] == pytest.approx(frozen["h_closed"], rel=1e-15)

    cfg = QuadConfig(rel_tol=1e-11, abs_tol=0.0)

    def space_integral(s):
        out = []
        for si in np.atleast_1d(s):
            sd = math.sqrt(si / 2)
            bps = [k * sd for k in (-8, -2, -0.5, 0, 0.5, 2, 8)]
            out.append(integrate_adaptive(lambda y: kernel_k(UNIT, si, y), -14 * sd, 14 * sd, cfg, breakpoints=bps)[0])
        return np.array(out)

    assert integrate_sqrt_singular(space_integral, 1.0, cfg) == pytest.approx(h_fn(UNIT, 1.0), abs=1e-8)


def test_h_log_slope():
    t = np.array([150.0, 200.0, 300.0])
    lg = np.log1p(np.exp(-log_h_fn(UNIT, t))) + log_h_fn(UNIT, t)
    assert np.all(np.isfinite(lg))
    # log(H + 1)/t = rate + log(2 Phi(.))/t: the log 2 / t offset is 1.4% at t = 200
    assert lg[1] / 200.0 == pytest.approx(0.25 + math.log(2.0) / 200.0, rel=1e-12)
    assert lg[2] / 300.0 == pytest.approx(0.25, rel=0.01)
    assert (lg[1] - lg[0]) / 50.0 == pytest.approx(0.25, rel=1e-6)


@given(nus, lams, times, times)
def test_h_nondecreasing(nu, lam, t1, t2):
    ctx = KernelContext(nu, lam)
    lo, hi = sorted((t1, t2))
    assert h_fn(ctx, lo) <= h_fn(ctx, hi) * (1 + 1e-14)


@given(nus, lams, st.floats(0.01, 40))
def test_log_h_consistent(nu, lam, t):
    ctx = KernelContext(nu, lam)
    h = h_fn(ctx, t)
    if 1e-300 < h < 1e300:
        assert math.exp(log_h_fn(ctx, t)) == pytest.approx(h, rel=1e-11)


@given(nus, lams, times, st.floats(0, 4))
def test_time_overlap_closed_form(nu, lam, t, d):
    # T(t, d) = int_0^t G_{2nu}(s, d) k(t - s) ds
    ctx = KernelContext(nu, lam)
    cfg = QuadConfig(rel_tol=1e-10, abs_tol=0.0)
    from she_moments.kernels import time_factor
    from she_moments.quadrature import integrate_endpoint_singular

    f = lambda s: heat_kernel(2 * nu, s, d) * time_factor(ctx, t - s)
    got = integrate_endpoint_singular(f, 0.0, t, cfg)
    want = time_overlap(ctx, t, d)
    assert got == pytest.approx(want, rel=1e-7, abs=1e-300)
