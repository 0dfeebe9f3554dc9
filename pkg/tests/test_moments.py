import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from she_moments.convolution import renewal_residual
from she_moments.kernels import KernelContext, b_n, h_fn, kernel_k
from she_moments.measures import Atom, ExpDensity, GridDensity, InitialMeasure, j0
from she_moments.mc import MCConfig, RhoSpec, estimate_moment
from she_moments.moments import (
    ModeError,
    ModelParams,
    a_pv,
    delta_prime_divergence_check,
    delta_prime_integrand,
    log_pth_moment_upper,
    log_second_moment_exact,
    lyapunov_bounds,
    picard_partial_sum,
    pth_moment_upper,
    second_moment_exact,
    second_moment_lower,
    z_p_bound,
)

PAM = ModelParams.pam(1.0, 1.0)
LEB = InitialMeasure.lebesgue()
DELTA = InitialMeasure.delta()
TWO_ATOMS = InitialMeasure((Atom(0.0, 1.0), Atom(1.0, 0.5)))

pos_measures = st.sampled_from(
    [
        LEB,
        DELTA,
        TWO_ATOMS,
        InitialMeasure.exp_density(-0.8),
        InitialMeasure((GridDensity((-1.0, 0.0, 1.0), (0.0, 1.0, 0.5)),)),
        InitialMeasure((Atom(0.3, 0.7), ExpDensity(-1.5, 0.4))),
    ]
)
times = st.floats(0.05, 2)
xs = st.floats(-2, 2)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(nu=1.0, lam=1.0, p=3)
    with pytest.raises(ValueError):
        ModelParams(nu=0.0, lam=1.0)
    with pytest.raises(ValueError):
        ModelParams(nu=1.0, lip_upper=1.0, lip_lower=2.0)
    p = ModelParams.quasi_linear(1.0, -1.5, 0.3)
    assert p.lip_upper == p.lip_lower == 1.5 and p.vbar == p.vlow == 0.3 and p.is_quasi_linear


def test_constants():
    assert a_pv(2, 0.5) == 1.0
    assert a_pv(4, 0.0) == math.sqrt(2)
    assert a_pv(4, 0.1) == pytest.approx(2 ** (3 / 4))
    assert all(a_pv(p, 1.0) <= 2 for p in (2, 4, 6, 8, 100))
    assert z_p_bound(2) == 1.0 and z_p_bound(4) == 4.0
    assert ModelParams(nu=1.0, lam=1.0, p=4, z_p=2.5).zp == 2.5


def test_second_moment_examples():
    assert second_moment_exact(PAM, LEB, 1e-12, 0.0) == pytest.approx(1.0, abs=1e-5)
    t, x = 0.8, 0.3
    assert second_moment_exact(PAM, DELTA, t, x) == pytest.approx(kernel_k(PAM.ctx, t, x), rel=1e-14)
    q = ModelParams.quasi_linear(0.7, 1.3, 0.4)
    ctx = q.ctx
    assert second_moment_exact(q, LEB, t, x) == pytest.approx(1 + (1 + 0.16) * h_fn(ctx, t), rel=1e-14)
    want = kernel_k(ctx, t, x) / 1.3**2 + 0.16 * h_fn(ctx, t)
    assert second_moment_exact(q, DELTA, t, x) == pytest.approx(want, rel=1e-14)
    with pytest.raises(ModeError):
        second_moment_exact(ModelParams(nu=1.0, lip_upper=1.0), LEB, 1.0, 0.0)


def test_two_atoms_against_picard(frozen):
    exact = second_moment_exact(PAM, TWO_ATOMS, 0.6, 0.4)
    assert exact == pytest.approx(picard_partial_sum(PAM, TWO_ATOMS, 30, 0.6, 0.4), rel=1e-10)
    assert exact == pytest.approx(frozen["two_atom_j0"] ** 2 + frozen["two_atom_conv"], rel=1e-9)


def test_picard_examples():
    mu = TWO_ATOMS
    assert picard_partial_sum(PAM, mu, 0, 0.5, 0.1) == pytest.approx(j0(mu, 1.0, 0.5, 0.1) ** 2, rel=1e-15)
    assert picard_partial_sum(PAM, LEB, 25, 1.0, 0.0) == pytest.approx(1 + h_fn(PAM.ctx, 1.0), abs=1e-8)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_picard_tail_bound_delta(n):
    # sum_{i >= n} (J0^2 * L_i) <= (sum_{i >= n} B_i(t)) (J0^2 * L_0) since B_i grows in t
    t, x = 1.5, 0.2
    exact = second_moment_exact(PAM, DELTA, t, x)
    s0 = picard_partial_sum(PAM, DELTA, 0, t, x)
    s1 = picard_partial_sum(PAM, DELTA, 1, t, x)
    sn = picard_partial_sum(PAM, DELTA, n, t, x)
    tail = sum(b_n(PAM.ctx, i, t) for i in range(n, 200))
    assert 0 <= exact - sn <= tail * (s1 - s0) * (1 + 1e-8)


@given(pos_measures, st.floats(0.3, 2), st.floats(0.3, 1.5), st.floats(0, 1), times, xs)
def test_picard_monotone(mu, nu, lam, vs, t, x):
    p = ModelParams.quasi_linear(nu, lam, vs)
    sums = [picard_partial_sum(p, mu, n, t, x) for n in (0, 1, 3)]
    assert all(b >= a * (1 - 1e-10) for a, b in zip(sums, sums[1:]))
    exact = second_moment_exact(p, mu, t, x)
    assert sums[-1] <= exact * (1 + 1e-8)


@given(pos_measures, st.floats(0.3, 2), st.floats(0.3, 1.5), st.floats(0, 1), times, xs)
def test_positivity(mu, nu, lam, vs, t, x):
    p = ModelParams.quasi_linear(nu, lam, vs)
    j2 = j0(mu, nu, t, x) ** 2
    assert second_moment_exact(p, mu, t, x) >= j2 * (1 - 1e-12) >= 0
    assert pth_moment_upper(p, mu, t, x) >= j2 * (1 - 1e-12)


@given(
    pos_measures,
    st.floats(0.3, 2),
    st.floats(0.2, 1.5),
    st.floats(0, 1),
    st.floats(0, 1),
    st.floats(0, 0.8),
    st.floats(0, 0.8),
    times,
    xs,
)
def test_sandwich(mu, nu, lam, f_lo, f_hi, v_lo, v_hi, t, x):
    lip_lower = lam * (0.5 + 0.5 * f_lo)
    lip_upper = lam * (1 + f_hi)
    vs = 0.5 * (v_lo + v_hi)
    bounds = ModelParams(nu=nu, lip_upper=lip_upper, vbar=max(v_lo, v_hi), lip_lower=lip_lower, vlow=min(v_lo, v_hi))
    exact = second_moment_exact(ModelParams.quasi_linear(nu, lam, vs), mu, t, x)
    lo = second_moment_lower(bounds, mu, t, x)
    hi = pth_moment_upper(bounds, mu, t, x)
    assert lo <= exact * (1 + 1e-9)
    assert exact <= hi * (1 + 1e-9)


@given(pos_measures, st.floats(0.3, 2), st.floats(0.2, 1.5), st.floats(0, 1), times, xs)
def test_sandwich_collapses_in_quasi_linear_mode(mu, nu, lam, vs, t, x):
    p = ModelParams.quasi_linear(nu, lam, vs)
    exact = second_moment_exact(p, mu, t, x)
    assert second_moment_lower(p, mu, t, x) == pytest.approx(exact, rel=1e-12)
    assert pth_moment_upper(p, mu, t, x) == pytest.approx(exact, rel=1e-12)


def test_lower_below_exact_at_upper_rate():
    bounds = ModelParams(nu=1.0, lip_upper=1.5, lip_lower=0.8)
    for t, x in [(0.3, 0.0), (1.0, 0.5), (2.0, -1.0)]:
        low = second_moment_lower(bounds, DELTA, t, x)
        assert low < second_moment_exact(ModelParams.pam(1.0, 1.5), DELTA, t, x)


def test_pth_upper_odd_rejected():
    with pytest.raises(ValueError):
        ModelParams(nu=1.0, lam=1.0, p=5)


def test_pth_upper_lyapunov_lebesgue():
    # (p/2) log ||u||_p^2 / t stays below 2^3 p^3 L^4 / nu for vbar = 0
    for p in (2, 4, 6):
        params = ModelParams(nu=1.0, lip_upper=1.0, p=p)
        t = np.array([100.0, 200.0])
        lg = np.array([log_pth_moment_upper(params, LEB, float(s), 0.0) for s in t])
        slope = 0.5 * p * (lg[1] - lg[0]) / (t[1] - t[0])
        assert slope <= lyapunov_bounds(params)["upper_vbar0"] * (1 + 1e-12)


def test_pth_upper_exceeds_mc_fourth_moment():
    cfg = MCConfig(half_width=4.0, dx=0.05, dt=1e-3, t_end=0.3, replications=400, master_seed=7, rho=RhoSpec(lam=1.0), mu=DELTA)
    est = estimate_moment(cfg, 4, 0.3, 0.0)
    bound = pth_moment_upper(ModelParams(nu=1.0, lip_upper=1.0, p=4), DELTA, 0.3, 0.0) ** 2
    assert math.isfinite(bound) and bound >= est.value


def test_lower_below_mc_lebesgue():
    cfg = MCConfig(half_width=4.0, dx=0.05, dt=1e-3, t_end=0.3, replications=400, master_seed=11, rho=RhoSpec(lam=1.0))
    est = estimate_moment(cfg, 2, 0.3, 0.0)
    low = second_moment_lower(ModelParams(nu=1.0, lip_upper=1.5, lip_lower=0.7), LEB, 0.3, 0.0)
    assert low <= est.value + 3 * est.stderr


def test_lyapunov_bounds():
    assert lyapunov_bounds(PAM)["exact_pam_m_p"] == pytest.approx(0.25)
    for p in (2, 4, 6, 8):
        b = lyapunov_bounds(PAM.with_p(p))
        assert b["upper_vbar0"] >= b["exact_pam_m_p"]
        assert b["upper_general"] == 4 * b["upper_vbar0"]
    assert lyapunov_bounds(ModelParams(nu=1.0, lip_upper=1.0))["exact_pam_m_p"] is None


def test_log_second_moment_slope():
    t = np.linspace(100, 200, 11)
    lg = np.array([log_second_moment_exact(PAM, LEB, float(s), 0.0) for s in t])
    slope = np.polyfit(t, lg, 1)[0]
    assert slope == pytest.approx(0.25, rel=0.01)


@given(pos_measures, st.floats(0.3, 2), st.floats(0.3, 1.5), st.floats(0, 1), times, xs)
def test_log_second_moment_matches(mu, nu, lam, vs, t, x):
    assume(not any(isinstance(c, GridDensity) for c in mu.components))
    p = ModelParams.quasi_linear(nu, lam, vs)
    v = second_moment_exact(p, mu, t, x)
    assert math.exp(log_second_moment_exact(p, mu, t, x)) == pytest.approx(v, rel=1e-9)


@pytest.mark.parametrize("mu,sig", [(LEB, 0.0), (DELTA, 0.0), (DELTA, 0.5), (TWO_ATOMS, 0.0)])
def test_renewal_residual(mu, sig):
    p = ModelParams.quasi_linear(1.0, 1.0, sig)
    f = np.vectorize(lambda s, y: second_moment_exact(p, mu, float(s), float(y)))
    feats = lambda s: [(c.location, math.sqrt(s / 2)) for c in mu.components if isinstance(c, Atom)]
    r = renewal_residual(f, lambda t, x: j0(mu, 1.0, t, x) ** 2, p.ctx, 0.6, 0.35, sig**2, feats)
    assert r <= 1e-6


def test_delta_prime(frozen):
    r = delta_prime_divergence_check(1.0, 1.0, 1.0, 0.2)
    assert r.monotone and r.diverges
    assert r.exponent == pytest.approx(-0.5, abs=0.05)
    assert np.allclose(r.values, r.closed_values, rtol=1e-8)
    assert all(delta_prime_integrand(1.0, 1.0, 0.2, s) > 0 for s in (1e-6, 0.3, 0.999))
    assert r.contrast_limit == pytest.approx(frozen["delta_contrast_limit"], rel=1e-13)
    assert r.contrast_converges
    with pytest.raises(ValueError):
        delta_prime_divergence_check(1.0, 1.0, 1.0, 0.2, eps_grid=(1e-4, 1e-2))


def test_upper_bound_overflow_saturates():
    params = ModelParams(nu=1.0, lip_upper=1.5, p=4)
    for mu in (LEB, DELTA):
        assert pth_moment_upper(params, mu, 1.0, 0.0) == math.inf
        assert math.isfinite(log_pth_moment_upper(params, mu, 1.0, 0.0))
        assert math.isfinite(pth_moment_upper(params, mu, 0.3, 0.0))
