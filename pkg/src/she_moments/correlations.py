"""Two-point correlations ``E[u(t,x) u(tau,y)]``."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .kernels import KernelContext, h_fn
from .measures import (
    GridDensity,
    InitialMeasure,
    Lebesgue,
    gauss_pair_kernel,
    j0,
    overlap_pair_kernel,
    pair_integral,
)
from .moments import ModeError, ModelParams
from .quadrature import QuadConfig, integrate_adaptive
from .specialfn import erf, erfc, heat_kernel, log_erfc, std_normal_cdf

__all__ = [
    "CorrelationQuery",
    "two_point_exact",
    "two_point_lebesgue",
    "log_two_point_lebesgue",
    "two_point_delta",
    "two_point_bounds",
    "heat_overlap_integral",
    "bc_lebesgue_integral",
    "bc_lebesgue_discrepancy",
]


@dataclass(frozen=True)
class CorrelationQuery:
    t: float
    x: float
    tau: float
    y: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if self.tau < self.t:
            raise ValueError("need tau >= t")

    @property
    def tbar(self) -> float:
        return 0.5 * (self.t + self.tau)

    @property
    def dist(self) -> float:
        return abs(self.x - self.y)

    def swapped(self) -> "CorrelationQuery":
        """Same times, points exchanged (only meaningful when tau == t)."""
        return CorrelationQuery(self.t, self.y, self.tau, self.x)


def heat_overlap_integral(nu: float, t: float, tau: float, d: float) -> float:
    """``int_0^t dr int dz G_nu(t-r, x-z) G_nu(tau-r, y-z)`` with ``d = |x - y|``.

    Closed form; when ``tau == t`` the term ``Phi(d / 0)`` is taken as 1.
    """
    d = abs(d)
    s = tau + t
    gap = tau - t
    upper_gap = 0.0 if gap == 0 else float(std_normal_cdf(-d / math.sqrt(nu * gap)))
    val = d / nu * (upper_gap - float(std_normal_cdf(-d / math.sqrt(nu * s)))) + s * float(heat_kernel(nu, s, d))
    if gap > 0:
        val -= gap * float(heat_kernel(nu, gap, d))
    return val


def _cutoff_scales(nu: float, d: float, offset: float = 0.0) -> list[float]:
    """Breakpoints in ``u = sqrt(tbar - r)`` around where ``G_{2nu}(offset + u^2, d)`` switches on.

    A geometric ladder from below the switch-on scale up to order one, so
    no single panel spans many decades of ``u``.
    """
    out = []
    for scale in (d / (2.0 * math.sqrt(nu)), math.sqrt(offset)):
        if scale > 0:
            u = scale / 8.0
            while u < 10.0:
                out.append(u)
                u *= 4.0
    return sorted(out)


def _separation_mass(mu: InitialMeasure, ctx: KernelContext, r: float, w: float, m: float, cfg) -> float:
    """``int dz f0(r, z) G_nu(w - r/2, m - z)`` where ``f0 = J_0^2 + J_0^2 * K``."""
    comps = [c for c in mu.components if not (isinstance(c, Lebesgue) and c.scale == 0)]
    if len(comps) == 1 and isinstance(comps[0], Lebesgue):
        return comps[0].scale ** 2 * (1.0 + float(h_fn(ctx, r)))
    kern = gauss_pair_kernel(ctx.nu, r)
    if ctx.lam != 0:
        kern = kern + overlap_pair_kernel(ctx, r)
    return pair_integral(mu, kern, ctx.nu, w, m, cfg)


def _split_time_integral(fn, t: float, cfg, scales=()) -> float:
    """``int_0^t fn(r, t - r) dr`` with square-root substitutions at both ends.

    ``fn`` receives both ``r`` and the remaining time ``rho = t - r`` exactly,
    so features at ``rho ~ 1e-16`` are not lost to rounding.  ``scales`` are
    breakpoints in ``sqrt(rho)`` near ``rho = 0``.
    """
    h = math.sqrt(0.5 * t)

    def near_start(us):
        us = np.atleast_1d(us)
        return np.array([2.0 * u * fn(u * u, t - u * u) for u in us])

    def near_end(us):
        us = np.atleast_1d(us)
        return np.array([2.0 * u * fn(t - u * u, u * u) for u in us])

    bps = [u for u in scales if 0.0 < u < h]
    return integrate_adaptive(near_start, 0.0, h, cfg)[0] + integrate_adaptive(near_end, 0.0, h, cfg, breakpoints=bps)[0]


def _correlation_i(mu: InitialMeasure, ctx: KernelContext, sigma2: float, q: CorrelationQuery, cfg) -> float:
    """``lam^2 int_0^t dr int dz (sigma^2 + f(r,z)) G_nu(t-r, x-z) G_nu(tau-r, y-z)``."""
    if ctx.lam == 0:
        return 0.0
    nu, t, x, y = ctx.nu, q.t, q.x, q.y
    gap, d = q.tau - q.t, q.dist

    def integrand(r, rho):
        if not (r > 0 and rho > 0):
            return 0.0
        denom = gap + 2 * rho
        v = rho * (gap + rho) / denom
        m = ((gap + rho) * x + rho * y) / denom
        g = float(heat_kernel(2 * nu, 0.5 * gap + rho, d))
        if g == 0.0:
            return 0.0
        val = sigma2 * float(h_fn(ctx, r))
        if not mu.is_zero:
            val += _separation_mass(mu, ctx, r, r / 2 + v, m, cfg)
        return g * val

    total = _split_time_integral(integrand, t, cfg, _cutoff_scales(nu, d, 0.5 * gap))
    if sigma2 > 0:
        total += sigma2 * heat_overlap_integral(nu, t, q.tau, d)
    return ctx.lam2 * total


def two_point_exact(
    params: ModelParams, mu: InitialMeasure, q: CorrelationQuery, cfg: QuadConfig | None = None
) -> float:
    """``J_0(t,x) J_0(tau,y) + lam^2 int int (varsigma^2 + E u(r,z)^2) G G``, one time quadrature.

    The spatial integral is done against the separation kernels of the exact
    second moment, so only the time variable is integrated numerically.
    """
    if not params.is_quasi_linear:
        raise ModeError("exact correlations need quasi-linear noise; use two_point_bounds")
    cfg = cfg or QuadConfig(rel_tol=1e-10, abs_tol=1e-14)
    jj = float(j0(mu, params.nu, q.t, q.x)) * float(j0(mu, params.nu, q.tau, q.y)) if not mu.is_zero else 0.0
    return jj + _correlation_i(mu, params.ctx, params.varsigma**2, q, cfg)


def log_two_point_lebesgue(params: ModelParams, q: CorrelationQuery) -> float:
    """``log`` of the closed-form bracket evaluated at ``tb = (t + tau)/2``.

    This is ``log(E[u u] - 1)`` at equal times; see :func:`two_point_lebesgue` for ``tau > t``.
    """
    ctx = params.ctx
    nu, lam2 = params.nu, ctx.lam2
    tb, d = q.tbar, q.dist
    sq = 2.0 * math.sqrt(nu * tb)
    a = (lam2 * lam2 * tb - 2 * lam2 * d) / (4 * nu) + float(log_erfc((d - lam2 * tb) / sq))
    b = float(log_erfc(d / sq))
    if a <= b:
        return -math.inf
    return math.log1p(params.varsigma**2) + a + math.log(-math.expm1(b - a))


def _lebesgue_gap_term(ctx: KernelContext, t: float, tbar: float, d: float) -> float:
    """``lam^2 int_t^tbar (H(r) + 1) G_{2nu}(tbar - r, d) dr``."""
    if tbar <= t:
        return 0.0

    # rho = tbar - r = u^2, kept exact so that tiny d is resolved
    def f(us):
        us = np.asarray(us, dtype=float)
        return 2.0 * us * (h_fn(ctx, tbar - us * us) + 1.0) * heat_kernel(2 * ctx.nu, us * us, d)

    cfg = QuadConfig(rel_tol=1e-12, abs_tol=1e-15)
    h = math.sqrt(tbar - t)
    bps = [u for u in _cutoff_scales(ctx.nu, d) if 0.0 < u < h]
    return ctx.lam2 * integrate_adaptive(f, 0.0, h, cfg, breakpoints=bps)[0]


def two_point_lebesgue(params: ModelParams, q: CorrelationQuery) -> float:
    """Closed-form correlation for constant initial data ``mu = dx``.

    At equal times this is
    ``1 + (1 + varsigma^2) [exp((lam^4 t - 2 lam^2 d)/4nu) erfc((d - lam^2 t)/(2 sqrt(nu t))) - erfc(d/(2 sqrt(nu t)))]``
    with ``d = |x - y|``.  The bracket is ``lam^2 int_0^t (H(r)+1) G_{2nu}(t - r, d) dr``.
    For ``tau > t`` the same bracket evaluated at ``tb = (t + tau)/2`` integrates
    over ``[0, tb]`` rather than ``[0, t]``, so the surplus ``[t, tb]`` piece is
    subtracted by a short quadrature.
    """
    if not params.is_quasi_linear:
        raise ModeError("closed-form correlation needs quasi-linear noise")
    ctx = params.ctx
    if ctx.lam == 0:
        return 1.0
    if q.dist == 0:
        base = 1.0 + (1.0 + params.varsigma**2) * float(h_fn(ctx, q.tbar))
    else:
        lv = log_two_point_lebesgue(params, q)
        base = 1.0 + (math.exp(lv) if lv > -math.inf else 0.0)
    return base - (1.0 + params.varsigma**2) * _lebesgue_gap_term(ctx, q.t, q.tbar, q.dist)


def two_point_delta(params: ModelParams, q: CorrelationQuery) -> float:
    """Equal-time correlation for a unit point mass at the origin."""
    if not params.is_quasi_linear:
        raise ModeError("closed-form correlation needs quasi-linear noise")
    if q.tau != q.t:
        raise NotImplementedError("the delta closed form is for equal times only; use two_point_exact")
    nu, t = params.nu, q.t
    s2 = params.varsigma**2
    lam2 = params.lam**2
    d = q.dist
    sq = 2.0 * math.sqrt(nu * t)
    gg = float(heat_kernel(nu, t, q.x) * heat_kernel(nu, t, q.y))
    if lam2 == 0:
        return gg
    ex = math.exp((lam2 * lam2 * t - 2 * lam2 * d) / (4 * nu) + float(log_erfc((d - lam2 * t) / sq)))
    pref = lam2 / (4 * nu) * float(heat_kernel(nu / 2, t, 0.5 * (q.x + q.y))) + s2
    return gg - s2 * float(erfc(d / sq)) + pref * ex


def two_point_bounds(
    params: ModelParams, mu: InitialMeasure, q: CorrelationQuery, cfg: QuadConfig | None = None
) -> tuple[float, float]:
    """``(lower, upper)`` from the growth constants ``(lip_lower, vlow)`` and ``(lip_upper, vbar)``."""
    cfg = cfg or QuadConfig(rel_tol=1e-10, abs_tol=1e-14)
    jj = float(j0(mu, params.nu, q.t, q.x)) * float(j0(mu, params.nu, q.tau, q.y)) if not mu.is_zero else 0.0
    upper = jj + _correlation_i(mu, params.ctx_upper, params.vbar**2, q, cfg)
    if params.lip_lower is None:
        raise ValueError("lip_lower not supplied")
    lower = jj + _correlation_i(mu, params.ctx_lower, (params.vlow or 0.0) ** 2, q, cfg)
    return lower, upper


def bc_lebesgue_integral(nu: float, t: float, dx: float, cfg: QuadConfig | None = None) -> float:
    """Quadrature of the historical constant-data correlation integral (coefficient 1, no shift).

    ``int_0^t |d| (pi nu s^3)^{-1/2} exp(-d^2/(4 nu s) + (t-s)/(4 nu)) Phi(sqrt((t-s)/(2nu))) ds``.
    The substitution ``s = d^2/(4 nu v^2)`` turns the first-passage density
    into ``(4/sqrt(pi)) e^{-v^2} dv``; at ``d = 0`` it yields the limiting value.
    """
    if t <= 0 or nu <= 0:
        raise ValueError("nu and t must be positive")
    cfg = cfg or QuadConfig(rel_tol=1e-12, abs_tol=1e-15)
    d = abs(dx)
    v0 = d / math.sqrt(4 * nu * t)

    def f(v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore"):
            s = np.where(v > 0, d * d / (4 * nu * np.maximum(v, 1e-300) ** 2), 0.0)
        r = np.maximum(t - s, 0.0)
        return 4.0 / math.sqrt(math.pi) * np.exp(-v * v + r / (4 * nu)) * std_normal_cdf(np.sqrt(r / (2 * nu)))

    return integrate_adaptive(f, v0, v0 + 40.0, cfg, breakpoints=[v0 + k for k in (0.5, 1, 2, 4, 8)])[0]


def bc_lebesgue_discrepancy(nu: float, t: float, dx: float, check: bool = False, tol: float = 1e-6) -> float:
    """Historical integral minus the corrected closed form at ``lam = 1``, ``varsigma = 0``, ``tau = t``.

    The difference should equal ``-erf(|dx| / sqrt(4 nu t))``; with ``check``
    a mismatch above ``tol`` raises :class:`ArithmeticError`.
    """
    params = ModelParams.pam(nu, 1.0)
    corrected = two_point_lebesgue(params, CorrelationQuery(t, 0.0, t, abs(dx)))
    diff = bc_lebesgue_integral(nu, t, dx) - corrected
    if check:
        want = -float(erf(abs(dx) / math.sqrt(4 * nu * t)))
        if abs(diff - want) > tol:
            raise ArithmeticError(f"discrepancy {diff!r} differs from {want!r}")
    return diff
