"""Second moments, p-th moment bounds and Lyapunov-exponent bounds."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .kernels import KernelContext, h_fn, kernel_k, l0, ln_kernel, log_h_fn, picard_time_weight
from .measures import (
    InitialMeasure,
    j0,
    j0_squared_conv_kernel,
    log_j0,
    log_j0_squared_conv_kernel,
    time_route,
)
from .quadrature import DEFAULT, QuadConfig, integrate_adaptive, integrate_endpoint_singular
from .specialfn import heat_kernel

__all__ = [
    "ModeError",
    "ModelParams",
    "a_pv",
    "z_p_bound",
    "second_moment_exact",
    "log_second_moment_exact",
    "picard_partial_sum",
    "pth_moment_upper",
    "log_pth_moment_upper",
    "second_moment_lower",
    "lyapunov_bounds",
    "DeltaPrimeReport",
    "delta_prime_divergence_check",
    "delta_prime_integrand",
]


class ModeError(ValueError):
    """An exact formula was requested for parameters that only admit bounds."""


def _is_even(p) -> bool:
    return float(p).is_integer() and int(p) >= 2 and int(p) % 2 == 0


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the noise term ``rho``.

    In quasi-linear mode (``|rho(u)|^2 = lam^2 (varsigma^2 + u^2)``) pass
    ``lam`` and ``varsigma``; the growth constants are then filled in from
    them.  For bound-only use pass ``lip_upper``/``vbar`` and optionally
    ``lip_lower``/``vlow`` with ``lam=None``.
    """

    nu: float
    lam: float | None = None
    varsigma: float = 0.0
    lip_upper: float | None = None
    vbar: float | None = None
    lip_lower: float | None = None
    vlow: float | None = None
    lipschitz_const: float | None = None
    p: int = 2
    z_p: float | None = None

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu!r}")
        if self.varsigma < 0:
            raise ValueError("varsigma must be nonnegative")
        if not _is_even(self.p):
            raise ValueError(f"p must be an even integer >= 2, got {self.p!r}")
        object.__setattr__(self, "p", int(self.p))
        if self.lam is not None:
            lam = abs(float(self.lam))
            for name, want in (("lip_upper", lam), ("lip_lower", lam), ("vbar", self.varsigma), ("vlow", self.varsigma)):
                got = getattr(self, name)
                if got is None:
                    object.__setattr__(self, name, want)
        if self.lip_upper is None:
            raise ValueError("either lam or lip_upper is required")
        if self.vbar is None:
            object.__setattr__(self, "vbar", 0.0)
        if self.lip_upper < 0 or (self.lip_lower is not None and self.lip_lower < 0):
            raise ValueError("growth constants must be nonnegative")
        if self.vbar < 0 or (self.vlow is not None and self.vlow < 0):
            raise ValueError("vbar and vlow must be nonnegative")
        if self.lip_lower is not None and self.lip_lower > self.lip_upper:
            raise ValueError("lip_lower must not exceed lip_upper")
        if self.z_p is not None and self.z_p <= 0:
            raise ValueError("z_p override must be positive")

    @classmethod
    def quasi_linear(cls, nu: float, lam: float, varsigma: float = 0.0, p: int = 2) -> "ModelParams":
        return cls(nu=nu, lam=lam, varsigma=varsigma, p=p)

    @classmethod
    def pam(cls, nu: float, lam: float, p: int = 2) -> "ModelParams":
        return cls(nu=nu, lam=lam, p=p)

    @property
    def is_quasi_linear(self) -> bool:
        return (
            self.lam is not None
            and self.lip_upper == abs(self.lam)
            and self.lip_lower == abs(self.lam)
            and self.vbar == self.varsigma
            and self.vlow == self.varsigma
        )

    def with_p(self, p: int) -> "ModelParams":
        return replace(self, p=p)

    @property
    def zp(self) -> float:
        return self.z_p if self.z_p is not None else z_p_bound(self.p)

    @property
    def ctx(self) -> KernelContext:
        if self.lam is None:
            raise ModeError("no quasi-linear lam given")
        return KernelContext(self.nu, self.lam)

    @property
    def ctx_upper(self) -> KernelContext:
        return KernelContext(self.nu, self.lip_upper)

    @property
    def ctx_lower(self) -> KernelContext:
        if self.lip_lower is None:
            raise ValueError("lip_lower not supplied")
        return KernelContext(self.nu, self.lip_lower)

    def ctx_p(self) -> KernelContext:
        """Kernel rate ``a_{p,vbar} z_p L`` used by the p > 2 upper bound."""
        if self.p == 2:
            return self.ctx_upper
        return KernelContext(self.nu, a_pv(self.p, self.vbar) * self.zp * self.lip_upper)


def a_pv(p: int, vbar: float) -> float:
    if not _is_even(p):
        raise ValueError("p must be an even integer >= 2")
    if p == 2:
        return 1.0
    if vbar == 0:
        return math.sqrt(2.0)
    return 2.0 ** ((p - 1) / p)


def z_p_bound(p: float) -> float:
    """Bound on the moment-inequality constant: ``z_2 = 1`` and ``z_p <= 2 sqrt(p)``."""
    if p < 2:
        raise ValueError("p must be >= 2")
    return 1.0 if p == 2 else 2.0 * math.sqrt(p)


def _require_ql(params: ModelParams):
    if not params.is_quasi_linear:
        raise ModeError("exact moments need quasi-linear noise; use pth_moment_upper / second_moment_lower")


def _moment_formula(mu, ctx: KernelContext, sigma2: float, t: float, x: float, j0_weight: float, cfg, route="auto"):
    j = float(j0(mu, ctx.nu, t, x))
    with np.errstate(over="ignore", invalid="ignore"):
        conv = j0_squared_conv_kernel(mu, ctx, t, x, cfg, route=route)
        val = j0_weight * (j * j + conv) + sigma2 * float(h_fn(ctx, t))
    if not math.isfinite(val):
        # overflow in the linear route; the log form saturates to inf cleanly
        lg = _log_moment(mu, ctx, sigma2, t, x, math.log(j0_weight))
        return math.exp(lg) if lg < 709.0 else math.inf
    return val


def second_moment_exact(
    params: ModelParams, mu: InitialMeasure, t: float, x: float, cfg: QuadConfig | None = None, route: str = "auto"
) -> float:
    """``E[u(t,x)^2] = J_0^2 + (J_0^2 * K) + varsigma^2 H(t)``."""
    _require_ql(params)
    if t <= 0:
        raise ValueError("t must be positive")
    return _moment_formula(mu, params.ctx, params.varsigma**2, t, x, 1.0, cfg, route)


def _log_moment(mu, ctx, sigma2, t, x, log_weight=0.0):
    parts = []
    if not mu.is_zero:
        parts.append(2.0 * float(log_j0(mu, ctx.nu, t, x)))
        parts.append(log_j0_squared_conv_kernel(mu, ctx, t, x))
    parts = [p + log_weight for p in parts]
    if sigma2 > 0 and t > 0 and ctx.lam != 0:
        parts.append(math.log(sigma2) + float(log_h_fn(ctx, t)))
    parts = [p for p in parts if p > -math.inf]
    if not parts:
        return -math.inf
    m = max(parts)
    return m + math.log(sum(math.exp(p - m) for p in parts))


def log_second_moment_exact(params: ModelParams, mu: InitialMeasure, t: float, x: float) -> float:
    """``log E[u(t,x)^2]`` without leaving the log domain; nonnegative non-grid measures."""
    _require_ql(params)
    return _log_moment(mu, params.ctx, params.varsigma**2, t, x)


def picard_partial_sum(
    params: ModelParams, mu: InitialMeasure, n: int, t: float, x: float, cfg: QuadConfig | None = None
) -> float:
    """``J_0^2 + sum_{i<n} ((varsigma^2 + J_0^2) * L_i)(t, x)``."""
    _require_ql(params)
    if n < 0:
        raise ValueError("n must be nonnegative")
    ctx = params.ctx
    j = float(j0(mu, ctx.nu, t, x))
    if n == 0 or ctx.lam == 0:
        return j * j
    # varsigma^2 * L_i integrates in closed form
    lbs = math.log(ctx.b * math.sqrt(math.pi))
    const = sum(math.exp((i + 1) * lbs + 0.5 * (i + 1) * math.log(t) - gammaln(0.5 * (i + 3))) for i in range(n))
    conv = 0.0
    if not mu.is_zero:
        conv = time_route(mu, ctx.nu, lambda r: picard_time_weight(ctx, n, r), t, x, cfg)
    return j * j + params.varsigma**2 * const + conv


def pth_moment_upper(
    params: ModelParams, mu: InitialMeasure, t: float, x: float, cfg: QuadConfig | None = None
) -> float:
    """Upper bound on ``||u(t,x)||_p^2`` for the even order ``params.p``.

    p = 2: ``J_0^2 + (J_0^2 * Kbar) + vbar^2 Hbar``; p > 2: ``2 J_0^2 + 2 (J_0^2 * Ktilde_p) + vbar^2 Htilde_p``
    with the kernel rate ``a_{p,vbar} z_p L``.  ``E|u|^p`` is bounded by the
    returned value raised to ``p/2``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    w = 1.0 if params.p == 2 else 2.0
    return _moment_formula(mu, params.ctx_p(), params.vbar**2, t, x, w, cfg)


def log_pth_moment_upper(params: ModelParams, mu: InitialMeasure, t: float, x: float) -> float:
    w = 0.0 if params.p == 2 else math.log(2.0)
    return _log_moment(mu, params.ctx_p(), params.vbar**2, t, x, w)


def second_moment_lower(
    params: ModelParams, mu: InitialMeasure, t: float, x: float, cfg: QuadConfig | None = None
) -> float:
    """Lower bound ``J_0^2 + (J_0^2 * Klow) + vlow^2 Hlow`` on ``E[u(t,x)^2]``."""
    if params.lip_lower is None:
        raise ValueError("lip_lower not supplied")
    return _moment_formula(mu, params.ctx_lower, (params.vlow or 0.0) ** 2, t, x, 1.0, cfg)


def lyapunov_bounds(params: ModelParams) -> dict:
    """Bounds on the p-th moment Lyapunov exponent for constant initial data.

    ``upper_general = 2^5 p^3 L^4/nu``, ``upper_vbar0 = 2^3 p^3 L^4/nu`` (valid
    when vbar = 0) and the exact parabolic Anderson value ``lam^4 p (p^2-1)/(24 nu)``
    (``None`` outside quasi-linear mode).
    """
    p, L, nu = params.p, params.lip_upper, params.nu
    exact = None
    if params.lam is not None:
        exact = params.lam**4 * p * (p * p - 1) / (24.0 * nu)
    return {
        "p": p,
        "upper_general": 2**5 * p**3 * L**4 / nu,
        "upper_vbar0": 2**3 * p**3 * L**4 / nu,
        "exact_pam_m_p": exact,
    }


# ---------------------------------------------------------------------------
# derivative-of-delta initial data


def delta_prime_integrand(nu: float, t: float, x: float, s):
    """Closed-form ``int G_nu^2(t-s, x-y) J_0^2(s, y) dy`` for ``J_0 = d/dx G_nu``.

    ``G_{nu/2}(t,x)/(4 pi nu^3) (nu s/2 - nu s^2/(2t) + s^2 x^2/t^2) / (s^2 sqrt(s(t-s)))``.
    """
    s = np.asarray(s, dtype=float)
    ex = nu * s / 2 - nu * s * s / (2 * t) + s * s * x * x / (t * t)
    return heat_kernel(nu / 2.0, t, x) / (4 * math.pi * nu**3) * ex / (s * s * np.sqrt(s * (t - s)))


@dataclass
class DeltaPrimeReport:
    eps: list
    values: list
    exponent: float
    prefactor: float
    monotone: bool
    contrast_values: list
    contrast_limit: float
    closed_values: list = field(default_factory=list)

    @property
    def diverges(self) -> bool:
        return self.monotone and abs(self.exponent + 0.5) <= 0.05

    @property
    def contrast_extrapolated(self) -> float:
        """Limit of the contrast integrals assuming an ``eps^{1/2}`` approach."""
        (e0, v0), (e1, v1) = zip(self.eps[-2:], self.contrast_values[-2:])
        q = math.sqrt(e0 / e1)
        return v1 + (v1 - v0) / (q - 1.0)

    @property
    def contrast_converges(self) -> bool:
        gaps = [self.contrast_limit - v for v in self.contrast_values]
        shrinking = all(0 <= b < a for a, b in zip(gaps, gaps[1:]))
        return shrinking and abs(self.contrast_extrapolated - self.contrast_limit) <= 1e-4 * self.contrast_limit


def _space_integral(nu, t, x, s, j0fn, cfg):
    """``int G_nu^2(t - s, x - y) j0fn(s, y)^2 dy`` by quadrature."""
    sd_s = math.sqrt(nu * s)
    sd_r = math.sqrt(nu * (t - s))
    R = 40.0 * max(sd_s, sd_r) + abs(x)
    bps = sorted({0.0, x, *(k * sd_s for k in (-6, -2, -1, 1, 2, 6)), *(x + k * sd_r for k in (-6, -1, 1, 6))})

    def f(y):
        return heat_kernel(nu, t - s, x - y) ** 2 * j0fn(s, y) ** 2

    return integrate_adaptive(f, -R, R, cfg, breakpoints=[b for b in bps if -R < b < R])[0]


def _truncated_integral(nu, t, x, eps, j0fn, cfg):
    """``int_eps^t ds int dy G_nu^2(t-s, x-y) j0fn(s,y)^2``; log variable near 0, sqrt near t."""
    mid = 0.5 * t
    inner = QuadConfig(rel_tol=1e-11, abs_tol=0.0)

    def left(u):
        return np.array([math.exp(v) * _space_integral(nu, t, x, math.exp(v), j0fn, inner) for v in np.atleast_1d(u)])

    def right(ss):
        return np.array([_space_integral(nu, t, x, float(s), j0fn, inner) if s < t else 0.0 for s in np.atleast_1d(ss)])

    total = 0.0
    if eps < mid:
        total += integrate_adaptive(left, math.log(eps), math.log(mid), cfg)[0]
        total += integrate_endpoint_singular(right, mid, t, cfg, left=False, right=True)
    else:
        total += integrate_endpoint_singular(right, eps, t, cfg, left=False, right=True)
    return total


def delta_prime_divergence_check(
    nu: float,
    lam: float,
    t: float,
    x: float,
    eps_grid: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5),
    cfg: QuadConfig | None = None,
) -> DeltaPrimeReport:
    """Show that ``(G_nu^2 * J_0^2)(t,x)`` blows up when ``J_0 = d/dx G_nu``.

    For each ``eps`` the time integral is truncated to ``[eps, t]`` and
    evaluated by nested quadrature.  The report carries the least-squares
    exponent of ``I(eps) ~ c eps^k`` (``k`` near ``-1/2`` signals divergence)
    and a contrast run with ``J_0 = G_nu`` whose integral converges to
    ``L_1(t,x)/lam^4``.
    """
    if nu <= 0 or t <= 0:
        raise ValueError("nu and t must be positive")
    if lam == 0:
        raise ValueError("lam must be nonzero")
    eps = [float(e) for e in eps_grid]
    if any(e <= 0 or e >= t for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_grid must be decreasing and inside (0, t)")
    cfg = cfg or QuadConfig(rel_tol=1e-9, abs_tol=0.0)

    def jprime(s, y):
        return -(y / (nu * s)) * heat_kernel(nu, s, y)

    def jdelta(s, y):
        return heat_kernel(nu, s, y)

    vals = [_truncated_integral(nu, t, x, e, jprime, cfg) for e in eps]
    contrast = [_truncated_integral(nu, t, x, e, jdelta, cfg) for e in eps]
    closed = [
        integrate_adaptive(lambda u: np.exp(u) * delta_prime_integrand(nu, t, x, np.exp(u)), math.log(e), math.log(t / 2), cfg)[0]
        + integrate_endpoint_singular(lambda s: delta_prime_integrand(nu, t, x, s), t / 2, t, cfg, left=False, right=True)
        for e in eps
    ]
    le = np.log(eps)
    lv = np.log(vals)
    slope, icpt = np.polyfit(le, lv, 1)
    ctx = KernelContext(nu, lam)
    limit = float(ln_kernel(ctx, 1, t, x)) / lam**4
    return DeltaPrimeReport(
        eps=eps,
        values=vals,
        exponent=float(slope),
        prefactor=float(math.exp(icpt)),
        monotone=all(b > a for a, b in zip(vals, vals[1:])),
        contrast_values=contrast,
        contrast_limit=limit,
        closed_values=closed,
    )
