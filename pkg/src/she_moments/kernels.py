"""Space-time kernels of the second-moment renewal equation.

``L_0 = lam^2 G_nu^2`` and its iterated space-time convolutions ``L_n`` all
factor as ``G_{nu/2}(t, x)`` times a function of ``t`` alone; the same holds
for their sum ``K``.  Everything here exploits that factorisation.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammaln, log_ndtr, ndtr

from .specialfn import _out, erfc, heat_kernel, log_erfc, log_heat_kernel

__all__ = [
    "KernelContext",
    "SeriesResult",
    "l0",
    "log_b_n",
    "b_n",
    "ln_kernel",
    "kernel_series",
    "kernel_k",
    "log_kernel_k",
    "time_factor",
    "log_time_factor",
    "h_fn",
    "log_h_fn",
    "picard_time_weight",
    "time_overlap",
    "log_time_overlap",
]


@dataclass(frozen=True)
class KernelContext:
    """Fixed ``(nu, lam)`` with the derived constant ``b = lam^2 / sqrt(4 pi nu)``."""

    nu: float
    lam: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu!r}")
        if not math.isfinite(self.lam):
            raise ValueError("lam must be finite")

    @property
    def b(self) -> float:
        return self.lam**2 / math.sqrt(4.0 * math.pi * self.nu)

    @property
    def lam2(self) -> float:
        return self.lam**2

    @property
    def rate(self) -> float:
        """Exponent ``lam^4 / (4 nu)`` of the large-time growth of H."""
        return self.lam**4 / (4.0 * self.nu)

    def with_lam(self, lam: float) -> "KernelContext":
        return KernelContext(self.nu, lam)


def l0(ctx: KernelContext, t, x):
    """``L_0(t, x) = lam^2 G_nu(t, x)^2``; zero for ``t <= 0``."""
    t = np.asarray(t, dtype=float)
    ts = np.where(t > 0, t, 1.0)
    v = ctx.lam2 / np.sqrt(4.0 * np.pi * ctx.nu * ts) * heat_kernel(ctx.nu / 2.0, ts, x)
    return _out(np.where(t > 0, v, 0.0))


def log_b_n(ctx: KernelContext, n, t):
    """``log B_n(t)`` with ``B_n(t) = pi^{(n+1)/2} b^n t^{n/2} / Gamma((n+1)/2)``."""
    n = np.asarray(n, dtype=float)
    t = np.asarray(t, dtype=float)
    if ctx.lam == 0:
        return _out(np.where(n == 0, 0.0, -np.inf) + 0.0 * t)
    return _out(
        0.5 * (n + 1) * math.log(math.pi) + n * math.log(ctx.b) + 0.5 * n * np.log(t) - gammaln(0.5 * (n + 1))
    )


def b_n(ctx: KernelContext, n, t):
    return _out(np.exp(log_b_n(ctx, n, t)))


def ln_kernel(ctx: KernelContext, n: int, t, x):
    """``L_n(t, x) = G_{nu/2}(t, x) (b sqrt(pi))^{n+1} t^{(n-1)/2} / Gamma((n+1)/2)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    t = np.asarray(t, dtype=float)
    ts = np.where(t > 0, t, 1.0)
    if ctx.lam == 0:
        return _out(np.zeros(np.broadcast(t, np.asarray(x)).shape))
    lg = (n + 1) * math.log(ctx.b * math.sqrt(math.pi)) + 0.5 * (n - 1) * np.log(ts) - gammaln(0.5 * (n + 1))
    v = np.exp(lg + log_heat_kernel(ctx.nu / 2.0, ts, x))
    return _out(np.where(t > 0, v, 0.0))


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms: int
    last_ratio: float


def kernel_series(ctx: KernelContext, t: float, x: float, rtol: float = 1e-14, max_terms: int = 500) -> SeriesResult:
    """Sum ``L_0 + L_1 + ...`` until the newest ``B_n`` is negligible and decreasing.

    The stopping rule looks at ``B_n(t) / sum_{k<=n} B_k(t)`` only, so it is
    the same for every ``x`` (and still terminates where ``G`` underflows).
    """
    if t <= 0:
        return SeriesResult(0.0, 0, 0.0)
    if ctx.lam == 0:
        return SeriesResult(0.0, 1, 0.0)
    total = 0.0
    b_total = 0.0
    prev = None
    ratio = float("inf")
    for n in range(max_terms + 1):
        total += ln_kernel(ctx, n, t, x)
        bn = b_n(ctx, n, t)
        b_total += bn
        if prev is not None and prev > 0:
            ratio = bn / prev
        prev = bn
        if n > 0 and ratio < 1.0 and bn <= rtol * b_total:
            return SeriesResult(total, n + 1, ratio)
    raise ArithmeticError(f"kernel series not converged after {max_terms} terms")


def time_factor(ctx: KernelContext, t):
    """``k(t) = K(t, x) / G_{nu/2}(t, x) = lam^2/sqrt(4 pi nu t) + (lam^4/2nu) e^{lam^4 t/4nu} Phi(lam^2 sqrt(t/2nu))``."""
    return _out(np.exp(log_time_factor(ctx, t)))


def log_time_factor(ctx: KernelContext, t):
    t = np.asarray(t, dtype=float)
    ts = np.where(t > 0, t, 1.0)
    if ctx.lam == 0:
        return _out(np.full(ts.shape, -np.inf))
    lam2, nu = ctx.lam2, ctx.nu
    first = np.log(lam2) - 0.5 * np.log(4.0 * np.pi * nu * ts)
    second = np.log(lam2 * lam2 / (2.0 * nu)) + ctx.rate * ts + log_ndtr(lam2 * np.sqrt(ts / (2.0 * nu)))
    return _out(np.where(t > 0, np.logaddexp(first, second), -np.inf))


def kernel_k(ctx: KernelContext, t, x):
    """Closed form of ``K = sum_n L_n``; zero for ``t <= 0`` or ``lam = 0``."""
    with np.errstate(over="ignore"):
        return _out(np.exp(log_kernel_k(ctx, t, x)))


def log_kernel_k(ctx: KernelContext, t, x):
    t = np.asarray(t, dtype=float)
    ts = np.where(t > 0, t, 1.0)
    v = log_time_factor(ctx, ts) + log_heat_kernel(ctx.nu / 2.0, ts, x)
    return _out(np.where(t > 0, v, -np.inf))


def h_fn(ctx: KernelContext, t):
    """``H(t) = 2 e^{lam^4 t/4nu} Phi(lam^2 sqrt(t/2nu)) - 1``, the space integral of K over [0, t]."""
    t = np.asarray(t, dtype=float)
    tp = np.maximum(t, 0.0)
    c = ctx.rate * tp
    d = ctx.lam2 * np.sqrt(tp / (2.0 * ctx.nu))
    with np.errstate(over="ignore", invalid="ignore"):
        # 2 e^c Phi(d) - 1 = expm1(c) + e^c erf(d/sqrt2), no cancellation near t = 0
        v = np.expm1(c) + np.exp(c) * (2.0 * ndtr(d) - 1.0)
    return _out(v)


def log_h_fn(ctx: KernelContext, t):
    """``log H(t)``; ``-inf`` at ``t = 0``.  Accurate where H overflows."""
    t = np.asarray(t, dtype=float)
    small = ctx.rate * t < 30.0
    out = np.empty(t.shape)
    with np.errstate(divide="ignore"):
        out[small] = np.log(h_fn(ctx, t[small])) if np.any(small) else 0.0
    tl = t[~small]
    if tl.size:
        lg = np.log(2.0) + ctx.rate * tl + log_ndtr(ctx.lam2 * np.sqrt(tl / (2.0 * ctx.nu)))
        out[~small] = lg + np.log1p(-np.exp(-lg))
    return _out(out)


def picard_time_weight(ctx: KernelContext, n_terms: int, r):
    """``sum_{i < n_terms} L_i(r, x) / G_{nu/2}(r, x)``, the time factor of a partial kernel sum."""
    r = np.asarray(r, dtype=float)
    rs = np.where(r > 0, r, 1.0)
    out = np.zeros(rs.shape)
    if ctx.lam == 0:
        return _out(out)
    lbs = math.log(ctx.b * math.sqrt(math.pi))
    for i in range(n_terms):
        out += np.exp((i + 1) * lbs + 0.5 * (i - 1) * np.log(rs) - gammaln(0.5 * (i + 1)))
    return _out(np.where(r > 0, out, 0.0))


def time_overlap(ctx: KernelContext, t, delta):
    """``T(t, d) = int_0^t G_{2nu}(s, d) k(t - s) ds`` in closed form.

    Equals ``(lam^2/4nu) exp((lam^4 t - 2 lam^2 |d|)/4nu) erfc((|d| - lam^2 t)/(2 sqrt(nu t)))``.
    """
    with np.errstate(over="ignore"):
        return _out(np.exp(log_time_overlap(ctx, t, delta)))


def log_time_overlap(ctx: KernelContext, t, delta):
    t = np.asarray(t, dtype=float)
    d = np.abs(np.asarray(delta, dtype=float))
    ts = np.where(t > 0, t, 1.0)
    if ctx.lam == 0:
        return _out(np.full(np.broadcast(ts, d).shape, -np.inf))
    lam2, nu = ctx.lam2, ctx.nu
    w = (d - lam2 * ts) / (2.0 * np.sqrt(nu * ts))
    v = math.log(lam2 / (4.0 * nu)) + (lam2 * lam2 * ts - 2.0 * lam2 * d) / (4.0 * nu) + log_erfc(w)
    return _out(np.where(t > 0, v, -np.inf))


def lebesgue_overlap(ctx: KernelContext, t, delta):
    """``T(t, d) - (lam^2/4nu) erfc(|d|/(2 sqrt(nu t)))``: the part of T driven by ``H + 1``.

    Computed with erfcx when the exponential would overflow.
    """
    t = np.asarray(t, dtype=float)
    d = np.abs(np.asarray(delta, dtype=float))
    lam2, nu = ctx.lam2, ctx.nu
    return _out(time_overlap(ctx, t, d) - lam2 / (4.0 * nu) * erfc(d / (2.0 * np.sqrt(nu * t))))
