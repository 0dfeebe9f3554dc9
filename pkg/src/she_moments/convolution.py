"""Brute-force space-time convolution against ``L_0``.

Used as an independent check of the closed forms: the spatial integral is
done by adaptive quadrature on the product ``f(s, y) L_0(t - s, x - y)``
rather than through the Gaussian factorisation.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .kernels import KernelContext, l0
from .quadrature import QuadConfig, integrate_adaptive, integrate_endpoint_singular

__all__ = ["convolve_l0", "renewal_residual"]

INNER = QuadConfig(rel_tol=1e-10, abs_tol=0.0, max_subdivisions=4000)
OUTER = QuadConfig(rel_tol=1e-9, abs_tol=0.0, max_subdivisions=4000)

Features = Callable[[float], Sequence[tuple[float, float]]]


def _no_features(s: float):
    return ()


def _space_integral(f, ctx: KernelContext, t: float, x: float, s: float, features: Features, cfg: QuadConfig) -> float:
    r = t - s
    if r <= 0 or s <= 0:
        return 0.0
    sd = math.sqrt(ctx.nu * r / 2.0)
    lo, hi = x - 14.0 * sd, x + 14.0 * sd
    bps = [x - sd, x, x + sd]
    for c, w in features(s):
        bps += [c + k * w for k in (-8.0, -2.0, -0.5, 0.0, 0.5, 2.0, 8.0)]

    def g(y):
        return f(s, y) * l0(ctx, r, x - y)

    return integrate_adaptive(g, lo, hi, cfg, breakpoints=bps)[0]


def convolve_l0(
    f: Callable,
    ctx: KernelContext,
    t: float,
    x: float,
    features: Features = _no_features,
    inner: QuadConfig = INNER,
    outer: QuadConfig = OUTER,
) -> float:
    """``int_0^t ds int dy f(s, y) L_0(t - s, x - y)`` by nested quadrature.

    ``f(s, y)`` must accept an array ``y``.  ``features(s)`` lists
    ``(center, width)`` pairs of narrow peaks of ``f(s, .)`` so the inner
    quadrature sees them.  Both time endpoints may carry ``1/sqrt``
    singularities.
    """
    if t <= 0:
        raise ValueError("t must be positive")

    def time_integrand(ss):
        ss = np.atleast_1d(ss)
        return np.array([_space_integral(f, ctx, t, x, float(s), features, inner) for s in ss])

    return integrate_endpoint_singular(time_integrand, 0.0, t, outer)


def renewal_residual(
    f: Callable,
    j0_sq: Callable,
    ctx: KernelContext,
    t: float,
    x: float,
    sigma2: float = 0.0,
    features: Features = _no_features,
) -> float:
    """Relative residual of ``f = J_0^2 + (sigma2 + f) * L_0`` at ``(t, x)``."""
    lhs = float(f(t, np.array([x]))[0])
    conv = convolve_l0(lambda s, y: sigma2 + f(s, y), ctx, t, x, features)
    return abs(lhs - float(j0_sq(t, x)) - conv) / abs(lhs)
