"""Scalar special functions and Gaussian heat kernels.

Every function accepts scalars or numpy arrays and broadcasts.  Composites of
the form ``exp(big) * Phi(d)`` have ``log_*`` companions that never leave the
log domain, so callers can evaluate them far beyond ``exp(700)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

__all__ = [
    "ScaledExpPhi",
    "scaled_exp_phi",
    "std_normal_cdf",
    "log_std_normal_cdf",
    "log_ndtr_diff",
    "std_normal_pdf",
    "erf",
    "erfc",
    "erfcx",
    "log_erfc",
    "log_exp_erfc",
    "heat_kernel",
    "log_heat_kernel",
    "smooth_exp",
    "log_smooth_exp",
    "smooth_exp_dx",
    "smooth_exp_d2x",
    "smooth_exp_da",
]

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def _check_nan(x, name="x"):
    if np.any(np.isnan(x)):
        raise ValueError(f"{name} is NaN")


def _out(v):
    # 0-d arrays back to Python floats so scalar callers get scalars
    return float(v) if np.ndim(v) == 0 else v


@dataclass(frozen=True)
class ScaledExpPhi:
    """``exp(c) * Phi(d)`` held as its natural logarithm (the value is always positive)."""

    log_value: float
    sign: int = 1

    @property
    def value(self) -> float:
        return float(np.exp(self.log_value))


def scaled_exp_phi(c, d) -> ScaledExpPhi:
    _check_nan(c, "c")
    _check_nan(d, "d")
    return ScaledExpPhi(float(c + _sp.log_ndtr(d)))


def std_normal_cdf(x):
    """Standard normal distribution function Phi(x)."""
    _check_nan(x)
    return _out(_sp.ndtr(x))


def log_std_normal_cdf(x):
    _check_nan(x)
    return _out(_sp.log_ndtr(x))


def std_normal_pdf(x):
    return _out(np.exp(-0.5 * np.square(x) - _LOG_SQRT_2PI))


def log_ndtr_diff(upper, lower):
    """``log(Phi(upper) - Phi(lower))`` for ``upper > lower`` without cancellation."""
    upper = np.asarray(upper, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper, lower = np.broadcast_arrays(upper, lower)
    out = np.full(upper.shape, -np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        # both in the upper tail: use the survival function
        right = lower > 0
        lu = _sp.log_ndtr(-lower[right])
        ll = _sp.log_ndtr(-upper[right])
        out[right] = lu + np.log1p(-np.exp(ll - lu))
        left = ~right
        lu = _sp.log_ndtr(upper[left])
        ll = _sp.log_ndtr(lower[left])
        out[left] = lu + np.log1p(-np.exp(ll - lu))
    out[~(upper > lower)] = -np.inf
    return _out(out)


def erf(x):
    _check_nan(x)
    return _out(_sp.erf(x))


def erfc(x):
    _check_nan(x)
    return _out(_sp.erfc(x))


def erfcx(x):
    """Scaled complementary error function ``exp(x**2) * erfc(x)``."""
    _check_nan(x)
    return _out(_sp.erfcx(x))


def log_erfc(x):
    _check_nan(x)
    # erfc(x) = 2 Phi(-sqrt(2) x)
    return _out(np.log(2.0) + _sp.log_ndtr(-np.sqrt(2.0) * np.asarray(x, dtype=float)))


def log_exp_erfc(a, w):
    """``log(exp(a) * erfc(w))``, stable for large ``a`` and large ``w``."""
    return _out(np.asarray(a, dtype=float) + log_erfc(w))


def _check_nu(nu):
    if np.any(np.asarray(nu) <= 0):
        raise ValueError(f"diffusion coefficient must be positive, got {nu!r}")


def heat_kernel(nu, t, x):
    """G_nu(t, x) = exp(-x^2 / (2 nu t)) / sqrt(2 pi nu t); zero for t <= 0."""
    _check_nu(nu)
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    with np.errstate(over="ignore", under="ignore"):
        g = np.exp(-np.square(x) / (2.0 * nu * ts)) / np.sqrt(2.0 * np.pi * nu * ts)
    return _out(np.where(pos, g, 0.0))


def log_heat_kernel(nu, t, x):
    _check_nu(nu)
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    lg = -np.square(x) / (2.0 * nu * ts) - 0.5 * np.log(2.0 * np.pi * nu * ts)
    return _out(np.where(pos, lg, -np.inf))


def _check_a(a):
    if np.any(np.asarray(a) <= 0):
        raise ValueError(f"smoothing parameter a must be positive, got {a!r}")


def log_smooth_exp(a, beta, x):
    """Logarithm of E_{a,beta}(x); safe when beta*|x| is far past the exp range."""
    _check_a(a)
    a = np.asarray(a, dtype=float)
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    sa = np.sqrt(a)
    left = -beta * x + _sp.log_ndtr((a * beta - x) / sa)
    right = beta * x + _sp.log_ndtr((a * beta + x) / sa)
    return _out(np.logaddexp(left, right))


def smooth_exp(a, beta, x):
    r"""Gaussian-smoothed version of ``exp(beta*|x|)``.

    ``E_{a,beta}(x) = exp(-beta x) Phi((a beta - x)/sqrt(a)) + exp(beta x) Phi((a beta + x)/sqrt(a))``.
    It equals ``exp(-beta^2 a / 2)`` times the convolution of ``exp(beta |.|)``
    with a centred Gaussian of variance ``a``.
    """
    with np.errstate(over="ignore"):
        return _out(np.exp(log_smooth_exp(a, beta, x)))


def smooth_exp_dx(a, beta, x):
    """First x-derivative of E_{a,beta}."""
    _check_a(a)
    sa = np.sqrt(a)
    return _out(
        -beta * np.exp(-beta * x) * _sp.ndtr((a * beta - x) / sa)
        + beta * np.exp(beta * x) * _sp.ndtr((a * beta + x) / sa)
    )


def smooth_exp_d2x(a, beta, x):
    _check_a(a)
    return _out(
        beta * np.sqrt(2.0 / (np.pi * a)) * np.exp(-(a * a * beta * beta + np.square(x)) / (2.0 * a))
        + beta * beta * smooth_exp(a, beta, x)
    )


def smooth_exp_da(a, beta, x):
    """Derivative of E_{a,beta}(x) with respect to the smoothing parameter a."""
    _check_a(a)
    return _out(beta / np.sqrt(2.0 * np.pi * a) * np.exp(-(a * a * beta * beta + np.square(x)) / (2.0 * a)))
