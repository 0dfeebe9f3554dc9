"""Closed-form integral identities checked against adaptive quadrature.

Each check draws random parameters, evaluates the closed form and an
independent quadrature of the defining integral, and records the worst
relative discrepancy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Callable

import numpy as np

from .kernels import KernelContext, h_fn
from .quadrature import (
    QuadConfig,
    integrate_adaptive,
    integrate_endpoint_singular,
    integrate_gaussian_weighted,
)
from .specialfn import erfc, heat_kernel, std_normal_cdf

__all__ = [
    "IdentityCheck",
    "IdentityReport",
    "IDENTITIES",
    "phi_exp_antiderivative",
    "heat_product",
    "shifted_h_heat_time_integral",
    "first_passage_h_integral",
    "delta_correlation_integral",
    "heat_time_integral",
    "heat_overlap_time_integral",
    "heat_time_convolution",
    "verify_identities",
]

_QC = QuadConfig(rel_tol=1e-11, abs_tol=0.0, max_subdivisions=4000)


@dataclass
class IdentityCheck:
    name: str
    draws: list = field(default_factory=list)
    max_rel_error: float = 0.0
    tol: float = 1e-6

    def add(self, params: dict, closed: float, numeric: float):
        closed, numeric = float(closed), float(numeric)
        params = {k: float(v) for k, v in params.items()}
        scale = max(abs(closed), abs(numeric), 1e-300)
        rel = abs(closed - numeric) / scale
        self.draws.append({"params": params, "closed": closed, "quadrature": numeric, "rel_error": rel})
        self.max_rel_error = max(self.max_rel_error, rel)

    @property
    def passed(self) -> bool:
        return bool(self.draws) and bool(self.max_rel_error <= self.tol)

    def summary(self) -> dict:
        return {
            "identity": self.name,
            "draws": len(self.draws),
            "max_rel_error": self.max_rel_error,
            "tol": self.tol,
            "passed": self.passed,
        }


@dataclass
class IdentityReport:
    checks: list[IdentityCheck]
    seed: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> IdentityCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "passed": self.passed, "checks": [c.summary() for c in self.checks]}


# closed forms ---------------------------------------------------------------


def phi_exp_antiderivative(b: float, t: float) -> float:
    """``pi int_0^t e^{pi b^2 u} Phi(sqrt(2 pi b^2 u)) du`` for ``b > 0``."""
    if not b > 0:
        raise ValueError("closed form holds for b > 0 only")
    c = math.pi * b * b * t
    return math.exp(c) * float(std_normal_cdf(math.sqrt(2 * c))) / b**2 - 0.5 / b**2 - math.sqrt(t) / b


def heat_product(nu: float, t: float, x: float, s: float, y: float) -> float:
    """``G(t,x) G(s,y)`` rewritten as ``G(ts/(t+s), (sx+ty)/(t+s)) G(t+s, x-y)``."""
    return float(heat_kernel(nu, t * s / (t + s), (s * x + t * y) / (t + s)) * heat_kernel(nu, t + s, x - y))


def shifted_h_heat_time_integral(nu: float, lam: float, t: float, x: float) -> float:
    """``int_0^t (H(r) + 1) G_{2nu}(t-r, x) dr``."""
    lam2 = lam * lam
    d = abs(x)
    sq = 2.0 * math.sqrt(nu * t)
    ex = (lam2 * lam2 * t - 2 * lam2 * d) / (4 * nu)
    return (math.exp(ex) * float(erfc((d - lam2 * t) / sq)) - float(erfc(d / sq))) / lam2


def first_passage_h_integral(nu: float, t: float, x: float) -> float:
    """``int_0^t |x| (pi nu r^3)^{-1/2} e^{-x^2/4nu r + (t-r)/4nu} Phi(sqrt((t-r)/2nu)) dr``, ``x != 0``."""
    d = abs(x)
    return math.exp((t - 2 * d) / (4 * nu)) * float(erfc((d - t) / math.sqrt(4 * nu * t)))


def delta_correlation_integral(nu: float, t: float, x: float, y: float) -> float:
    """Evaluated historical delta-data correlation integral at unit coupling."""
    d = abs(x - y)
    gg = float(heat_kernel(nu, t, x) * heat_kernel(nu, t, y))
    tail = math.exp((t - 2 * d) / (4 * nu)) * float(erfc((d - t) / math.sqrt(4 * nu * t)))
    return gg + float(heat_kernel(nu / 2, t, 0.5 * (x + y))) * tail / (4 * nu)


def heat_time_integral(nu: float, t: float, tau: float, x: float) -> float:
    """``int_t^tau G_nu(r, x) dr``."""
    d = abs(x)
    # Phi(a) - Phi(b) written as upper-tail differences to avoid cancellation
    val = 2 * tau * float(heat_kernel(nu, tau, d))
    upper_t = 0.0
    if t > 0:
        val -= 2 * t * float(heat_kernel(nu, t, d))
        upper_t = float(std_normal_cdf(-d / math.sqrt(nu * t)))
    return val + 2 * d / nu * (upper_t - float(std_normal_cdf(-d / math.sqrt(nu * tau))))


def heat_overlap_time_integral(nu: float, t: float, tau: float, x: float, y: float) -> float:
    """``int_0^t dr int dz G(t-r, x-z) G(tau-r, y-z)``; ``Phi(d/0) = 1`` at ``tau = t``."""
    d = abs(x - y)
    gap = tau - t
    upper_gap = 0.0 if gap == 0 else float(std_normal_cdf(-d / math.sqrt(nu * gap)))
    val = d / nu * (upper_gap - float(std_normal_cdf(-d / math.sqrt(nu * (tau + t)))))
    val += (tau + t) * float(heat_kernel(nu, tau + t, d))
    if gap > 0:
        val -= gap * float(heat_kernel(nu, gap, d))
    return val


def heat_time_convolution(nu: float, sigma: float, t: float, x: float, y: float) -> float:
    """``int_0^t G_nu(r, x) G_sigma(t-r, y) dr``."""
    arg = (abs(x) / math.sqrt(nu) + abs(y) / math.sqrt(sigma)) / math.sqrt(2 * t)
    return float(erfc(arg)) / (2 * math.sqrt(nu * sigma))


# quadrature oracles ---------------------------------------------------------


def _check_phi_exp(rng, n, qc):
    chk = IdentityCheck("phi_exp_antiderivative")
    for _ in range(n):
        b, t = rng.uniform(0.1, 1.5), rng.uniform(0.05, 3.0)
        c = math.pi * b * b

        def f(u):
            return math.pi * np.exp(c * u) * std_normal_cdf(np.sqrt(2 * c * u))

        chk.add({"b": b, "t": t}, phi_exp_antiderivative(b, t), integrate_adaptive(f, 0.0, t, qc)[0])
    return chk


def _check_heat_product(rng, n, qc):
    chk = IdentityCheck("heat_product")
    for _ in range(n):
        nu = rng.uniform(0.2, 3.0)
        t, s = rng.uniform(0.1, 3.0, size=2)
        x, y = rng.uniform(-2.0, 2.0, size=2)
        p = {"nu": nu, "t": t, "s": s, "x": x, "y": y}
        lhs = float(heat_kernel(nu, t, x) * heat_kernel(nu, s, y))
        chk.add(p, heat_product(nu, t, x, s, y), lhs)
        sq = float(heat_kernel(nu, t, x)) ** 2
        chk.add(p, float(heat_kernel(nu / 2, t, x)) / math.sqrt(4 * math.pi * nu * t), sq)
        # the factored form integrated over y gives back G(t, x)
        num = integrate_gaussian_weighted(
            lambda yy: heat_kernel(nu, t * s / (t + s), (s * x + t * yy) / (t + s)), x, nu * (t + s), qc
        )
        chk.add(p, float(heat_kernel(nu, t, x)), num)
    return chk


def _check_shifted_h(rng, n, qc):
    chk = IdentityCheck("shifted_h_heat_time_integral")
    for _ in range(n):
        nu, lam = rng.uniform(0.3, 3.0), rng.uniform(0.3, 2.0)
        t, x = rng.uniform(0.1, 3.0), rng.uniform(-2.0, 2.0)
        ctx = KernelContext(nu, lam)

        def f(r):
            r = np.asarray(r)
            return (h_fn(ctx, r) + 1.0) * heat_kernel(2 * nu, np.maximum(t - r, 1e-300), x)

        num = integrate_endpoint_singular(f, 0.0, t, qc, left=False, right=True)
        chk.add({"nu": nu, "lam": lam, "t": t, "x": x}, shifted_h_heat_time_integral(nu, lam, t, x), num)
    return chk


def _check_first_passage(rng, n, qc):
    chk = IdentityCheck("first_passage_h_integral")
    for _ in range(n):
        nu, t = rng.uniform(0.3, 3.0), rng.uniform(0.1, 3.0)
        x = rng.choice([-1.0, 1.0]) * rng.uniform(0.05, 2.0)
        d = abs(x)

        def f(r):
            r = np.maximum(np.asarray(r, dtype=float), 1e-300)
            return (
                d / np.sqrt(math.pi * nu * r**3)
                * np.exp(-d * d / (4 * nu * r) + (t - r) / (4 * nu))
                * std_normal_cdf(np.sqrt(np.maximum(t - r, 0.0) / (2 * nu)))
            )

        num = integrate_adaptive(f, 0.0, t, qc, breakpoints=[t * k for k in (0.01, 0.1, 0.5)])[0]
        chk.add({"nu": nu, "t": t, "x": x}, first_passage_h_integral(nu, t, x), num)
    return chk


def _check_delta_correlation(rng, n, qc):
    chk = IdentityCheck("delta_correlation_integral")
    for _ in range(n):
        nu, t = rng.uniform(0.3, 3.0), rng.uniform(0.1, 3.0)
        x = rng.uniform(-2.0, 2.0)
        y = x + rng.choice([-1.0, 1.0]) * rng.uniform(0.05, 2.0)
        d = abs(x - y)
        pref = math.exp(-(x * x + y * y) / (2 * nu * t)) / (2 * math.pi * nu * t)

        def f(s):
            s = np.clip(np.asarray(s, dtype=float), 1e-300, 1.0)
            one = np.maximum(1.0 - s, 1e-300)
            core = d / math.sqrt(4 * math.pi * nu * t) / np.sqrt(s**3 * one)
            core = core * np.exp(-d * d / (4 * nu * t) * (1 - s) / s)
            bump = 1.0 + np.sqrt(math.pi * t * (1 - s) / nu) * np.exp(t * (1 - s) / (4 * nu)) * std_normal_cdf(
                np.sqrt(t * (1 - s) / (2 * nu))
            )
            return pref * core * bump

        num = integrate_endpoint_singular(f, 0.0, 1.0, qc, left=False, right=True)
        chk.add({"nu": nu, "t": t, "x": x, "y": y}, delta_correlation_integral(nu, t, x, y), num)
    return chk


def _check_heat_time(rng, n, qc):
    chk = IdentityCheck("heat_time_integrals")
    for i in range(n):
        nu = rng.uniform(0.3, 3.0)
        t = rng.uniform(0.05, 2.0)
        tau = t if i % 4 == 0 else t + rng.uniform(0.05, 2.0)
        x, y = rng.uniform(-2.0, 2.0, size=2)
        p = {"nu": nu, "t": t, "tau": tau, "x": x, "y": y}
        inner_qc = QuadConfig(qc.rel_tol, 1e-30, qc.max_subdivisions)
        if tau > t:
            num = integrate_adaptive(lambda r: heat_kernel(nu, r, x), t, tau, qc)[0]
            chk.add(p, heat_time_integral(nu, t, tau, x), num)

        def inner(r):
            out = np.empty(np.shape(r))
            for k, rr in enumerate(np.atleast_1d(r)):
                a, b = t - rr, tau - rr
                if a <= 0:
                    out[k] = 0.0 if b <= 0 else float(heat_kernel(nu, b, y - x))
                    continue
                out[k] = integrate_gaussian_weighted(lambda z: heat_kernel(nu, b, y - z), x, nu * a, inner_qc)
            return out

        num = integrate_endpoint_singular(inner, 0.0, t, qc, left=False, right=True)
        chk.add(p, heat_overlap_time_integral(nu, t, tau, x, y), num)
    return chk


def _check_time_convolution(rng, n, qc):
    chk = IdentityCheck("heat_time_convolution")
    for i in range(n):
        nu, sigma = rng.uniform(0.3, 3.0, size=2)
        t = rng.uniform(0.1, 3.0)
        x = 0.0 if i % 5 == 0 else rng.uniform(-2.0, 2.0)
        y = rng.uniform(-2.0, 2.0)

        def f(r):
            r = np.asarray(r, dtype=float)
            return heat_kernel(nu, np.maximum(r, 1e-300), x) * heat_kernel(sigma, np.maximum(t - r, 1e-300), y)

        num = integrate_endpoint_singular(f, 0.0, t, qc)
        closed = heat_time_convolution(nu, sigma, t, x, y)
        chk.add({"nu": nu, "sigma": sigma, "t": t, "x": x, "y": y}, closed, num)
        if x == 0.0 and closed > math.sqrt(math.pi * t / (2 * nu)) * float(heat_kernel(sigma, t, y)) * (1 + 1e-12):
            chk.max_rel_error = math.inf
    return chk


IDENTITIES: dict[str, Callable] = {
    "phi_exp_antiderivative": _check_phi_exp,
    "heat_product": _check_heat_product,
    "shifted_h_heat_time_integral": _check_shifted_h,
    "first_passage_h_integral": _check_first_passage,
    "delta_correlation_integral": _check_delta_correlation,
    "heat_time_integrals": _check_heat_time,
    "heat_time_convolution": _check_time_convolution,
}


def verify_identities(draws: int = 20, seed: int = 20240601, tol: float = 1e-6, names=None) -> IdentityReport:
    """Run the identity checks; each uses its own child stream of ``seed``."""
    if draws < 1:
        raise ValueError("draws must be positive")
    names = list(IDENTITIES) if names is None else list(names)
    seeds = np.random.SeedSequence(seed).spawn(len(IDENTITIES))
    checks = []
    for key, ss in zip(IDENTITIES, seeds):
        if key not in names:
            continue
        chk = IDENTITIES[key](np.random.default_rng(ss), draws, _QC)
        chk.tol = tol
        checks.append(chk)
    return IdentityReport(checks, seed)
