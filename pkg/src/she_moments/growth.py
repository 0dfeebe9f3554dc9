"""Exponential growth indices: analytic bounds and a scan over propagation speeds."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import io
import json
import math
from typing import Sequence

import numpy as np

from .measures import InitialMeasure
from .moments import ModelParams, log_pth_moment_upper, log_second_moment_exact
from .quadrature import AccuracyError

__all__ = [
    "GrowthScan",
    "GrowthResult",
    "MonotonicityError",
    "ScanRangeError",
    "lower_index_bound",
    "upper_index_bound",
    "pam_exact_index",
    "growth_rate_profile",
    "trend_limit",
    "empirical_index",
    "index_monotonicity_check",
]


class MonotonicityError(AccuracyError):
    """The moment is not monotone in ``|x|`` beyond ``alpha t``; the scan refuses."""


class ScanRangeError(AccuracyError):
    """The trend does not change sign inside the scanned speed range."""


def lower_index_bound(params: ModelParams) -> float:
    """``lip_lower^2 / 2``, or ``inf`` when the lower noise floor ``vlow`` is nonzero."""
    if params.lip_lower is None:
        raise ValueError("lip_lower not supplied")
    if (params.vlow or 0.0) != 0.0:
        return math.inf
    return params.lip_lower**2 / 2.0


def upper_index_bound(params: ModelParams, beta: float) -> float:
    """Upper bound on the upper growth index for data decaying like ``e^{-beta |x|}``.

    p = 2: ``beta nu/2 + L^4/(8 nu beta)`` below ``beta = L^2/(2 nu)``, else ``L^2/2``.
    p > 2: ``beta nu/2 + z^4 L^4/(2 nu beta)`` below ``beta = z^2 L^2/nu``, else ``z^2 L^2``.
    """
    if params.vbar != 0:
        raise ValueError("upper index bound needs vbar = 0")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    nu, L = params.nu, params.lip_upper
    if L == 0:
        return 0.0
    if params.p == 2:
        if beta < L * L / (2 * nu):
            return beta * nu / 2 + L**4 / (8 * nu * beta)
        return L * L / 2
    z = params.zp
    if beta < z * z * L * L / nu:
        return beta * nu / 2 + z**4 * L**4 / (2 * nu * beta)
    return z * z * L * L


def pam_exact_index(nu: float, lam: float, beta: float) -> float:
    """Second-moment growth index of the PAM started from ``e^{-beta|x|} dx``."""
    if not nu > 0 or not beta > 0:
        raise ValueError("nu and beta must be positive")
    if lam == 0:
        raise ValueError("lam must be nonzero")
    lam2 = lam * lam
    if beta <= lam2 / (2 * nu):
        return beta * nu / 2 + lam2 * lam2 / (8 * beta * nu)
    return lam2 / 2


@dataclass
class GrowthScan:
    """Settings of an empirical index scan.

    ``s(t, alpha) = log E|u(t, alpha t)|^p / t`` is evaluated on ``t_grid``;
    the last ``fit_points`` times feed the trend fit.
    """

    t_grid: Sequence[float] = (50.0, 100.0, 150.0, 200.0, 300.0, 400.0, 500.0)
    alpha_range: tuple[float, float] = (0.05, 3.0)
    p: int = 2
    bracket_rel_tol: float = 0.02
    fit_points: int = 5
    coarse_points: int = 12
    monotone_points: int = 16
    workers: int = 1

    def __post_init__(self):
        tg = np.asarray(self.t_grid, dtype=float)
        if tg.ndim != 1 or tg.size < 3 or np.any(tg <= 0) or np.any(np.diff(tg) <= 0):
            raise ValueError("t_grid must hold at least 3 increasing positive times")
        self.t_grid = tuple(float(t) for t in tg)
        lo, hi = self.alpha_range
        if not 0 <= lo < hi:
            raise ValueError("alpha_range must satisfy 0 <= lo < hi")
        if self.p < 2 or self.p % 2:
            raise ValueError("p must be an even integer >= 2")
        if not 0 < self.bracket_rel_tol < 1:
            raise ValueError("bracket_rel_tol must be in (0, 1)")
        self.fit_points = min(max(self.fit_points, 3), len(self.t_grid))


@dataclass
class GrowthResult:
    alpha_star: float
    bracket: tuple[float, float]
    p: int
    params: dict
    rows: list = field(default_factory=list)
    exact_moments: bool = True

    def to_json(self) -> str:
        d = {
            "alpha_star": self.alpha_star if math.isfinite(self.alpha_star) else "inf",
            "bracket": [b if math.isfinite(b) else "inf" for b in self.bracket],
            "p": self.p,
            "params": self.params,
            "exact_moments": self.exact_moments,
        }
        return json.dumps(d, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "t", "s_value"])
        for a, t, s in sorted(self.rows):
            w.writerow([repr(a), repr(t), repr(s)])
        return buf.getvalue()


def _log_moment_p(params: ModelParams, mu: InitialMeasure, p: int, t: float, x: float) -> tuple[float, bool]:
    if p == 2 and params.is_quasi_linear:
        return log_second_moment_exact(params, mu, t, x), True
    # only an upper bound on ||u||_p^2 is available
    return 0.5 * p * log_pth_moment_upper(params.with_p(p), mu, t, x), False


def growth_rate_profile(params: ModelParams, mu: InitialMeasure, alpha: float, scan: GrowthScan) -> np.ndarray:
    """``s(t, alpha)`` on the scan grid, the larger of the two points ``x = +-alpha t``."""
    out = []
    for t in scan.t_grid:
        a, _ = _log_moment_p(params, mu, scan.p, t, alpha * t)
        b, _ = _log_moment_p(params, mu, scan.p, t, -alpha * t)
        v = max(a, b) / t
        if not math.isfinite(v):
            raise AccuracyError(f"non-finite growth rate at t={t}, alpha={alpha}")
        out.append(v)
    return np.array(out)


def trend_limit(t, s) -> float:
    """Large-t limit of ``s`` by least squares on ``s_inf + a log(t)/t + b/t``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    A = np.column_stack([np.ones_like(t), np.log(t) / t, 1.0 / t])
    coef, *_ = np.linalg.lstsq(A, s, rcond=None)
    return float(coef[0])


def _assert_monotone(params, mu, alpha, t, scan):
    span = max(alpha * t, 4.0 * math.sqrt(params.nu * t))
    xs = alpha * t + np.linspace(0.0, span, scan.monotone_points)
    for sign in (1.0, -1.0):
        vals = [_log_moment_p(params, mu, scan.p, t, sign * x)[0] for x in xs]
        steps = np.diff(vals)
        slack = 1e-9 * np.maximum(1.0, np.abs(vals[1:]))
        if np.any(steps > slack):
            k = int(np.argmax(steps - slack))
            raise MonotonicityError(
                f"moment increases in |x| beyond alpha t at t={t}: x={sign * xs[k]:.6g} -> {sign * xs[k + 1]:.6g}"
            )


def empirical_index(params: ModelParams, mu: InitialMeasure, scan: GrowthScan | None = None) -> GrowthResult:
    """Locate the speed where the large-time trend of ``s(t, alpha)`` changes sign.

    A coarse pass over ``alpha_range`` finds a sign change, then bisection
    narrows it to ``bracket_rel_tol`` of the midpoint.  Every evaluated speed
    first passes a monotonicity check of the moment in ``|x|`` at the largest
    time, which justifies replacing the supremum over ``|x| >= alpha t`` by the
    value at ``alpha t``.
    """
    scan = scan or GrowthScan()
    ts = np.array(scan.t_grid)
    fit_t = ts[-scan.fit_points :]
    rows: list = []
    exact = scan.p == 2 and params.is_quasi_linear
    cache: dict[float, float] = {}

    def trend(alpha: float) -> float:
        if alpha in cache:
            return cache[alpha]
        _assert_monotone(params, mu, alpha, ts[-1], scan)
        s = growth_rate_profile(params, mu, alpha, scan)
        rows.extend((alpha, float(t), float(v)) for t, v in zip(ts, s))
        cache[alpha] = trend_limit(fit_t, s[-scan.fit_points :])
        return cache[alpha]

    lo, hi = scan.alpha_range
    grid = [float(a) for a in np.linspace(lo, hi, scan.coarse_points)]
    if scan.workers > 1:
        with ThreadPoolExecutor(max_workers=scan.workers) as ex:
            vals = list(ex.map(trend, grid))
    else:
        vals = [trend(a) for a in grid]
    info = asdict(params)
    if vals[-1] > 0:
        if (params.vlow or 0.0) > 0 and all(v > 0 for v in vals):
            return GrowthResult(math.inf, (hi, math.inf), scan.p, info, rows, exact)
        raise ScanRangeError(f"trend still positive at alpha={hi}; widen alpha_range")
    if vals[0] <= 0:
        raise ScanRangeError(f"trend already nonpositive at alpha={lo}; lower alpha_range")
    k = next(i for i, v in enumerate(vals) if v <= 0)
    a, b = grid[k - 1], grid[k]
    while b - a > scan.bracket_rel_tol * 0.5 * (a + b):
        m = 0.5 * (a + b)
        if trend(m) > 0:
            a = m
        else:
            b = m
    return GrowthResult(0.5 * (a + b), (a, b), scan.p, info, rows, exact)


def index_monotonicity_check(
    params: ModelParams, beta: float, p_list: Sequence[int] = (2, 4, 6, 8)
) -> dict:
    """Upper index bounds over ``p_list`` must be nondecreasing; lower bounds are constant."""
    ps = sorted(int(p) for p in p_list)
    uppers = [upper_index_bound(params.with_p(p), beta) for p in ps]
    lowers = [lower_index_bound(params.with_p(p)) for p in ps] if params.lip_lower is not None else []
    ok_upper = all(b >= a for a, b in zip(uppers, uppers[1:]))
    ok_lower = all(v == lowers[0] for v in lowers)
    return {
        "p": ps,
        "upper": uppers,
        "lower": lowers,
        "upper_nondecreasing": ok_upper,
        "lower_constant": ok_lower,
        "passed": ok_upper and ok_lower,
    }
