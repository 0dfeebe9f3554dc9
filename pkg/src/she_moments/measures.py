"""Signed initial measures and the homogeneous heat flow they generate.

A measure is a finite sum of components: scaled Lebesgue measure, point
masses, densities ``c * exp(s |x|)`` and piecewise-linear densities on a grid.

Most second-moment quantities have the form

    int int mu(dz1) mu(dz2) g(z1 - z2) G_nu(w, m - (z1 + z2)/2)

for an even function ``g`` of the separation.  :func:`pair_integral` evaluates
that form component pair by component pair, in closed form where the pair
allows it and by quadrature otherwise.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import json
import math
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtr

from .kernels import KernelContext, h_fn, l0, kernel_k, log_time_overlap, time_factor, time_overlap
from .quadrature import DEFAULT, QuadConfig, integrate_adaptive, integrate_endpoint_singular
from .specialfn import (
    _out,
    heat_kernel,
    log_heat_kernel,
    log_ndtr_diff,
    log_smooth_exp,
    smooth_exp,
    std_normal_pdf,
)

__all__ = [
    "Lebesgue",
    "Atom",
    "ExpDensity",
    "GridDensity",
    "InitialMeasure",
    "PairKernel",
    "gauss_pair_kernel",
    "overlap_pair_kernel",
    "pair_integral",
    "log_pair_integral",
    "j0",
    "log_j0",
    "j0_star",
    "j0_squared_conv_kernel",
    "log_j0_squared_conv_kernel",
    "parse_measure",
    "measure_from_json",
    "measure_to_json",
    "grid_from_csv",
]


@dataclass(frozen=True)
class Lebesgue:
    scale: float = 1.0
    kind = "lebesgue"


@dataclass(frozen=True)
class Atom:
    location: float = 0.0
    mass: float = 1.0
    kind = "atom"


@dataclass(frozen=True)
class ExpDensity:
    """Density ``scale * exp(rate * |x|)``; ``rate < 0`` decays, ``rate > 0`` grows."""

    rate: float
    scale: float = 1.0
    kind = "exp"


@dataclass(frozen=True)
class GridDensity:
    """Piecewise-linear density through ``(points[i], values[i])``, zero outside."""

    points: tuple
    values: tuple
    kind = "grid"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if pts.ndim != 1 or pts.shape != vals.shape or pts.size < 2:
            raise ValueError("grid density needs matching 1-D points/values with at least 2 nodes")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(vals))):
            raise ValueError("grid density contains non-finite entries")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", tuple(float(p) for p in pts))
        object.__setattr__(self, "values", tuple(float(v) for v in vals))

    @property
    def support(self) -> tuple[float, float]:
        return self.points[0], self.points[-1]

    def density(self, z):
        z = np.asarray(z, dtype=float)
        v = np.interp(z, self.points, self.values)
        return np.where((z >= self.points[0]) & (z <= self.points[-1]), v, 0.0)

    def absolute(self) -> "GridDensity":
        """|density|, with nodes inserted at sign changes so interpolation stays exact."""
        pts, vals = [self.points[0]], [abs(self.values[0])]
        for (p0, v0), (p1, v1) in zip(zip(self.points, self.values), zip(self.points[1:], self.values[1:])):
            if v0 * v1 < 0:
                zc = p0 + (p1 - p0) * v0 / (v0 - v1)
                # a crossing that rounds onto a node is dropped; |v| there is below one ulp of the slope
                if p0 < zc < p1:
                    pts.append(zc)
                    vals.append(0.0)
            pts.append(p1)
            vals.append(abs(v1))
        return GridDensity(tuple(pts), tuple(vals))


Component = Union[Lebesgue, Atom, ExpDensity, GridDensity]


def _abs_component(c: Component) -> Component:
    if isinstance(c, Lebesgue):
        return Lebesgue(abs(c.scale))
    if isinstance(c, Atom):
        return Atom(c.location, abs(c.mass))
    if isinstance(c, ExpDensity):
        return ExpDensity(c.rate, abs(c.scale))
    return c.absolute()


_ADMISSIBILITY_RATES = (0.01, 0.1, 1.0)


@dataclass(frozen=True)
class InitialMeasure:
    components: tuple = field(default_factory=tuple)

    def __post_init__(self):
        comps = tuple(self.components)
        for c in comps:
            if not isinstance(c, (Lebesgue, Atom, ExpDensity, GridDensity)):
                raise TypeError(f"unsupported measure component {c!r}")
        object.__setattr__(self, "components", comps)
        self.check_admissible()

    # construction helpers
    @classmethod
    def delta(cls, location: float = 0.0, mass: float = 1.0) -> "InitialMeasure":
        return cls((Atom(location, mass),))

    @classmethod
    def lebesgue(cls, scale: float = 1.0) -> "InitialMeasure":
        return cls((Lebesgue(scale),))

    @classmethod
    def exp_density(cls, rate: float, scale: float = 1.0) -> "InitialMeasure":
        return cls((ExpDensity(rate, scale),))

    def __add__(self, other: "InitialMeasure") -> "InitialMeasure":
        return InitialMeasure(self.components + other.components)

    def absolute(self) -> "InitialMeasure":
        return InitialMeasure(tuple(_abs_component(c) for c in self.components))

    @property
    def is_nonnegative(self) -> bool:
        for c in self.components:
            if isinstance(c, Lebesgue) and c.scale < 0:
                return False
            if isinstance(c, Atom) and c.mass < 0:
                return False
            if isinstance(c, ExpDensity) and c.scale < 0:
                return False
            if isinstance(c, GridDensity) and min(c.values) < 0:
                return False
        return True

    @property
    def is_zero(self) -> bool:
        for c in self.components:
            if isinstance(c, Lebesgue) and c.scale != 0:
                return False
            if isinstance(c, Atom) and c.mass != 0:
                return False
            if isinstance(c, ExpDensity) and c.scale != 0:
                return False
            if isinstance(c, GridDensity) and any(v != 0 for v in c.values):
                return False
        return True

    def gaussian_mass(self, a: float) -> float:
        """``int exp(-a x^2) |mu|(dx)``."""
        total = 0.0
        for c in map(_abs_component, self.components):
            if isinstance(c, Lebesgue):
                total += c.scale * math.sqrt(math.pi / a)
            elif isinstance(c, Atom):
                total += c.mass * math.exp(-a * c.location**2)
            elif isinstance(c, ExpDensity):
                # int exp(s|x| - a x^2) dx = 2 sqrt(pi/a) e^{s^2/4a} Phi(s / sqrt(2a))
                total += c.scale * 2.0 * math.sqrt(math.pi / a) * math.exp(
                    c.rate**2 / (4 * a) + float(log_ndtr(c.rate / math.sqrt(2 * a)))
                )
            else:
                pts = np.asarray(c.points)
                total += integrate_adaptive(
                    lambda z: c.density(z) * np.exp(-a * z * z), pts[0], pts[-1], breakpoints=pts
                )[0]
        return total

    def check_admissible(self) -> None:
        for c in self.components:
            vals = [getattr(c, f) for f in ("scale", "location", "mass", "rate") if hasattr(c, f)]
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"non-finite parameter in {c!r}")
        for a in _ADMISSIBILITY_RATES:
            m = self.gaussian_mass(a)
            if not math.isfinite(m):
                raise ValueError(f"measure is not admissible: int exp(-{a} x^2)|mu|(dx) = {m}")

    @property
    def exp_integrability_rate(self) -> float:
        """``sup{s : int exp(s |x|) |mu|(dx) < inf}``; ``inf`` for compact support."""
        rate = math.inf
        for c in self.components:
            if isinstance(c, Lebesgue) and c.scale != 0:
                rate = min(rate, 0.0)
            elif isinstance(c, ExpDensity) and c.scale != 0:
                rate = min(rate, -c.rate)
        return rate

    def in_exp_class(self, beta: float) -> bool:
        """Whether ``int exp(beta |x|) |mu|(dx)`` is finite."""
        return beta < self.exp_integrability_rate or math.isinf(self.exp_integrability_rate)


# ---------------------------------------------------------------------------
# homogeneous solution


def _grid_segment_terms(c: GridDensity, var, x):
    """Segment integrals of the piecewise-linear density against N(x - z; 0, var)."""
    x = np.asarray(x, dtype=float)
    sd = np.sqrt(np.asarray(var, dtype=float))[..., None]
    pts = np.asarray(c.points)
    vals = np.asarray(c.values)
    slope = np.diff(vals) / np.diff(pts)
    icpt = vals[:-1] - slope * pts[:-1]
    xe = x[..., None]
    u = (pts - xe) / sd  # (..., n_nodes)
    cdf = ndtr(u)
    pdf = std_normal_pdf(u)
    # int (A + B z) phi((z - x)/sd)/sd dz over a segment
    return np.sum(
        (icpt + slope * xe) * (cdf[..., 1:] - cdf[..., :-1]) + slope * sd * (pdf[..., :-1] - pdf[..., 1:]),
        axis=-1,
    )


def _component_j0(c: Component, nu: float, t, x):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if isinstance(c, Lebesgue):
        return c.scale * np.ones(np.broadcast(t, x).shape)
    if isinstance(c, Atom):
        return c.mass * heat_kernel(nu, t, x - c.location)
    if isinstance(c, ExpDensity):
        with np.errstate(over="ignore"):
            return c.scale * np.exp(0.5 * c.rate**2 * nu * t + log_smooth_exp(nu * t, c.rate, x))
    t, x = np.broadcast_arrays(t, x)
    return _grid_segment_terms(c, nu * t, x)


def j0(mu: InitialMeasure, nu: float, t, x):
    """Heat flow ``(mu * G_nu(t, .))(x)`` of the initial measure."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    if np.any(np.asarray(t) <= 0):
        raise ValueError("t must be positive")
    total = 0.0
    for c in mu.components:
        total = total + _component_j0(c, nu, t, x)
    return _out(np.asarray(total, dtype=float) + np.zeros(np.broadcast(np.asarray(t), np.asarray(x)).shape))


def log_j0(mu: InitialMeasure, nu: float, t, x):
    """``log J_0`` for nonnegative measures built from Lebesgue, atoms and exp densities."""
    if not mu.is_nonnegative:
        raise ValueError("log-domain J0 requires a nonnegative measure")
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    parts = []
    for c in mu.components:
        if isinstance(c, Lebesgue):
            parts.append(np.log(c.scale) + 0.0 * (t + x))
        elif isinstance(c, Atom):
            parts.append(np.log(c.mass) + log_heat_kernel(nu, t, x - c.location))
        elif isinstance(c, ExpDensity):
            parts.append(np.log(c.scale) + 0.5 * c.rate**2 * nu * t + log_smooth_exp(nu * t, c.rate, x))
        else:
            with np.errstate(divide="ignore"):
                parts.append(np.log(_component_j0(c, nu, t, x)))
    if not parts:
        return _out(np.full(np.broadcast(t, x).shape, -np.inf))
    with np.errstate(divide="ignore"):
        return _out(logsumexp(np.stack(np.broadcast_arrays(*parts)), axis=0))


def j0_star(mu: InitialMeasure, nu: float, t, x):
    """Heat flow of ``|mu|``."""
    return j0(mu.absolute(), nu, t, x)


# ---------------------------------------------------------------------------
# pair integrals


@dataclass(frozen=True)
class PairKernel:
    """An even separation kernel ``g`` with hints for truncating its integrals.

    ``reach`` bounds the support that matters, ``breaks`` lists points where
    ``g`` changes character (peaks, shoulders).  ``log_fn`` is optional.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    reach: float
    breaks: tuple = ()
    log_fn: Callable[[np.ndarray], np.ndarray] | None = None

    def __add__(self, other: "PairKernel") -> "PairKernel":
        f1, f2 = self.fn, other.fn
        lf = None
        if self.log_fn is not None and other.log_fn is not None:
            l1, l2 = self.log_fn, other.log_fn
            lf = lambda d: np.logaddexp(l1(d), l2(d))  # noqa: E731
        return PairKernel(
            lambda d: f1(d) + f2(d),
            max(self.reach, other.reach),
            tuple(sorted(set(self.breaks) | set(other.breaks))),
            lf,
        )

    def all_breaks(self) -> list[float]:
        b = set(self.breaks)
        b |= {-x for x in self.breaks}
        return sorted(x for x in b if -self.reach < x < self.reach)


def gauss_pair_kernel(nu: float, s: float) -> PairKernel:
    """``g(d) = G_{2 nu}(s, d)``: the separation factor of ``J_0^2(s, .)``."""
    sd = math.sqrt(2.0 * nu * s)
    return PairKernel(
        lambda d: heat_kernel(2.0 * nu, s, d),
        40.0 * sd,
        (0.0, sd, 3 * sd, 8 * sd),
        lambda d: log_heat_kernel(2.0 * nu, s, d),
    )


def overlap_pair_kernel(ctx: KernelContext, t: float) -> PairKernel:
    """``g = T(t, .)``, the separation factor of ``J_0^2 * K``."""
    sd = 2.0 * math.sqrt(ctx.nu * t)
    c = ctx.lam2 * t
    return PairKernel(
        lambda d: time_overlap(ctx, t, d),
        c + 40.0 * sd,
        (0.0, 0.5 * sd, sd, 3 * sd, c, c + sd, c + 4 * sd),
        lambda d: log_time_overlap(ctx, t, d),
    )


def _expint_log(k, lo, hi, m, var):
    """``log int_lo^hi exp(k z) N(z; m, var) dz`` (vectorised over k, lo, hi)."""
    sd = math.sqrt(var)
    shift = m + k * var
    return k * m + 0.5 * k * k * var + log_ndtr_diff((hi - shift) / sd, (lo - shift) / sd)


def _exp_params(c) -> tuple[float, float]:
    if isinstance(c, Lebesgue):
        return 0.0, c.scale
    return c.rate, c.scale


def _log_exp_pair_weight(s1, s2, delta, m, var):
    """``log int dzbar exp(s1|zbar + d/2| + s2|zbar - d/2|) N(zbar; m, var)`` for unit scales."""
    a = 0.5 * np.asarray(delta, dtype=float)
    p = np.abs(a)
    pos = a >= 0
    # slopes/offsets of the exponent on (-inf,-p), (-p,p), (p,inf)
    sg1_mid = np.where(pos, 1.0, -1.0)
    sg2_mid = -sg1_mid
    k_lo = -(s1 + s2)
    c_lo = -s1 * a + s2 * a
    k_mid = s1 * sg1_mid + s2 * sg2_mid
    c_mid = s1 * sg1_mid * a - s2 * sg2_mid * a
    k_hi = s1 + s2
    c_hi = s1 * a - s2 * a
    t_lo = c_lo + _expint_log(k_lo + 0 * a, -np.inf, -p, m, var)
    t_mid = c_mid + _expint_log(k_mid, -p, p, m, var)
    t_hi = c_hi + _expint_log(k_hi + 0 * a, p, np.inf, m, var)
    with np.errstate(divide="ignore"):
        return logsumexp(np.stack([t_lo, t_mid, t_hi]), axis=0)


def _log_integrate(logf, lo, hi, breaks=(), n_probe=2049, cfg=None):
    """``log int_lo^hi exp(logf)`` by locating the peak first, then integrating the rescaled integrand."""
    probe = np.unique(np.concatenate([np.linspace(lo, hi, n_probe), [b for b in breaks if lo < b < hi]]))
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = logf(probe)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    mx = float(np.max(vals))
    if not math.isfinite(mx):
        return -math.inf
    i = int(np.argmax(vals))
    # a panel edge at every probe whose value is within reach of the peak keeps the
    # adaptive rule from stepping over narrow features
    live = probe[vals > mx - 60.0]
    bps = set(b for b in breaks if lo < b < hi)
    bps.add(float(probe[i]))
    if live.size:
        bps.update(np.linspace(live[0], live[-1], 17).tolist())
        lo_eff = float(probe[max(np.searchsorted(probe, live[0]) - 1, 0)])
        hi_eff = float(probe[min(np.searchsorted(probe, live[-1]) + 1, probe.size - 1)])
    else:
        lo_eff, hi_eff = lo, hi
    bps = [b for b in bps if lo_eff < b < hi_eff]
    cfg = cfg or QuadConfig(rel_tol=1e-10, abs_tol=1e-300)

    def g(z):
        with np.errstate(over="ignore", invalid="ignore"):
            v = np.exp(logf(z) - mx)
        return np.where(np.isnan(v), 0.0, v)

    val, _ = integrate_adaptive(g, lo_eff, hi_eff, cfg, breakpoints=bps)
    return mx + math.log(val) if val > 0 else -math.inf


def _pair_value(c1, c2, kern: PairKernel, var: float, m: float, cfg: QuadConfig) -> float:
    """``int int c1(dz1) c2(dz2) g(z1 - z2) N(m - zbar; 0, var)``."""
    sd = math.sqrt(var)
    R = kern.reach
    kb = kern.all_breaks()

    def gauss(zbar):
        return np.exp(-0.5 * (m - zbar) ** 2 / var) / (sd * math.sqrt(2 * math.pi))

    if isinstance(c2, Atom) and not isinstance(c1, Atom):
        c1, c2 = c2, c1
    if isinstance(c1, Atom) and isinstance(c2, Atom):
        return float(c1.mass * c2.mass * kern.fn(np.array(c1.location - c2.location)) * gauss(0.5 * (c1.location + c2.location)))
    if isinstance(c1, Atom):
        a = c1.location
        lo, hi = a - R, a + R
        bps = [a + b for b in kb] + [2 * m - a]
        if isinstance(c2, GridDensity):
            lo, hi = max(lo, c2.support[0]), min(hi, c2.support[1])
            bps += list(c2.points)
            dens = c2.density
        else:
            s, sc = _exp_params(c2)
            bps.append(0.0)
            dens = lambda z: sc * np.exp(s * np.abs(z))  # noqa: E731
        if hi <= lo:
            return 0.0
        # the Gaussian factor in z has standard deviation 2 sd about 2m - a
        for k in (-8, -3, -1, 1, 3, 8):
            bps.append(2 * m - a + 2 * k * sd)
        val, _ = integrate_adaptive(
            lambda z: c1.mass * dens(z) * kern.fn(a - z) * gauss(0.5 * (a + z)),
            lo,
            hi,
            cfg,
            breakpoints=[b for b in bps if lo < b < hi],
        )
        return val
    if not isinstance(c1, GridDensity) and not isinstance(c2, GridDensity):
        s1, a1 = _exp_params(c1)
        s2, a2 = _exp_params(c2)
        if a1 == 0 or a2 == 0:
            return 0.0

        def f(d):
            with np.errstate(over="ignore"):
                return kern.fn(d) * np.exp(_log_exp_pair_weight(s1, s2, d, m, var))

        val, _ = integrate_adaptive(f, -R, R, cfg, breakpoints=kb + [2 * m, -2 * m])
        return a1 * a2 * val
    # at least one grid density: outer over the grid support, inner over the partner
    if not isinstance(c1, GridDensity):
        c1, c2 = c2, c1
    glo, ghi = c1.support

    def partner_integral(z1):
        if isinstance(c2, GridDensity):
            lo, hi = max(z1 - R, c2.support[0]), min(z1 + R, c2.support[1])
            dens = c2.density
            bps = list(c2.points)
        else:
            s, sc = _exp_params(c2)
            lo, hi = z1 - R, z1 + R
            dens = lambda z: sc * np.exp(s * np.abs(z))  # noqa: E731
            bps = [0.0]
        if hi <= lo:
            return 0.0
        bps = bps + [z1 - b for b in kb] + [2 * m - z1 + k * sd for k in (-8, -2, 0, 2, 8)]
        return integrate_adaptive(
            lambda z2: dens(z2) * kern.fn(z1 - z2) * gauss(0.5 * (z1 + z2)),
            lo,
            hi,
            cfg,
            breakpoints=[b for b in bps if lo < b < hi],
        )[0]

    val, _ = integrate_adaptive(
        lambda zs: c1.density(zs) * np.array([partner_integral(float(z)) for z in zs]),
        glo,
        ghi,
        cfg,
        breakpoints=list(c1.points),
    )
    return val


def pair_integral(
    mu: InitialMeasure, kern: PairKernel, nu: float, w: float, m: float, cfg: QuadConfig | None = None
) -> float:
    """``int int mu(dz1) mu(dz2) g(z1 - z2) G_nu(w, m - (z1 + z2)/2)``."""
    cfg = cfg or DEFAULT
    var = nu * w
    comps = mu.components
    total = 0.0
    for i, ci in enumerate(comps):
        for j in range(i, len(comps)):
            total += (1.0 if i == j else 2.0) * _pair_value(ci, comps[j], kern, var, m, cfg)
    return total


def log_pair_integral(mu: InitialMeasure, kern: PairKernel, nu: float, w: float, m: float) -> float:
    """Log-domain :func:`pair_integral` for nonnegative measures without grid components.

    Needs ``kern.log_fn``.  Each pair contributes a log term; the terms are
    combined with logsumexp, so arguments far beyond the exp range are fine.
    """
    if kern.log_fn is None:
        raise ValueError("kernel has no log-domain form")
    if not mu.is_nonnegative or any(isinstance(c, GridDensity) for c in mu.components):
        raise ValueError("log-domain pair integral needs a nonnegative measure without grid densities")
    var = nu * w
    sd = math.sqrt(var)
    lnorm = -0.5 * math.log(2 * math.pi * var)
    R = kern.reach
    kb = kern.all_breaks()
    terms = []
    comps = [c for c in mu.components if (getattr(c, "mass", None) or getattr(c, "scale", None))]
    for i, c1 in enumerate(comps):
        for j in range(i, len(comps)):
            c2 = comps[j]
            lmult = 0.0 if i == j else math.log(2.0)
            a_, b_ = (c2, c1) if isinstance(c2, Atom) and not isinstance(c1, Atom) else (c1, c2)
            if isinstance(a_, Atom) and isinstance(b_, Atom):
                zbar = 0.5 * (a_.location + b_.location)
                terms.append(
                    lmult
                    + math.log(a_.mass * b_.mass)
                    + float(kern.log_fn(np.array(a_.location - b_.location)))
                    + lnorm
                    - 0.5 * (m - zbar) ** 2 / var
                )
            elif isinstance(a_, Atom):
                a = a_.location
                s, sc = _exp_params(b_)

                def lf(z, a=a, s=s):
                    return s * np.abs(z) + kern.log_fn(a - z) - 0.5 * (m - 0.5 * (a + z)) ** 2 / var

                lo, hi = a - R - 4 * abs(m - a) - 80 * sd, a + R + 4 * abs(m - a) + 80 * sd
                val = _log_integrate(lf, lo, hi, [0.0, a, 2 * m - a] + [a + b for b in kb])
                terms.append(lmult + math.log(a_.mass * sc) + lnorm + val)
            else:
                s1, a1 = _exp_params(a_)
                s2, a2 = _exp_params(b_)

                def lf(d, s1=s1, s2=s2):
                    return kern.log_fn(d) + _log_exp_pair_weight(s1, s2, d, m, var)

                # separations beyond the kernel reach can still matter when |m| is
                # large: the weight grows with |d| out to about 2|m|
                span = R + 2 * abs(m) + 20 * sd + 8 * (abs(s1) + abs(s2)) * var
                val = _log_integrate(lf, -span, span, kb + [2 * m, -2 * m, 0.0], n_probe=4097)
                terms.append(lmult + math.log(a1 * a2) + val)
    if not terms:
        return -math.inf
    return float(logsumexp(terms))


# ---------------------------------------------------------------------------
# (J_0^2 * K)


def _single(mu: InitialMeasure):
    nz = [c for c in mu.components if (getattr(c, "mass", None) or getattr(c, "scale", None) or isinstance(c, GridDensity))]
    return nz[0] if len(nz) == 1 else None, len(nz)


def j0_squared_conv_kernel(
    mu: InitialMeasure,
    ctx: KernelContext,
    t: float,
    x: float,
    cfg: QuadConfig | None = None,
    route: str = "auto",
) -> float:
    """Space-time convolution ``(J_0^2 * K)(t, x)``.

    ``route`` selects the evaluation: ``"closed"`` (Lebesgue or a single atom
    only), ``"pair"`` (separation integrals against the closed-form time
    overlap T), ``"time"`` (an explicit time integral of ``k(t - s)`` against
    the spatial overlap of ``J_0^2(s, .)``, kept as an independent route).
    ``"auto"`` picks ``closed`` when possible, else ``pair``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    cfg = cfg or DEFAULT
    if ctx.lam == 0 or mu.is_zero:
        return 0.0
    comp, n = _single(mu)
    closed_ok = n == 1 and isinstance(comp, (Lebesgue, Atom))
    if route == "auto":
        route = "closed" if closed_ok else "pair"
    if route == "closed":
        if not closed_ok:
            raise ValueError("closed route needs a single Lebesgue or atom component")
        if isinstance(comp, Lebesgue):
            return comp.scale**2 * float(h_fn(ctx, t))
        d = x - comp.location
        return comp.mass**2 * (float(kernel_k(ctx, t, d)) - float(l0(ctx, t, d))) / ctx.lam2
    if route == "pair":
        return pair_integral(mu, overlap_pair_kernel(ctx, t), ctx.nu, t / 2.0, x, cfg)
    if route == "time":
        return time_route(mu, ctx.nu, lambda r: time_factor(ctx, r), t, x, cfg)
    raise ValueError(f"unknown route {route!r}")


def time_route(mu: InitialMeasure, nu: float, weight: Callable, t: float, x: float, cfg: QuadConfig | None = None) -> float:
    """``int_0^t weight(t - s) Q(s) ds`` with ``Q(s) = int J_0^2(s, y) G_{nu/2}(t - s, x - y) dy``.

    Both ends are integrated with square-root substitutions: ``Q`` may blow up
    like ``s^{-1/2}`` (atoms) and the weight like ``(t-s)^{-1/2}``.
    """
    cfg = cfg or DEFAULT

    def q(s):
        return pair_integral(mu, gauss_pair_kernel(nu, s), nu, t / 2.0, x, cfg)

    def integrand(ss):
        ss = np.atleast_1d(ss)
        return np.array([float(weight(t - s)) * q(float(s)) if 0 < s < t else 0.0 for s in ss])

    return integrate_endpoint_singular(integrand, 0.0, t, cfg)


def log_j0_squared_conv_kernel(mu: InitialMeasure, ctx: KernelContext, t: float, x: float) -> float:
    """``log (J_0^2 * K)(t, x)`` for nonnegative measures without grid densities."""
    if ctx.lam == 0 or mu.is_zero:
        return -math.inf
    comp, n = _single(mu)
    if n == 1 and isinstance(comp, Lebesgue):
        from .kernels import log_h_fn

        return 2 * math.log(comp.scale) + float(log_h_fn(ctx, t))
    if n == 1 and isinstance(comp, Atom):
        # K - L_0 = G_{nu/2} (lam^4/2nu) e^{c} Phi(d)
        d = x - comp.location
        return (
            2 * math.log(comp.mass)
            + float(log_heat_kernel(ctx.nu / 2.0, t, d))
            + math.log(ctx.lam2 / (2.0 * ctx.nu))
            + ctx.rate * t
            + float(log_ndtr(ctx.lam2 * math.sqrt(t / (2.0 * ctx.nu))))
        )
    return log_pair_integral(mu, overlap_pair_kernel(ctx, t), ctx.nu, t / 2.0, x)


# ---------------------------------------------------------------------------
# parsing


def grid_from_csv(path: str | Path) -> GridDensity:
    """Two numeric columns ``x, density``; a non-numeric first row is a header."""
    pts, vals = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                x, v = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if not pts:
                    continue
                raise ValueError(f"bad grid row {row!r} in {path}")
            pts.append(x)
            vals.append(v)
    return GridDensity(tuple(pts), tuple(vals))


def _component_from_dict(d: dict, base: Path | None = None) -> Component:
    kind = str(d.get("kind", "")).lower()
    if kind == "lebesgue":
        return Lebesgue(float(d.get("scale", 1.0)))
    if kind in ("atom", "delta", "dirac"):
        return Atom(float(d.get("location", 0.0)), float(d.get("mass", 1.0)))
    if kind in ("exp", "exp_density", "exp-density"):
        return ExpDensity(float(d["rate"]), float(d.get("scale", 1.0)))
    if kind == "grid":
        if "csv" in d:
            p = Path(d["csv"])
            if base is not None and not p.is_absolute():
                p = base / p
            return grid_from_csv(p)
        return GridDensity(tuple(d["points"]), tuple(d["values"]))
    raise ValueError(f"unknown measure kind {d.get('kind')!r}")


def measure_from_json(doc: dict | str, base: Path | None = None) -> InitialMeasure:
    """Build a measure from ``{"components": [{"kind": ..., ...}, ...]}``."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    comps = doc.get("components")
    if not isinstance(comps, list):
        raise ValueError("measure spec needs a 'components' list")
    return InitialMeasure(tuple(_component_from_dict(c, base) for c in comps))


def measure_to_json(mu: InitialMeasure) -> dict:
    out = []
    for c in mu.components:
        if isinstance(c, Lebesgue):
            out.append({"kind": "lebesgue", "scale": c.scale})
        elif isinstance(c, Atom):
            out.append({"kind": "atom", "location": c.location, "mass": c.mass})
        elif isinstance(c, ExpDensity):
            out.append({"kind": "exp", "rate": c.rate, "scale": c.scale})
        else:
            out.append({"kind": "grid", "points": list(c.points), "values": list(c.values)})
    return {"components": out}


def parse_measure(text: str) -> InitialMeasure:
    """Parse a CLI measure shorthand.

    Accepted forms: ``delta``, ``delta:x0``, ``atom:x0:mass``, ``lebesgue``,
    ``lebesgue:c``, ``exp-decay:beta`` (density ``e^{-beta|x|}``),
    ``exp:rate[:scale]``, ``grid:path.csv``, ``json:path`` or an inline JSON
    document.  Components may be joined with ``+``.
    """
    text = text.strip()
    if text.startswith("{"):
        return measure_from_json(text)
    if "+" in text and not text.startswith(("json:", "grid:")):
        parts = [parse_measure(p) for p in text.split("+")]
        mu = parts[0]
        for p in parts[1:]:
            mu = mu + p
        return mu
    head, _, rest = text.partition(":")
    args = rest.split(":") if rest else []
    head = head.lower()
    try:
        if head in ("delta", "dirac"):
            return InitialMeasure.delta(float(args[0]) if args else 0.0)
        if head == "atom":
            return InitialMeasure.delta(float(args[0]), float(args[1]) if len(args) > 1 else 1.0)
        if head == "lebesgue":
            return InitialMeasure.lebesgue(float(args[0]) if args else 1.0)
        if head == "exp-decay":
            return InitialMeasure.exp_density(-float(args[0]))
        if head == "exp":
            return InitialMeasure.exp_density(float(args[0]), float(args[1]) if len(args) > 1 else 1.0)
        if head == "grid":
            return InitialMeasure((grid_from_csv(rest),))
        if head == "json":
            p = Path(rest)
            return measure_from_json(json.loads(p.read_text()), base=p.parent)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad measure spec {text!r}: {exc}") from exc
    raise ValueError(f"unknown measure kind {head!r}")
