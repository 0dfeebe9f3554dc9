"""Regenerate ``frozen.json``: reference values from mpmath and QUADPACK.

    python3 tests/oracles/generate.py

Nothing from ``she_moments`` is imported here, so these numbers are an
independent check of the package's closed forms and quadrature.  One-layer
integrals use mpmath at 30 digits; nested space-time integrals use
``scipy.integrate.quad`` in double precision.
"""
import json
import math
from pathlib import Path

import mpmath as mp
from scipy import integrate

mp.mp.dps = 30
OUT = Path(__file__).with_name("frozen.json")


def G(nu, t, x):
    return mp.exp(-x * x / (2 * nu * t)) / mp.sqrt(2 * mp.pi * nu * t)


def Phi(x):
    return mp.ncdf(x)


def K(nu, lam, t, x):
    l2 = lam * lam
    return G(nu / 2, t, x) * (l2 / mp.sqrt(4 * mp.pi * nu * t) + l2 * l2 / (2 * nu) * mp.exp(l2 * l2 * t / (4 * nu)) * Phi(l2 * mp.sqrt(t / (2 * nu))))


def L0(nu, lam, t, x):
    return lam * lam * G(nu, t, x) ** 2


def H(nu, lam, t):
    l2 = lam * lam
    return 2 * mp.exp(l2 * l2 * t / (4 * nu)) * Phi(l2 * mp.sqrt(t / (2 * nu))) - 1


def Ln_series(nu, lam, t, x, n_max):
    b = lam * lam / mp.sqrt(4 * mp.pi * nu)
    return G(nu / 2, t, x) * mp.fsum(
        (b * mp.sqrt(mp.pi)) ** (n + 1) * t ** (mp.mpf(n - 1) / 2) / mp.gamma(mp.mpf(n + 1) / 2) for n in range(n_max + 1)
    )


def _g(nu, t, x):
    return math.exp(-x * x / (2 * nu * t)) / math.sqrt(2 * math.pi * nu * t)


def _k(nu, lam, t, x):
    return float(K(nu, lam, mp.mpf(t), mp.mpf(x)))


def conv_space_time(f, g, t, x, peaks):
    """int_0^t ds int dy f(s, y) g(t - s, x - y), nested QUADPACK."""

    def inner(s):
        pts = sorted(set(peaks + [x]))
        lo, hi = pts[0] - 12.0, pts[-1] + 12.0
        return integrate.quad(lambda y: f(s, y) * g(t - s, x - y), lo, hi, points=pts, epsabs=0, epsrel=1e-13, limit=400)[0]

    return sum(integrate.quad(inner, a, b, epsabs=0, epsrel=1e-12, limit=400)[0] for a, b in ((0, t / 2), (t / 2, t)))


def main():
    out = {}

    out["phi_1"] = mp.quad(lambda y: mp.exp(-y * y / 2) / mp.sqrt(2 * mp.pi), [-40, 0, 1])
    out["erfcx_50"] = mp.exp(mp.mpf(2500)) * mp.erfc(50)
    out["erfcx_50_asymptotic"] = 1 / (mp.sqrt(mp.pi) * 50)

    nu, t, beta, x = 1, 1, mp.mpf("0.5"), mp.mpf("0.7")
    out["smooth_exp_convolution"] = mp.exp(-beta**2 * nu * t / 2) * mp.quad(
        lambda z: mp.exp(beta * abs(z)) * G(nu, t, x - z), [-mp.inf, 0, x, mp.inf]
    )

    out["sqrt_weight_exp"] = mp.quad(lambda s: mp.exp(-s) / mp.sqrt(s), [0, 1])
    beta, a = mp.mpf("0.8"), mp.mpf("1.5")
    out["gauss_exp_abs"] = mp.quad(lambda z: mp.exp(beta * abs(z)) * G(1, a, z), [-mp.inf, 0, mp.inf])

    out["l0_unit"] = L0(1, 1, 1, 0)
    l0 = lambda s, y: _g(1, s, y) ** 2
    out["l1_quadrature"] = conv_space_time(l0, l0, 0.5, 0.3, [0.0])
    out["k_series_40"] = Ln_series(1, 1, 1, mp.mpf("0.5"), 40)
    out["k_closed"] = K(1, 1, 1, mp.mpf("0.5"))
    out["h_quadrature"] = integrate.quad(
        lambda s: integrate.quad(lambda y: _k(1, 1, s, y), -30, 30, points=[0.0], epsabs=0, epsrel=1e-13)[0],
        0,
        1,
        epsabs=0,
        epsrel=1e-12,
    )[0]
    out["h_closed"] = H(1, 1, 1)
    out["h_half"] = H(1, 1, mp.mpf("0.5"))
    out["k_half_origin"] = K(1, 1, mp.mpf("0.5"), 0)

    beta, t, x = mp.mpf("0.7"), mp.mpf("0.5"), mp.mpf("0.3")
    out["exp_density_j0"] = mp.quad(lambda z: mp.exp(-beta * abs(z)) * G(1, t, x - z), [-mp.inf, 0, x, mp.inf])

    # signed piecewise-linear density through these nodes, zero outside
    pts = [mp.mpf(v) for v in ("-1", "-0.25", "0.5", "1.5")]
    vals = [mp.mpf(v) for v in ("0", "2", "-1", "0")]
    zero = pts[1] + (pts[2] - pts[1]) * vals[1] / (vals[1] - vals[2])

    def dens(z):
        for (p0, v0), (p1, v1) in zip(zip(pts, vals), zip(pts[1:], vals[1:])):
            if p0 <= z <= p1:
                return v0 + (v1 - v0) * (z - p0) / (p1 - p0)
        return mp.mpf(0)

    t, x = mp.mpf("0.3"), mp.mpf("0.2")
    brk = pts[:2] + [zero] + pts[2:]
    out["grid_j0"] = mp.quad(lambda z: dens(z) * G(1, t, x - z), brk)
    out["grid_j0_star"] = mp.quad(lambda z: abs(dens(z)) * G(1, t, x - z), brk)

    # two atoms: J_0 = G(s, y) + 0.5 G(s, y - 1)
    t, x = mp.mpf("0.6"), mp.mpf("0.4")
    out["two_atom_conv"] = conv_space_time(
        lambda s, y: (_g(1, s, y) + 0.5 * _g(1, s, y - 1)) ** 2,
        lambda s, y: _k(1, 1, s, y),
        0.6,
        0.4,
        [0.0, 1.0],
    )
    out["two_atom_j0"] = G(1, t, x) + mp.mpf("0.5") * G(1, t, x - 1)

    d, tb = mp.mpf("0.5"), mp.mpf(1)
    out["two_point_lebesgue"] = 1 + (
        mp.exp((tb - 2 * d) / 4) * mp.erfc((d - tb) / (2 * mp.sqrt(tb))) - mp.erfc(d / (2 * mp.sqrt(tb)))
    )
    t, x, y = mp.mpf("0.5"), mp.mpf("0.2"), mp.mpf("-0.3")
    d = abs(x - y)
    out["two_point_delta"] = G(1, t, x) * G(1, t, y) + G(mp.mpf("0.5"), t, (x + y) / 2) / 4 * mp.exp(
        (t - 2 * d) / 4
    ) * mp.erfc((d - t) / (2 * mp.sqrt(t)))
    out["bc_discrepancy_unit"] = -mp.erf(mp.mpf("0.5"))

    t, x = 1, mp.mpf("0.2")
    out["delta_contrast_limit"] = Ln_series(1, 1, t, x, 1) - Ln_series(1, 1, t, x, 0)

    OUT.write_text(json.dumps({k: mp.nstr(mp.mpf(v), 20) for k, v in out.items()}, indent=1, sort_keys=True) + "\n")
    for k, v in sorted(out.items()):
        print(f"{k:28s} {mp.nstr(mp.mpf(v), 17)}")


if __name__ == "__main__":
    main()
