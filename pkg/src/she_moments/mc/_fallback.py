"""Pure numpy explicit Euler stepper, bit-identical to the compiled kernel."""
from __future__ import annotations

import numpy as np

RHO_LINEAR, RHO_QUASI, RHO_TABLE = 0, 1, 2


def _rho(u, mode, lam, sig2, knots, vals, slopes):
    if mode == RHO_LINEAR:
        return lam * u
    if mode == RHO_QUASI:
        return lam * np.sqrt(sig2 + u * u)
    k = np.clip(np.searchsorted(knots, u, side="right") - 1, 0, len(knots) - 2)
    return vals[k] + slopes[k] * (u - knots[k])


def run_path(u0, n_steps, r, noise_scale, mode, lam, sig2, knots, vals, slopes, record_steps, record_nodes, generator):
    """Advance ``u0`` by ``n_steps`` and return the field at the recorded (step, node) pairs."""
    record_steps = np.asarray(record_steps, dtype=np.int64)
    record_nodes = np.asarray(record_nodes, dtype=np.int64)
    if mode == RHO_TABLE and len(knots) < 2:
        raise ValueError("rho table needs at least two knots")
    a = np.array(u0, dtype=np.float64, copy=True)
    a[0] = a[-1] = 0.0
    b = np.zeros_like(a)
    out = np.empty((len(record_steps), len(record_nodes)))
    ri = 0
    while ri < len(record_steps) and record_steps[ri] == 0:
        out[ri] = a[record_nodes]
        ri += 1
    m = len(a) - 2
    for n in range(n_steps):
        if ri == len(record_steps):
            break
        xi = generator.standard_normal(m)
        mid = a[1:-1]
        lap = (a[2:] - 2.0 * mid) + a[:-2]
        b[1:-1] = (mid + r * lap) + (_rho(mid, mode, lam, sig2, knots, vals, slopes) * xi) * noise_scale
        a, b = b, a
        while ri < len(record_steps) and record_steps[ri] == n + 1:
            out[ri] = a[record_nodes]
            ri += 1
    return out
