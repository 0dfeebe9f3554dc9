"""Exact first and second moments of the discrete scheme itself.

For quasi-linear noise the covariance of the explicit scheme obeys a closed
recursion ``C <- A C A^T + diag(lam^2 (varsigma^2 + diag C) dt/dx)``.
Comparing it with the continuum formulas separates discretization bias from
sampling noise.
"""
from __future__ import annotations

import numpy as np

from ..measures import Lebesgue
from .config import MCConfig

__all__ = ["lattice_mean", "lattice_covariances", "lattice_second_moment", "lattice_two_point"]


def _apply_rows(c: np.ndarray, r: float) -> np.ndarray:
    out = np.zeros_like(c)
    out[1:-1] = c[1:-1] + r * ((c[2:] - 2.0 * c[1:-1]) + c[:-2])
    return out


def _stencil_into(src: np.ndarray, dst: np.ndarray, w: np.ndarray, r: float) -> None:
    """``dst = A src`` along axis 0, with zero boundary rows; ``w`` is scratch."""
    np.multiply(src[1:-1], -2.0, out=w)
    w += src[2:]
    w += src[:-2]
    w *= r
    w += src[1:-1]
    dst[1:-1] = w
    dst[0] = 0.0
    dst[-1] = 0.0


def _step_cov(c, r, q, work):
    """In place ``C <- A C A^T + noise``; uses ``A C A^T = A (A C)^T`` for symmetric C."""
    b, bt, w = work
    d = np.diagonal(c)[1:-1].copy()
    _stencil_into(c, b, w, r)
    np.copyto(bt, b.T)
    _stencil_into(bt, c, w, r)
    idx = np.arange(1, c.shape[0] - 1)
    c[idx, idx] += q[0] * (q[1] + d)


def _noise_coeffs(cfg: MCConfig):
    if cfg.rho.kind != "quasi-linear":
        raise ValueError("lattice oracle needs quasi-linear noise")
    return cfg.rho.lam**2 * cfg.dt / cfg.dx, cfg.rho.varsigma**2


def lattice_mean(cfg: MCConfig, t: float) -> np.ndarray:
    """``E[u]`` on the grid at the step nearest ``t`` (the discrete heat flow)."""
    r = 0.5 * cfg.courant
    u = cfg.initial_field()
    for _ in range(cfg.step_of(t)):
        u = _apply_rows(u[:, None], r)[:, 0]
    return u


def lattice_covariances(cfg: MCConfig, steps) -> dict[int, np.ndarray]:
    """Full second-moment matrices ``E[u_j u_k]`` at the requested step counts."""
    r = 0.5 * cfg.courant
    q = _noise_coeffs(cfg)
    u0 = cfg.initial_field()
    c = np.outer(u0, u0)
    work = (np.empty_like(c), np.empty_like(c), np.empty((c.shape[0] - 2, c.shape[1])))
    want = sorted(set(int(s) for s in steps))
    out = {}
    n = 0
    for s in want:
        while n < s:
            _step_cov(c, r, q, work)
            n += 1
        out[s] = c.copy()
    return out


def _homogeneous_lags(cfg: MCConfig, n_steps: int, scale: float) -> np.ndarray:
    """Excess ``E[u_j u_{j+m}] - scale^2`` on the infinite lattice; lag 0 sits at the centre."""
    r = 0.5 * cfg.courant
    q0, s2 = _noise_coeffs(cfg)
    a = np.array([r, 1.0 - 2.0 * r, r])
    k2 = np.convolve(a, a)
    mid = n_steps + 2
    d = np.zeros(2 * mid + 1)
    for _ in range(n_steps):
        nxt = np.convolve(d, k2, mode="same")
        nxt[mid] += q0 * (s2 + scale * scale + d[mid])
        d = nxt
    return d


def _lebesgue_scale(cfg: MCConfig) -> float | None:
    comps = cfg.mu.components
    if len(comps) == 1 and isinstance(comps[0], Lebesgue):
        return comps[0].scale
    return None


def lattice_second_moment(cfg: MCConfig, t: float, x: float) -> float:
    """``E[u(t,x)^2]`` of the scheme at the grid point nearest ``(t, x)``."""
    n = cfg.step_of(t)
    scale = _lebesgue_scale(cfg)
    if scale is not None:
        # translation invariant up to the (negligible, buffered) boundary
        d = _homogeneous_lags(cfg, n, scale)
        return float(scale * scale + d[len(d) // 2])
    j = cfg.node_of(x)
    return float(lattice_covariances(cfg, [n])[n][j, j])


def lattice_two_point(cfg: MCConfig, t: float, x: float, tau: float, y: float) -> float:
    """``E[u(t,x) u(tau,y)]`` of the scheme; later noise is independent of ``u(t, .)``."""
    n, m = cfg.step_of(t), cfg.step_of(tau)
    if m < n:
        raise ValueError("need tau >= t")
    j, k = cfg.node_of(x), cfg.node_of(y)
    r = 0.5 * cfg.courant
    scale = _lebesgue_scale(cfg)
    if scale is not None:
        d = _homogeneous_lags(cfg, n, scale)
        a = np.array([r, 1.0 - 2.0 * r, r])
        for _ in range(m - n):
            d = np.convolve(d, a)
        lag = k - j
        centre = len(d) // 2
        excess = d[centre + lag] if 0 <= centre + lag < len(d) else 0.0
        return float(scale * scale + excess)
    c = lattice_covariances(cfg, [n])[n]
    for _ in range(m - n):
        c = _apply_rows(c, r)
    return float(c[k, j])
