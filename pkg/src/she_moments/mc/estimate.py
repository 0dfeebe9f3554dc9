"""Replicated simulation and moment / correlation estimates."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import json
import math

import numpy as np

from ..correlations import CorrelationQuery, two_point_exact
from ..measures import j0
from ..moments import second_moment_exact
from .backend import get_runner
from .config import MCConfig
from .lattice import lattice_mean, lattice_second_moment, lattice_two_point

__all__ = [
    "MCEstimate",
    "replication_rng",
    "simulate_path",
    "sample_points",
    "estimate_moment",
    "estimate_two_point",
]


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    replications: int
    seed: int
    config_hash: str = ""
    discretization_bias: float | None = None

    def within(self, target: float, k_sigma: float = 3.0, rel: float = 0.0) -> bool:
        """``|value - target| <= max(k_sigma stderr, rel |target|)``."""
        return abs(self.value - target) <= max(k_sigma * self.stderr, rel * abs(target))

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "replications": self.replications,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "discretization_bias": self.discretization_bias,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def replication_rng(master_seed: int, rep: int) -> np.random.Generator:
    """Stream of replication ``rep``: PCG64 seeded by ``SeedSequence(master_seed, spawn_key=(rep,))``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=(int(rep),))))


def _run(cfg: MCConfig, rep: int, steps, nodes, backend):
    run = get_runner(backend)
    knots, vals, slopes = cfg.rho.arrays()
    steps = np.asarray(steps, dtype=np.int64)
    return run(
        cfg.initial_field(),
        int(steps.max()) if steps.size else 0,
        0.5 * cfg.courant,
        math.sqrt(cfg.dt / cfg.dx),
        cfg.rho.mode,
        float(cfg.rho.lam),
        float(cfg.rho.varsigma) ** 2,
        knots,
        vals,
        slopes,
        steps,
        np.asarray(nodes, dtype=np.int64),
        replication_rng(cfg.master_seed, rep),
    )


def simulate_path(cfg: MCConfig, replication_index: int, times=None, backend: str | None = None):
    """Full-field snapshots ``(times, fields)`` of one replication; default time is ``t_end``."""
    times = [cfg.t_end] if times is None else list(times)
    steps = sorted(set(cfg.step_of(t) for t in times))
    fields = _run(cfg, replication_index, steps, np.arange(cfg.n_nodes), backend)
    return np.array(steps) * cfg.dt, fields


def sample_points(cfg: MCConfig, points, backend: str | None = None) -> np.ndarray:
    """``u(t_i, x_i)`` for every replication, shape ``(replications, len(points))``.

    Replications run concurrently on ``cfg.workers`` threads; each writes its
    own row, so the result does not depend on the worker count.
    """
    for t, x in points:
        cfg.check_buffer(x, t)
    steps = [cfg.step_of(t) for t, _ in points]
    nodes = [cfg.node_of(x) for _, x in points]
    ustep = sorted(set(steps))
    unode = sorted(set(nodes))
    si = [ustep.index(s) for s in steps]
    ni = [unode.index(n) for n in nodes]
    out = np.empty((cfg.replications, len(points)))

    def one(rep):
        rec = _run(cfg, rep, ustep, unode, backend)
        out[rep] = rec[si, ni]

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            list(ex.map(one, range(cfg.replications)))
    else:
        for rep in range(cfg.replications):
            one(rep)
    return out


def _summarize(samples: np.ndarray, cfg: MCConfig, bias) -> MCEstimate:
    n = samples.size
    value = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return MCEstimate(value, stderr, n, int(cfg.master_seed), cfg.config_hash(), bias)


def _snap(cfg: MCConfig, t: float, x: float) -> tuple[float, float]:
    return cfg.step_of(t) * cfg.dt, float(cfg.nodes[cfg.node_of(x)])


def estimate_moment(
    cfg: MCConfig, p: int, t: float, x: float, backend: str | None = None, with_bias: bool = True
) -> MCEstimate:
    """Sample mean of ``u(t, x)^p`` at the nearest grid point.

    With ``with_bias`` (p = 1 or 2, quasi-linear noise) the deterministic gap
    between the scheme's exact moment and the continuum formula is attached.
    """
    if int(p) != p or p < 1:
        raise ValueError("p must be a positive integer")
    samples = sample_points(cfg, [(t, x)], backend)[:, 0] ** int(p)
    bias = None
    if with_bias and p in (1, 2) and cfg.rho.kind == "quasi-linear":
        ts, xs = _snap(cfg, t, x)
        if p == 1:
            bias = float(lattice_mean(cfg, t)[cfg.node_of(x)] - j0(cfg.mu, cfg.nu, ts, xs))
        elif not cfg.mu.is_zero or cfg.rho.varsigma > 0:
            exact = second_moment_exact(cfg.rho.model_params(cfg.nu), cfg.mu, ts, xs)
            bias = lattice_second_moment(cfg, t, x) - exact
    return _summarize(samples, cfg, bias)


def estimate_two_point(
    cfg: MCConfig, q: CorrelationQuery, backend: str | None = None, with_bias: bool = True
) -> MCEstimate:
    """Sample mean of ``u(t, x) u(tau, y)``; both values come from the same path."""
    s = sample_points(cfg, [(q.t, q.x), (q.tau, q.y)], backend)
    bias = None
    if with_bias and cfg.rho.kind == "quasi-linear":
        t, x = _snap(cfg, q.t, q.x)
        tau, y = _snap(cfg, q.tau, q.y)
        exact = two_point_exact(cfg.rho.model_params(cfg.nu), cfg.mu, CorrelationQuery(t, x, tau, y))
        bias = lattice_two_point(cfg, q.t, q.x, q.tau, q.y) - exact
    return _summarize(s[:, 0] * s[:, 1], cfg, bias)
