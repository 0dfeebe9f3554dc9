"""Monte Carlo run configuration: grid, noise coefficient, initial field."""
from __future__ import annotations

from dataclasses import dataclass, field
import hashlib
import json
import math

import numpy as np

from ..measures import Atom, ExpDensity, GridDensity, InitialMeasure, Lebesgue, measure_from_json, measure_to_json
from ..moments import ModelParams

__all__ = ["ConfigError", "RhoSpec", "MCConfig"]


class ConfigError(ValueError):
    """Invalid Monte Carlo configuration (stability, buffer, grid)."""


@dataclass(frozen=True)
class RhoSpec:
    """Noise coefficient ``rho``.

    ``quasi-linear``: ``rho(u) = lam u`` when ``varsigma = 0``, else
    ``lam sqrt(varsigma^2 + u^2)``.  ``table``: piecewise-linear through
    ``(knots, values)`` with linear extrapolation.
    """

    kind: str = "quasi-linear"
    lam: float = 1.0
    varsigma: float = 0.0
    knots: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("quasi-linear", "table"):
            raise ConfigError(f"unknown rho kind {self.kind!r}")
        if self.varsigma < 0:
            raise ConfigError("varsigma must be nonnegative")
        if self.kind == "table":
            k = np.asarray(self.knots, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if k.ndim != 1 or k.shape != v.shape or k.size < 2 or np.any(np.diff(k) <= 0):
                raise ConfigError("rho table needs >= 2 strictly increasing knots with matching values")
            object.__setattr__(self, "knots", tuple(float(x) for x in k))
            object.__setattr__(self, "values", tuple(float(x) for x in v))

    @property
    def mode(self) -> int:
        if self.kind == "table":
            return 2
        return 0 if self.varsigma == 0 else 1

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self.kind != "table":
            z = np.zeros(2)
            return z, z.copy(), z.copy()
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        s = np.diff(v) / np.diff(k)
        return k, v, np.append(s, s[-1])

    def lipschitz(self) -> float:
        if self.kind == "table":
            k, v, s = self.arrays()
            return float(np.max(np.abs(s)))
        return abs(self.lam)

    def model_params(self, nu: float) -> ModelParams | None:
        """Quasi-linear parameters for the exact-moment oracle; ``None`` for tables."""
        if self.kind == "table":
            return None
        return ModelParams.quasi_linear(nu, self.lam, self.varsigma)

    def to_dict(self) -> dict:
        if self.kind == "table":
            return {"kind": "table", "knots": list(self.knots), "values": list(self.values)}
        return {"kind": self.kind, "lam": self.lam, "varsigma": self.varsigma}

    @classmethod
    def from_dict(cls, d: dict) -> "RhoSpec":
        kind = d.get("kind", "quasi-linear")
        if kind == "table":
            return cls("table", knots=tuple(d["knots"]), values=tuple(d["values"]))
        return cls(kind, float(d.get("lam", 1.0)), float(d.get("varsigma", 0.0)))


@dataclass(frozen=True)
class MCConfig:
    """Explicit finite-difference simulation on ``[-L, L]`` with Dirichlet-zero ends.

    The scheme needs ``nu dt / dx^2 <= 1``.  Queried points must keep
    ``buffer_sigmas * sqrt(nu t)`` away from the boundary.
    """

    half_width: float
    dx: float
    dt: float
    t_end: float
    replications: int
    master_seed: int
    nu: float = 1.0
    rho: RhoSpec = field(default_factory=RhoSpec)
    mu: InitialMeasure = field(default_factory=InitialMeasure.lebesgue)
    buffer_sigmas: float = 6.0
    workers: int = 1

    def __post_init__(self):
        for name in ("half_width", "dx", "dt", "t_end", "nu", "buffer_sigmas"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {v!r}")
        if int(self.replications) < 1:
            raise ConfigError("replications must be positive")
        if int(self.workers) < 1:
            raise ConfigError("workers must be positive")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.courant > 1.0 + 1e-12:
            raise ConfigError(f"unstable: nu*dt/dx^2 = {self.courant:.6g} > 1")
        n = 2.0 * self.half_width / self.dx
        if abs(n - round(n)) > 1e-9 * n or round(n) < 4:
            raise ConfigError("2*half_width must be an integer multiple (>= 4) of dx")
        self.check_buffer(0.0, self.t_end)

    @property
    def courant(self) -> float:
        return self.nu * self.dt / self.dx**2

    @property
    def n_nodes(self) -> int:
        return int(round(2.0 * self.half_width / self.dx)) + 1

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n_nodes)

    def check_buffer(self, x: float, t: float) -> None:
        need = abs(x) + self.buffer_sigmas * math.sqrt(self.nu * t)
        if self.half_width < need - 1e-12:
            raise ConfigError(
                f"domain half-width {self.half_width} < |x| + {self.buffer_sigmas} sqrt(nu t) = {need:.6g}"
            )

    def step_of(self, t: float) -> int:
        if not 0 <= t <= self.t_end * (1 + 1e-12):
            raise ConfigError(f"t={t} outside [0, t_end={self.t_end}]")
        return int(round(t / self.dt))

    def node_of(self, x: float) -> int:
        j = int(round((x + self.half_width) / self.dx))
        if not 0 < j < self.n_nodes - 1:
            raise ConfigError(f"x={x} is not an interior grid point")
        return j

    def initial_field(self) -> np.ndarray:
        """Nodal values of the initial data; atoms become mass/dx at the nearest node."""
        z = self.nodes
        u = np.zeros_like(z)
        for c in self.mu.components:
            if isinstance(c, Lebesgue):
                u += c.scale
            elif isinstance(c, Atom):
                j = int(round((c.location + self.half_width) / self.dx))
                if 0 <= j < len(z):
                    u[j] += c.mass / self.dx
            elif isinstance(c, ExpDensity):
                u += c.scale * np.exp(c.rate * np.abs(z))
            elif isinstance(c, GridDensity):
                u += c.density(z)
        u[0] = u[-1] = 0.0
        return u

    def to_dict(self) -> dict:
        return {
            "half_width": self.half_width,
            "dx": self.dx,
            "dt": self.dt,
            "t_end": self.t_end,
            "replications": int(self.replications),
            "master_seed": int(self.master_seed),
            "nu": self.nu,
            "rho": self.rho.to_dict(),
            "mu": measure_to_json(self.mu),
            "buffer_sigmas": self.buffer_sigmas,
        }

    @classmethod
    def from_dict(cls, d: dict, workers: int = 1) -> "MCConfig":
        mu = d.get("mu", {"components": [{"kind": "lebesgue", "scale": 1.0}]})
        return cls(
            half_width=float(d["half_width"]),
            dx=float(d["dx"]),
            dt=float(d["dt"]),
            t_end=float(d["t_end"]),
            replications=int(d["replications"]),
            master_seed=int(d["master_seed"]),
            nu=float(d.get("nu", 1.0)),
            rho=RhoSpec.from_dict(d.get("rho", {})),
            mu=measure_from_json(mu),
            buffer_sigmas=float(d.get("buffer_sigmas", 6.0)),
            workers=workers,
        )

    @classmethod
    def from_json(cls, text: str, workers: int = 1) -> "MCConfig":
        return cls.from_dict(json.loads(text), workers)

    def config_hash(self) -> str:
        """Hash of everything that determines the sampled values (not ``workers``)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]
