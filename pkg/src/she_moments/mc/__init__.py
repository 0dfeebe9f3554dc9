"""Monte Carlo cross-check: explicit finite differences driven by discretized white noise."""
from .backend import DEFAULT_BACKEND, available_backends, get_runner
from .config import ConfigError, MCConfig, RhoSpec
from .estimate import (
    MCEstimate,
    estimate_moment,
    estimate_two_point,
    replication_rng,
    sample_points,
    simulate_path,
)
from .lattice import lattice_covariances, lattice_mean, lattice_second_moment, lattice_two_point

__all__ = [
    "DEFAULT_BACKEND",
    "available_backends",
    "get_runner",
    "ConfigError",
    "MCConfig",
    "RhoSpec",
    "MCEstimate",
    "estimate_moment",
    "estimate_two_point",
    "replication_rng",
    "sample_points",
    "simulate_path",
    "lattice_covariances",
    "lattice_mean",
    "lattice_second_moment",
    "lattice_two_point",
]
