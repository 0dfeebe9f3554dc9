"""Exact second moments, two-point correlations and growth indices of the
stochastic heat equation ``u_t = (nu/2) u_xx + rho(u) W`` with measure-valued
initial data, plus a Monte Carlo cross-check."""

__version__ = "0.1.0"

from .correlations import CorrelationQuery, two_point_bounds, two_point_delta, two_point_exact, two_point_lebesgue
from .growth import GrowthScan, empirical_index, lower_index_bound, pam_exact_index, upper_index_bound
from .kernels import KernelContext, h_fn, kernel_k, kernel_series, ln_kernel
from .measures import InitialMeasure, j0, parse_measure
from .moments import ModelParams, log_second_moment_exact, pth_moment_upper, second_moment_exact
from .quadrature import AccuracyError, QuadConfig

__all__ = [
    "__version__",
    "AccuracyError",
    "CorrelationQuery",
    "GrowthScan",
    "InitialMeasure",
    "KernelContext",
    "ModelParams",
    "QuadConfig",
    "empirical_index",
    "h_fn",
    "j0",
    "kernel_k",
    "kernel_series",
    "ln_kernel",
    "log_second_moment_exact",
    "lower_index_bound",
    "pam_exact_index",
    "parse_measure",
    "pth_moment_upper",
    "second_moment_exact",
    "two_point_bounds",
    "two_point_delta",
    "two_point_exact",
    "two_point_lebesgue",
    "upper_index_bound",
]
