"""Sampling strategies for estimating the sliced Wasserstein distance.

The estimate of ``SW2^2(mu, nu)`` is the average, over a set of unit
directions, of the squared 1-D Wasserstein distance between the projected
measures. This package generates those directions (i.i.d., orthonormal
frames, Halton/Sobol mapped to the sphere, Fibonacci, Riesz, SSW), estimates
with them, adds a spherical-harmonic control-variate estimator, and provides
discrepancy diagnostics and a benchmark harness.
"""

from .control_variates import build_basis, count_harmonics, shcv_estimate
from .diagnostics import (
    cap_l2_discrepancy,
    cap_max_discrepancy_approx,
    confidence_interval,
    fit_loglog_slope,
    rqmc_aggregate,
    sigma_hat,
    star_discrepancy,
)
from .errors import ConfigError, DataError, SWError
from .harness import augment_diagrams, convergence_sweep, distance_matrix, gen_gaussian_pair, two_dirac_case
from .ot1d import EstimateResult, f_eval, f_values, sw2_estimate, w2_squared_1d, w2_squared_circle_to_uniform
from .samplers import sample
from .sphere import DirectionSet, PointCloud, SamplerSpec, make_rng

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "DirectionSet",
    "EstimateResult",
    "PointCloud",
    "SWError",
    "SamplerSpec",
    "augment_diagrams",
    "build_basis",
    "cap_l2_discrepancy",
    "cap_max_discrepancy_approx",
    "confidence_interval",
    "convergence_sweep",
    "count_harmonics",
    "distance_matrix",
    "f_eval",
    "f_values",
    "fit_loglog_slope",
    "gen_gaussian_pair",
    "make_rng",
    "rqmc_aggregate",
    "sample",
    "shcv_estimate",
    "sigma_hat",
    "star_discrepancy",
    "sw2_estimate",
    "two_dirac_case",
    "w2_squared_1d",
    "w2_squared_circle_to_uniform",
]
