"""Two-sample test for equality of high-dimensional covariance matrices
under elliptical models, built on unbiased trace U-statistics."""
from .procedure import DegenerateScaleError, TestOutcome, run_test
from .ustat import ShapeError, TraceEstimates, t_statistic, u_statistic, v_statistic
from .variance import (
    PopulationPair,
    RadialMoments,
    gamma_n_squared,
    sigma_hat_null,
    sigma_n_squared,
    sigma_null_squared,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateScaleError",
    "PopulationPair",
    "RadialMoments",
    "ShapeError",
    "TestOutcome",
    "TraceEstimates",
    "gamma_n_squared",
    "run_test",
    "sigma_hat_null",
    "sigma_n_squared",
    "sigma_null_squared",
    "t_statistic",
    "u_statistic",
    "v_statistic",
]
