"""Hermite-chaos calculus and Monte Carlo verification of functional
Breuer-Major limit theorems for stationary Gaussian sequences."""

__version__ = "0.1.0"

from .chaos import (
    HermiteExpansion,
    ShiftedExpansion,
    derivative_norm_sq,
    expand,
    hermite_eval,
    neg_L_power,
    ou_semigroup,
    shift_down,
    shift_operator,
)
from .covariance import CovarianceModel, RegimeVerdict, classify_regime, power_sum, rho
from .partial_sum import PartialSumPath, build_Y, build_Z, increments
from .simulate import GaussianPath, simulate, simulate_batch, split
from .stats import (
    ben_hariz_sum,
    critical_sigma_squared,
    fdd_covariance_check,
    hypercontractivity_check,
    ks_normality,
    sigma_squared,
    tightness_diagnostic,
)

__all__ = [
    "CovarianceModel",
    "GaussianPath",
    "HermiteExpansion",
    "PartialSumPath",
    "RegimeVerdict",
    "ShiftedExpansion",
    "ben_hariz_sum",
    "build_Y",
    "build_Z",
    "classify_regime",
    "critical_sigma_squared",
    "derivative_norm_sq",
    "expand",
    "fdd_covariance_check",
    "hermite_eval",
    "hypercontractivity_check",
    "increments",
    "ks_normality",
    "neg_L_power",
    "ou_semigroup",
    "power_sum",
    "rho",
    "shift_down",
    "shift_operator",
    "sigma_squared",
    "simulate",
    "simulate_batch",
    "split",
    "tightness_diagnostic",
]
