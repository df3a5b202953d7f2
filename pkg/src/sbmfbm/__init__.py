"""Bayesian inference and model selection for scaled versus fractional Brownian motion."""

__version__ = "0.1.0"

from .errors import NonConvergenceError, NotPositiveDefiniteError, NumericalDomainError, ParameterError
from .likelihood import (
    FBM,
    SBM,
    FbmParams,
    SbmParams,
    dense_gaussian_loglik,
    fbm_autocov,
    fbm_loglik_1d,
    loglik_multidim,
    sbm_increment_covariance,
    sbm_loglik_1d,
    sbm_step_variance,
)
from .nested import NestedConfig, NestedResult, run_nested, weighted_quantile
from .priors import PriorSpec, draw_ground_truth, log_prior_density, unit_to_params
from .simulate import (
    CTRW,
    TrajectoryRecord,
    add_measurement_noise,
    msd_ensemble,
    simulate_ctrw,
    simulate_fbm,
    simulate_sbm,
)
