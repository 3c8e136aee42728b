"""Objective Bayesian inference for the multivariate skew-t family.

The library fits the Normal, Student-t, skew-normal and skew-t models by
population Monte Carlo, estimates their marginal likelihoods and turns them
into posterior model probabilities. Reports and the command-line surface
live in ``output`` and ``cli`` and are not imported here.
"""

from .errors import (
    ConstraintError,
    DegenerateLatentsError,
    DegeneratePopulationError,
    DomainError,
    MatrixError,
    NumericError,
    ParseError,
    PreconditionError,
    SkewfitError,
)
from .types import IterationDiagnostics, ModelProbability, StudyRow

from .distributions import RngStream, SpdMatrix
from .model import (
    AlphaParams,
    DeltaParams,
    ModelName,
    ModelSpec,
    PriorConfig,
    ThetaParams,
    alpha_from_theta,
    log_prior,
    theta_from_alpha,
    validate_posterior_preconditions,
)
from .likelihood import Dataset, LatentState, augmented_loglik, cml_estimates, observed_loglik, st_logpdf
from .simulate import simulate_dataset
from .pmc import FitResult, PmcEngine, PosteriorSummary, run_pmc
from .compare import Comparison, compare_models, run_study

__all__ = [
    # Errors
    "ConstraintError",
    "DegenerateLatentsError",
    "DegeneratePopulationError",
    "DomainError",
    "MatrixError",
    "NumericError",
    "ParseError",
    "PreconditionError",
    "SkewfitError",
    # Types
    "IterationDiagnostics",
    "ModelProbability",
    "StudyRow",
    # Model
    "RngStream",
    "SpdMatrix",
    "AlphaParams",
    "DeltaParams",
    "ModelName",
    "ModelSpec",
    "PriorConfig",
    "ThetaParams",
    "alpha_from_theta",
    "log_prior",
    "theta_from_alpha",
    "validate_posterior_preconditions",
    # Likelihood
    "Dataset",
    "LatentState",
    "augmented_loglik",
    "cml_estimates",
    "observed_loglik",
    "st_logpdf",
    "simulate_dataset",
    # Inference
    "FitResult",
    "PmcEngine",
    "PosteriorSummary",
    "run_pmc",
    "Comparison",
    "compare_models",
    "run_study",
]
