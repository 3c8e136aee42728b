"""Population Monte Carlo for the skew-t family."""

from .latent import (
    RejectionEnvelope,
    VCondCoeffs,
    beta_star,
    envelope,
    kl_divergence,
    kv_constant,
    log_kv_batch,
    sample_v,
    sample_v_batch,
    vcond_coeffs,
)
from .population import IterationEstimate, Particle, Population, PopulationState
from .proposals import (
    propose_g,
    propose_nu,
    propose_psi,
    propose_xi,
    propose_z,
    zcond_params,
)
from .weights import compute_weights, effective_sample_size, entropy, marginal_likelihood, resample
from .engine import FitResult, PmcEngine, PosteriorSummary, initialize_population, run_pmc

__all__ = [
    # Latent scales
    "RejectionEnvelope",
    "VCondCoeffs",
    "beta_star",
    "envelope",
    "kl_divergence",
    "kv_constant",
    "log_kv_batch",
    "sample_v",
    "sample_v_batch",
    "vcond_coeffs",
    # Population
    "IterationEstimate",
    "Particle",
    "Population",
    "PopulationState",
    # Proposals
    "propose_g",
    "propose_nu",
    "propose_psi",
    "propose_xi",
    "propose_z",
    "zcond_params",
    # Weights
    "compute_weights",
    "effective_sample_size",
    "entropy",
    "marginal_likelihood",
    "resample",
    # Engine
    "FitResult",
    "PmcEngine",
    "PosteriorSummary",
    "initialize_population",
    "run_pmc",
]
