from __future__ import annotations

import logging

import numpy as np

from .distributions import RngStream, SpdMatrix, gamma_sample, mvn_sample
from .errors import ConstraintError, DomainError, MatrixError
from .likelihood import Dataset
from .model import AlphaParams, ModelSpec, delta_from_alpha

logger = logging.getLogger(__name__)


def simulate_dataset(spec: ModelSpec, truth: AlphaParams, n: int, rng: RngStream) -> Dataset:
    """Draw n rows through the stochastic representation Y = xi + omega U V^{-1/2}.

    (Z, X) is jointly Gaussian with unit variance for Z, correlation Omega for
    X and cross-covariance delta; U = X when Z >= 0 and -X otherwise.
    V ~ Gamma(nu/2, nu/2) for heavy-tailed models and V = 1 otherwise;
    delta = 0 for the symmetric models.
    """
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    p = truth.sigma.dim
    omega = truth.omega
    omega_corr = truth.omega_corr
    delta = delta_from_alpha(truth.alpha, omega_corr) if spec.skewed else np.zeros(p)

    joint = np.empty((p + 1, p + 1))
    joint[0, 0] = 1.0
    joint[0, 1:] = delta
    joint[1:, 0] = delta
    joint[1:, 1:] = omega_corr.entries
    try:
        joint_cov = SpdMatrix.from_array(joint, symmetrize=True)
    except MatrixError as exc:
        raise ConstraintError("delta lies outside the skewness ellipsoid") from exc

    draws = mvn_sample(np.zeros(p + 1), joint_cov, rng, size=n)
    u = np.where(draws[:, :1] >= 0.0, draws[:, 1:], -draws[:, 1:])
    if spec.heavy_tailed:
        if not (np.isfinite(truth.nu) and truth.nu > 0):
            raise ConstraintError(f"heavy-tailed simulation needs a finite positive nu, got {truth.nu!r}")
        v = gamma_sample(0.5 * truth.nu, 0.5 * truth.nu, rng, size=n)
    else:
        v = np.ones(n)
    y = truth.xi[None, :] + omega[None, :] * u / np.sqrt(v)[:, None]
    logger.debug("simulated %d rows from the %s model", n, spec.name.value)
    return Dataset.from_array(y)
