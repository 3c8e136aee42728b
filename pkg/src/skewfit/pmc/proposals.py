"""Conditional proposals for (nu, v, z, xi, psi, G).

Each ``*_batch`` function works on a stack of particles and returns the draws
with their log proposal density per particle. The single-particle functions
wrap them for a ``ThetaParams`` / ``LatentState`` pair.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from ..distributions import (
    LOG_2PI,
    RngStream,
    SpdMatrix,
    batched_cholesky,
    invwishart_logpdf_batch,
    invwishart_sample_batch,
    truncnorm_logpdf_positive,
    truncnorm_positive_batch,
)
from ..errors import DegenerateLatentsError, DomainError, PreconditionError
from ..likelihood import Dataset, LatentState
from ..model import ModelSpec, ThetaParams
from .latent import sample_v_batch, vcond_coeffs_batch
from .population import Population

LOG_HALF = math.log(0.5)
INSUFFICIENT_FOR_G = "n > 2p"


def _chol_logdet(chol: NDArray[np.float64]) -> NDArray[np.float64]:
    return 2.0 * np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1)), axis=-1)


def _gaussian_draw(
    mean: NDArray[np.float64], chol: NDArray[np.float64], precision_scale: NDArray[np.float64], rng: RngStream
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Draw from N(mean, G / s) given chol(G) and s; returns (draws, log densities)."""
    p = mean.shape[-1]
    eps = rng.generator.standard_normal(mean.shape)
    scale = 1.0 / np.sqrt(precision_scale)
    draws = mean + scale[:, None] * np.einsum("kij,kj->ki", chol, eps)
    logdet = _chol_logdet(chol) - p * np.log(precision_scale)
    log_q = -0.5 * (p * LOG_2PI + logdet + np.sum(eps * eps, axis=-1))
    return draws, log_q


def nu_conditional_log_pmf(v: NDArray[np.float64], grid: ArrayLike) -> NDArray[np.float64]:
    """log pi(nu_k | v) on the grid for each row of v (N, n); rows sum to one after exp."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise DomainError("nu grid is empty")
    v = np.atleast_2d(v)
    n = v.shape[-1]
    half = 0.5 * grid[None, :]
    sum_log_v = np.sum(np.log(v), axis=-1)[:, None]
    sum_v = np.sum(v, axis=-1)[:, None]
    logits = n * (half * np.log(half) - special.gammaln(half)) + (half - 1.0) * sum_log_v - half * sum_v
    return logits - special.logsumexp(logits, axis=-1, keepdims=True)


def propose_nu_batch(
    v: NDArray[np.float64], grid: ArrayLike, rng: RngStream
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    grid = np.asarray(grid, dtype=float)
    log_pmf = nu_conditional_log_pmf(v, grid)
    cdf = np.cumsum(np.exp(log_pmf), axis=-1)
    u = rng.generator.random(log_pmf.shape[0])
    idx = np.minimum(np.sum(cdf < (u * cdf[:, -1])[:, None], axis=-1), grid.size - 1)
    rows = np.arange(log_pmf.shape[0])
    return grid[idx], log_pmf[rows, idx]


def propose_nu(v: ArrayLike, grid: ArrayLike, rng: RngStream) -> tuple[float, float]:
    """Exact categorical draw of nu from its full conditional over the grid."""
    nu, log_pmf = propose_nu_batch(np.atleast_1d(np.asarray(v, dtype=float))[None, :], grid, rng)
    return float(nu[0]), float(log_pmf[0])


def propose_v_batch(
    nu: NDArray[np.float64],
    z: NDArray[np.float64],
    xi: NDArray[np.float64],
    psi: NDArray[np.float64],
    g_chol: NDArray[np.float64],
    y: NDArray[np.float64],
    rng: RngStream,
) -> tuple[NDArray[np.float64], NDArray[np.float64], int]:
    """v_i from its full conditional; returns (v, log q per particle, rejection trials)."""
    a, b, c = vcond_coeffs_batch(nu, z, xi, psi, g_chol, y)
    v, log_density, trials = sample_v_batch(a, b, np.broadcast_to(c[:, None], a.shape), rng)
    return v, np.sum(log_density, axis=-1), trials


def zcond_params_batch(
    v: NDArray[np.float64],
    xi: NDArray[np.float64],
    psi: NDArray[np.float64],
    g_chol: NDArray[np.float64],
    y: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """m (N, n) and v_theta (N,) of the truncated normal full conditional of |z_i|."""
    w_psi = np.linalg.solve(g_chol, psi[:, :, None])[:, :, 0]
    w_resid = np.linalg.solve(g_chol, np.swapaxes(y[None, :, :] - xi[:, None, :], -1, -2))
    v_theta = 1.0 / (1.0 + np.sum(w_psi * w_psi, axis=-1))
    cross = np.einsum("ki,kin->kn", w_psi, w_resid)
    m = v_theta[:, None] * np.sqrt(v) * cross
    return m, v_theta


def zcond_params(theta: ThetaParams, v_i: float, y_i: ArrayLike) -> tuple[float, float]:
    g = theta.g_spd()
    y_i = np.atleast_1d(np.asarray(y_i, dtype=float))
    m, v_theta = zcond_params_batch(np.array([[v_i]]), theta.xi[None, :], theta.psi[None, :], g.chol[None], y_i[None, :])
    return float(m[0, 0]), float(v_theta[0])


def propose_z_batch(
    v: NDArray[np.float64],
    xi: NDArray[np.float64],
    psi: NDArray[np.float64],
    g_chol: NDArray[np.float64],
    y: NDArray[np.float64],
    rng: RngStream,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """z_i = S_i Z+_i with a fair sign S_i and Z+_i ~ N(m_i, v_theta) truncated to (0, inf)."""
    m, v_theta = zcond_params_batch(v, xi, psi, g_chol, y)
    sd = np.broadcast_to(np.sqrt(v_theta)[:, None], m.shape)
    magnitude = truncnorm_positive_batch(m, sd, rng)
    sign = np.where(rng.generator.random(m.shape) < 0.5, -1.0, 1.0)
    log_q = np.sum(LOG_HALF + truncnorm_logpdf_positive(magnitude, m, sd), axis=-1)
    return sign * magnitude, log_q


def propose_z(theta: ThetaParams, v: ArrayLike, data: Dataset, rng: RngStream) -> tuple[NDArray[np.float64], float]:
    g = theta.g_spd()
    v = np.atleast_1d(np.asarray(v, dtype=float))
    z, log_q = propose_z_batch(v[None, :], theta.xi[None, :], theta.psi[None, :], g.chol[None], data.y, rng)
    return z[0], float(log_q[0])


def propose_xi_batch(
    v: NDArray[np.float64],
    z: NDArray[np.float64],
    psi: NDArray[np.float64],
    g_chol: NDArray[np.float64],
    y: NDArray[np.float64],
    rng: RngStream,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """xi ~ N((sum v_i y_i - psi sum sqrt(v_i)|z_i|) / sum v_i, G / sum v_i)."""
    sum_v = np.sum(v, axis=-1)
    if np.any(~(sum_v > 0)):
        raise DegenerateLatentsError("sum of latent scales must be positive")
    shift = np.sum(np.sqrt(v) * np.abs(z), axis=-1)
    mean = (v @ y - psi * shift[:, None]) / sum_v[:, None]
    return _gaussian_draw(mean, g_chol, sum_v, rng)


def propose_xi(theta: ThetaParams, lat: LatentState, data: Dataset, rng: RngStream) -> tuple[NDArray[np.float64], float]:
    g = theta.g_spd()
    xi, log_q = propose_xi_batch(lat.v[None, :], lat.z[None, :], theta.psi[None, :], g.chol[None], data.y, rng)
    return xi[0], float(log_q[0])


def propose_psi_batch(
    v: NDArray[np.float64],
    z: NDArray[np.float64],
    xi: NDArray[np.float64],
    g_chol: NDArray[np.float64],
    y: NDArray[np.float64],
    rng: RngStream,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """psi ~ N(sum |z_i| sqrt(v_i) (y_i - xi) / sum z_i^2, G / sum z_i^2).

    Draws are not checked against the skewness ellipsoid; the prior scores
    any violation as -inf.
    """
    sum_z2 = np.sum(z * z, axis=-1)
    if np.any(~(sum_z2 > 0)):
        raise DegenerateLatentsError("psi proposal needs sum z_i^2 > 0")
    weight = np.abs(z) * np.sqrt(v)
    mean = (weight @ y - np.sum(weight, axis=-1)[:, None] * xi) / sum_z2[:, None]
    return _gaussian_draw(mean, g_chol, sum_z2, rng)


def propose_psi(theta: ThetaParams, lat: LatentState, data: Dataset, rng: RngStream) -> tuple[NDArray[np.float64], float]:
    g = theta.g_spd()
    psi, log_q = propose_psi_batch(lat.v[None, :], lat.z[None, :], theta.xi[None, :], g.chol[None], data.y, rng)
    return psi[0], float(log_q[0])


def scatter_matrix_batch(
    v: NDArray[np.float64],
    z: NDArray[np.float64],
    xi: NDArray[np.float64],
    psi: NDArray[np.float64],
    y: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Lambda = sum_i v_i eps_i eps_i' with eps_i = y_i - xi - psi |z_i| / sqrt(v_i)."""
    eps = y[None, :, :] - xi[:, None, :] - (np.abs(z) / np.sqrt(v))[:, :, None] * psi[:, None, :]
    scatter = np.einsum("kn,kni,knj->kij", v, eps, eps)
    return 0.5 * (scatter + np.swapaxes(scatter, -1, -2))


def propose_g_batch(
    v: NDArray[np.float64],
    z: NDArray[np.float64],
    xi: NDArray[np.float64],
    psi: NDArray[np.float64],
    y: NDArray[np.float64],
    rng: RngStream,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """G ~ IW(n - p - 1, Lambda). Draws whose factorization fails carry log q = 0; the target scores them -inf."""
    n, p = y.shape
    dof = n - p - 1
    if not dof > p - 1:
        raise PreconditionError(f"G proposal needs n > 2p, got n={n}, p={p}", condition=INSUFFICIENT_FOR_G)
    scatter = scatter_matrix_batch(v, z, xi, psi, y)
    draws = invwishart_sample_batch(dof, scatter, rng)
    chol, ok = batched_cholesky(draws)
    log_q = np.where(ok, invwishart_logpdf_batch(chol, dof, scatter), 0.0)
    return draws, log_q


def propose_g(theta: ThetaParams, lat: LatentState, data: Dataset, rng: RngStream) -> tuple[SpdMatrix, float]:
    g, log_q = propose_g_batch(lat.v[None, :], lat.z[None, :], theta.xi[None, :], theta.psi[None, :], data.y, rng)
    return SpdMatrix.from_array(g[0], symmetrize=True), float(log_q[0])


def propose_components(
    population: Population,
    y: NDArray[np.float64],
    spec: ModelSpec,
    grid: ArrayLike,
    rng: RngStream,
) -> tuple[Population, int]:
    """Propose every free component in the order nu, v, z, xi, psi, G.

    Each draw conditions on the freshest values; fixed components of nested
    models are carried unchanged. Returns the new population with log q set,
    and the number of v rejection trials.
    """
    count = population.v.shape[0]
    g_chol, _ = batched_cholesky(population.g)
    log_q = np.zeros(count)
    trials = 0

    nu, v, z = population.nu, population.v, population.z
    if spec.heavy_tailed:
        nu, lq = propose_nu_batch(v, grid, rng)
        log_q += lq
        v, lq, trials = propose_v_batch(nu, z, population.xi, population.psi, g_chol, y, rng)
        log_q += lq
    if spec.skewed:
        z, lq = propose_z_batch(v, population.xi, population.psi, g_chol, y, rng)
        log_q += lq
    xi, lq = propose_xi_batch(v, z, population.psi, g_chol, y, rng)
    log_q += lq
    psi = population.psi
    if spec.skewed:
        psi, lq = propose_psi_batch(v, z, xi, g_chol, y, rng)
        log_q += lq
    g, lq = propose_g_batch(v, z, xi, psi, y, rng)
    log_q += lq
    return population.replace(nu=nu, v=v, z=z, xi=xi, psi=psi, g=g, log_q=log_q), trials
