"""Importance weights, entropy, resampling and the marginal-likelihood estimate."""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from ..distributions import RngStream
from ..errors import DegeneratePopulationError, DomainError
from ..likelihood import Dataset, augmented_loglik_batch
from ..model import ModelSpec, PriorConfig, log_prior_batch
from .population import Population, PopulationState

DEFAULT_CHUNK = 1024

MapFn = Callable[[Callable, Iterable], Iterable]


def log_target_batch(population: Population, y: NDArray[np.float64], spec: ModelSpec, cfg: PriorConfig) -> NDArray[np.float64]:
    """log of the unnormalized posterior of (theta, z, v) for every particle."""
    loglik = augmented_loglik_batch(
        y, population.nu, population.v, population.z, population.xi, population.psi, population.g, spec
    )
    return loglik + log_prior_batch(population.psi, population.g, spec, cfg)


def normalize_log_weights(log_weight: ArrayLike, *, iteration: int | None = None) -> tuple[NDArray[np.float64], float]:
    """Normalized weights and log sum of the unnormalized ones.

    Weights are shifted by the maximum and divided by their sum, so they add up
    to one whatever the magnitude of the log weights.
    """
    log_weight = np.asarray(log_weight, dtype=float)
    if log_weight.size == 0:
        raise DomainError("no weights to normalize")
    if np.any(np.isnan(log_weight)):
        raise DegeneratePopulationError("importance weights contain NaN", iteration=iteration)
    if not np.any(log_weight > -np.inf):
        raise DegeneratePopulationError("every particle has a null importance weight", iteration=iteration)
    top = float(np.max(log_weight))
    if not math.isfinite(top):
        raise DegeneratePopulationError("importance weights overflow", iteration=iteration)
    weights = np.exp(log_weight - top)
    total = float(np.sum(weights))
    log_sum = top + math.log(total)
    return weights / total, log_sum


def entropy(weights: ArrayLike | PopulationState) -> float:
    """Shannon entropy -sum w log w of normalized weights, with 0 log 0 = 0."""
    if isinstance(weights, PopulationState):
        weights = weights.population.weights
    w = np.asarray(weights, dtype=float)
    positive = w[w > 0]
    h = float(-np.sum(positive * np.log(positive)))
    return min(max(h, 0.0), math.log(w.size))


def effective_sample_size(weights: ArrayLike) -> float:
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def compute_weights(
    state: PopulationState,
    data: Dataset,
    spec: ModelSpec,
    cfg: PriorConfig,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    map_fn: MapFn = map,
) -> PopulationState:
    """log w_j = log target - log q_j, normalized; violations of the model constraints weigh zero."""
    population = state.population
    starts = range(0, population.size, chunk_size)
    parts = list(
        map_fn(lambda start: log_target_batch(population.slice(start, start + chunk_size), data.y, spec, cfg), starts)
    )
    target = np.concatenate(parts)
    log_weight = np.where(np.isfinite(target), target - population.log_q, -np.inf)
    weights, log_sum = normalize_log_weights(log_weight, iteration=state.iteration)
    weighted = population.replace(log_weight=log_weight, weights=weights)
    return PopulationState(
        population=weighted,
        iteration=state.iteration,
        entropy=entropy(weights),
        log_sum_unnorm=log_sum,
        ess=effective_sample_size(weights),
    )


def resample(state: PopulationState, rng: RngStream) -> PopulationState:
    """Multinomial resampling; the survivors carry uniform weights."""
    population = state.population
    size = population.size
    cdf = np.cumsum(population.weights)
    u = rng.generator.random(size) * cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), size - 1)
    survivors = population.take(idx).replace(
        log_q=np.zeros(size), log_weight=np.zeros(size), weights=np.full(size, 1.0 / size)
    )
    return PopulationState(
        population=survivors,
        iteration=state.iteration,
        entropy=math.log(size),
        log_sum_unnorm=state.log_sum_unnorm,
        ess=float(size),
        estimates=state.estimates,
        resampled=True,
    )


def marginal_likelihood(history: Sequence[tuple[float, float]], n_particles: int) -> float:
    """log p(y) estimated as sum_t H_t sum_j w~_j(t) / (N sum_t H_t).

    ``history`` holds (H_t, log sum_j w~_j(t)) per iteration.
    """
    if not history:
        raise DomainError("marginal likelihood needs at least one iteration")
    if n_particles < 1:
        raise DomainError("n_particles must be positive")
    h = np.array([item[0] for item in history], dtype=float)
    log_sums = np.array([item[1] for item in history], dtype=float)
    if np.any(~np.isfinite(h)) or np.any(h < 0):
        raise DomainError("entropies must be finite and non-negative")
    total_h = float(np.sum(h))
    if total_h <= 0.0:
        raise DegeneratePopulationError("every iteration collapsed onto a single particle (sum of H is zero)")
    with np.errstate(divide="ignore"):
        log_h = np.log(h)
    return float(special.logsumexp(log_h + log_sums)) - math.log(n_particles) - math.log(total_h)
