from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from ..distributions import RngStream, gamma_sample
from ..errors import DegenerateLatentsError, DomainError, PreconditionError
from ..likelihood import Dataset, cml_estimates_batch
from ..model import ModelSpec, PriorConfig, alpha_from_delta, correlation, validate_posterior_preconditions
from ..types import IterationDiagnostics
from .population import IterationEstimate, Population, PopulationState
from .proposals import INSUFFICIENT_FOR_G, propose_components
from .weights import DEFAULT_CHUNK, MapFn, compute_weights, marginal_likelihood, resample

logger = logging.getLogger(__name__)

MAX_INIT_RETRIES = 100
# Substream keys below an iteration index.
_PROPOSAL_KEY = 0
_RESAMPLE_KEY = 1

IterationCallback = Callable[[IterationDiagnostics], None]


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    """Entropy-weighted posterior means; Sigma, delta and alpha are derived from the mean theta."""

    model: str
    xi: NDArray[np.float64]
    xi_sd: NDArray[np.float64]
    psi: NDArray[np.float64]
    g: NDArray[np.float64]
    sigma: NDArray[np.float64]
    delta: NDArray[np.float64]
    alpha: NDArray[np.float64]
    nu_mean: Optional[float]
    nu_pmf: Optional[NDArray[np.float64]]
    nu_grid: Optional[NDArray[np.float64]]


@dataclass(frozen=True, eq=False)
class FitResult:
    spec: ModelSpec
    summary: PosteriorSummary
    log_marginal_likelihood: float
    diagnostics: list[IterationDiagnostics]
    history: list[tuple[float, float]]
    n_particles: int
    iterations: int
    initial_estimate: IterationEstimate
    final_state: PopulationState
    wall_time: float = field(default=0.0)


def _check_inputs(data: Dataset, cfg: PriorConfig, n_particles: int) -> None:
    check = validate_posterior_preconditions(data.n, data.p, cfg)
    if not check.ok:
        raise PreconditionError(check.message, condition=check.condition)
    if data.n <= 2 * data.p:
        raise PreconditionError(
            f"the G proposal needs n > 2p, got n={data.n}, p={data.p}", condition=INSUFFICIENT_FOR_G
        )
    if n_particles < 2:
        raise DomainError(f"need at least two particles, got {n_particles}")


def _initialize_chunk(
    count: int, data: Dataset, spec: ModelSpec, grid: NDArray[np.float64], rng: RngStream, max_retries: int
) -> Population:
    n = data.n
    gen = rng.generator

    def draw_latents(nu: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        size = nu.shape[0]
        if spec.heavy_tailed:
            half = 0.5 * nu[:, None]
            v = gamma_sample(half, half, rng, size=(size, n))
        else:
            v = np.ones((size, n))
        z = gen.standard_normal((size, n)) if spec.skewed else np.zeros((size, n))
        return v, z

    nu = grid[gen.integers(grid.size, size=count)] if spec.heavy_tailed else np.full(count, math.inf)
    v, z = draw_latents(nu)
    xi, psi, g, ok = cml_estimates_batch(data.y, v, z)
    for attempt in range(max_retries):
        if np.all(ok):
            break
        bad = np.flatnonzero(~ok)
        logger.debug("initialization retry %d for %d particles", attempt + 1, bad.size)
        v[bad], z[bad] = draw_latents(nu[bad])
        xi[bad], psi[bad], g[bad], ok[bad] = cml_estimates_batch(data.y, v[bad], z[bad])
    if not np.all(ok):
        raise DegenerateLatentsError(
            f"complete-data estimates stayed singular after {max_retries} retries for {int(np.sum(~ok))} particles"
        )
    if not spec.skewed:
        psi = np.zeros_like(psi)
    return Population(nu=nu, v=v, z=z, xi=xi, psi=psi, g=g)


def initialize_population(
    data: Dataset,
    spec: ModelSpec,
    cfg: PriorConfig,
    n_particles: int,
    rng: RngStream,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    max_retries: int = MAX_INIT_RETRIES,
    map_fn: MapFn = map,
) -> PopulationState:
    """Draw nu, v and z from the stochastic representation and centre each particle on its CML estimate."""
    _check_inputs(data, cfg, n_particles)
    grid = np.asarray(cfg.nu_grid, dtype=float)
    starts = list(range(0, n_particles, chunk_size))

    def build(index_start: tuple[int, int]) -> Population:
        index, start = index_start
        count = min(chunk_size, n_particles - start)
        return _initialize_chunk(count, data, spec, grid, rng.substream(0, _PROPOSAL_KEY, index), max_retries)

    population = Population.concat(list(map_fn(build, enumerate(starts))))
    return PopulationState(
        population=population,
        iteration=0,
        entropy=math.log(n_particles),
        log_sum_unnorm=0.0,
        ess=float(n_particles),
        estimates=IterationEstimate.from_population(population, grid if spec.heavy_tailed else None),
    )


def _combine_estimates(
    estimates: list[IterationEstimate], entropies: list[float], spec: ModelSpec, grid: NDArray[np.float64]
) -> PosteriorSummary:
    h = np.asarray(entropies, dtype=float)
    w = h / h.sum()
    xi = sum(wt * est.xi for wt, est in zip(w, estimates))
    second = sum(wt * est.xi_second_moment for wt, est in zip(w, estimates))
    psi = sum(wt * est.psi for wt, est in zip(w, estimates))
    g = sum(wt * est.g for wt, est in zip(w, estimates))
    g = 0.5 * (g + g.T)
    sigma = g + np.outer(psi, psi)
    omega = np.sqrt(np.diag(sigma))
    delta = psi / omega
    if spec.skewed and np.any(delta != 0.0):
        alpha = alpha_from_delta(delta, correlation(sigma))
    else:
        alpha = np.zeros_like(delta)

    nu_mean = nu_pmf = nu_grid = None
    if spec.heavy_tailed:
        nu_mean = float(sum(wt * est.nu_mean for wt, est in zip(w, estimates)))
        nu_pmf = sum(wt * est.nu_pmf for wt, est in zip(w, estimates))
        nu_pmf = nu_pmf / nu_pmf.sum()
        nu_grid = grid
    return PosteriorSummary(
        model=spec.name.value,
        xi=xi,
        xi_sd=np.sqrt(np.maximum(second - xi**2, 0.0)),
        psi=psi,
        g=g,
        sigma=sigma,
        delta=delta,
        alpha=alpha,
        nu_mean=nu_mean,
        nu_pmf=nu_pmf,
        nu_grid=nu_grid,
    )


class PmcEngine:
    """Runs the population Monte Carlo loop for one model on one dataset.

    Each iteration proposes every free component conditionally, weighs the
    population against the complete-data posterior, records the weighted
    estimates and the entropy of the weights, then resamples.
    Chunks of particles draw from their own substreams, so results do not
    depend on the number of worker threads.
    """

    def __init__(
        self,
        *,
        data: Dataset,
        spec: ModelSpec,
        prior: PriorConfig,
        n_particles: int,
        iterations: int,
        rng: RngStream,
        workers: int = 1,
        chunk_size: int = DEFAULT_CHUNK,
        on_iteration: IterationCallback | None = None,
    ) -> None:
        if iterations < 1:
            raise DomainError(f"need at least one iteration, got {iterations}")
        if chunk_size < 1 or workers < 1:
            raise DomainError("chunk_size and workers must be positive")
        self._data = data
        self._spec = spec
        self._prior = prior
        self._n_particles = int(n_particles)
        self._iterations = int(iterations)
        self._rng = rng
        self._workers = int(workers)
        self._chunk_size = int(chunk_size)
        self._on_iteration = on_iteration
        self._grid = np.asarray(prior.nu_grid, dtype=float)

    def _propose(self, state: PopulationState, t: int, map_fn: MapFn) -> tuple[PopulationState, int]:
        population = state.population
        starts = list(range(0, population.size, self._chunk_size))

        def step(index_start: tuple[int, int]) -> tuple[Population, int]:
            index, start = index_start
            chunk = population.slice(start, start + self._chunk_size)
            stream = self._rng.substream(t, _PROPOSAL_KEY, index)
            return propose_components(chunk, self._data.y, self._spec, self._grid, stream)

        results = list(map_fn(step, enumerate(starts)))
        proposed = Population.concat([chunk for chunk, _ in results])
        trials = sum(count for _, count in results)
        return PopulationState(proposed, t, state.entropy, state.log_sum_unnorm, state.ess), trials

    def _diagnostics(self, state: PopulationState, trials: int) -> IterationDiagnostics:
        draws = state.n_particles * self._data.n
        return {
            "t": state.iteration,
            "entropy": state.entropy,
            "log_sum_unnorm": state.log_sum_unnorm,
            "ess": state.ess,
            "v_acceptance": draws / trials if self._spec.heavy_tailed and trials else None,
            "zero_weight_count": int(np.sum(state.population.weights == 0.0)),
        }

    def run(self) -> FitResult:
        started = time.perf_counter()
        pool = ThreadPoolExecutor(max_workers=self._workers) if self._workers > 1 else None
        map_fn: MapFn = pool.map if pool is not None else map
        try:
            state = initialize_population(
                self._data,
                self._spec,
                self._prior,
                self._n_particles,
                self._rng,
                chunk_size=self._chunk_size,
                map_fn=map_fn,
            )
            initial = state.estimates
            diagnostics: list[IterationDiagnostics] = []
            history: list[tuple[float, float]] = []
            estimates: list[IterationEstimate] = []
            grid = self._grid if self._spec.heavy_tailed else None

            for t in range(1, self._iterations + 1):
                proposed, trials = self._propose(state, t, map_fn)
                weighted = compute_weights(
                    proposed, self._data, self._spec, self._prior, chunk_size=self._chunk_size, map_fn=map_fn
                )
                estimate = IterationEstimate.from_population(weighted.population, grid)
                weighted = PopulationState(
                    weighted.population, t, weighted.entropy, weighted.log_sum_unnorm, weighted.ess, estimate
                )
                record = self._diagnostics(weighted, trials)
                diagnostics.append(record)
                history.append((weighted.entropy, weighted.log_sum_unnorm))
                estimates.append(estimate)
                logger.info(
                    "%s t=%d H=%.4f log_sum=%.4f ess=%.1f v_acc=%s zero=%d",
                    self._spec.name.value,
                    t,
                    record["entropy"],
                    record["log_sum_unnorm"],
                    record["ess"],
                    "n/a" if record["v_acceptance"] is None else f"{record['v_acceptance']:.3f}",
                    record["zero_weight_count"],
                )
                if self._on_iteration is not None:
                    self._on_iteration(record)
                state = weighted
                if t < self._iterations:
                    state = resample(weighted, self._rng.substream(t, _RESAMPLE_KEY))
        finally:
            if pool is not None:
                pool.shutdown()

        log_ml = marginal_likelihood(history, self._n_particles)
        summary = _combine_estimates(estimates, [h for h, _ in history], self._spec, self._grid)
        return FitResult(
            spec=self._spec,
            summary=summary,
            log_marginal_likelihood=log_ml,
            diagnostics=diagnostics,
            history=history,
            n_particles=self._n_particles,
            iterations=self._iterations,
            initial_estimate=initial,
            final_state=state,
            wall_time=time.perf_counter() - started,
        )


def run_pmc(
    data: Dataset,
    spec: ModelSpec,
    cfg: PriorConfig,
    n_particles: int,
    iterations: int,
    rng: RngStream,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    on_iteration: IterationCallback | None = None,
) -> FitResult:
    engine = PmcEngine(
        data=data,
        spec=spec,
        prior=cfg,
        n_particles=n_particles,
        iterations=iterations,
        rng=rng,
        workers=workers,
        chunk_size=chunk_size,
        on_iteration=on_iteration,
    )
    return engine.run()
