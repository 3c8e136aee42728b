import math

import numpy as np
import pytest

from src.skewfit.distributions import RngStream
from src.skewfit.errors import DomainError, PreconditionError
from src.skewfit.likelihood import Dataset
from src.skewfit.model import INSUFFICIENT_SAMPLE, ModelSpec, PriorConfig, log_prior_batch
from src.skewfit.pmc import PmcEngine, initialize_population, run_pmc
from src.skewfit.pmc.proposals import INSUFFICIENT_FOR_G
from src.skewfit.simulate import simulate_dataset


def test_initialize_normal_population_is_centred_on_sample_mean(gaussian_data_factory, prior, rng):
    data = gaussian_data_factory(40)
    state = initialize_population(data, ModelSpec.from_name("normal"), prior, 50, rng)
    population = state.population
    assert state.iteration == 0
    assert np.array_equal(population.v, np.ones((50, 40)))
    assert np.array_equal(population.psi, np.zeros((50, 2)))
    assert np.all(np.isinf(population.nu))
    assert population.xi == pytest.approx(np.repeat(data.y.mean(axis=0)[None], 50, axis=0), rel=1e-12)


def test_initialize_population_is_reproducible(gaussian_data_factory, prior):
    data = gaussian_data_factory(30)
    spec = ModelSpec.from_name("st")
    first = initialize_population(data, spec, prior, 20, RngStream(3), chunk_size=7)
    second = initialize_population(data, spec, prior, 20, RngStream(3), chunk_size=7)
    assert np.array_equal(first.population.g, second.population.g)
    assert np.array_equal(first.population.nu, second.population.nu)


def test_initial_skew_t_particles_satisfy_constraints(truth_2d, prior, rng):
    spec = ModelSpec.from_name("st")
    data = simulate_dataset(spec, truth_2d, 120, rng.substream(1))
    population = initialize_population(data, spec, prior, 200, rng.substream(2)).population
    assert set(population.nu.tolist()) <= set(prior.nu_grid)
    assert np.all(np.isfinite(log_prior_batch(population.psi, population.g, spec, prior)))


def test_preconditions(prior, rng):
    spec = ModelSpec.from_name("normal")
    with pytest.raises(PreconditionError) as info:
        run_pmc(Dataset.from_array(np.eye(3)), spec, prior, 10, 1, rng)
    assert info.value.condition == INSUFFICIENT_SAMPLE
    with pytest.raises(PreconditionError) as info:
        run_pmc(Dataset.from_array(np.random.default_rng(0).normal(size=(6, 3))), spec, prior, 10, 1, rng)
    assert info.value.condition == INSUFFICIENT_FOR_G
    data = Dataset.from_array(np.random.default_rng(0).normal(size=(20, 2)))
    with pytest.raises(DomainError):
        run_pmc(data, spec, prior, 1, 1, rng)
    with pytest.raises(DomainError):
        PmcEngine(data=data, spec=spec, prior=prior, n_particles=10, iterations=0, rng=rng)


def test_normal_fit_diagnostics_and_summary(gaussian_data_factory, prior, rng):
    data = gaussian_data_factory(60)
    seen = []
    result = run_pmc(data, ModelSpec.from_name("normal"), prior, 300, 3, rng, on_iteration=seen.append)

    assert [record["t"] for record in result.diagnostics] == [1, 2, 3]
    assert seen == result.diagnostics
    for record in result.diagnostics:
        assert 0.0 <= record["entropy"] <= math.log(300)
        assert record["v_acceptance"] is None
        assert 1.0 - 1e-9 <= record["ess"] <= 300.0 + 1e-9
    assert math.isfinite(result.log_marginal_likelihood)
    assert result.final_state.population.weights.sum() == pytest.approx(1.0, abs=1e-12)
    summary = result.summary
    assert summary.model == "normal"
    assert summary.nu_mean is None and summary.nu_pmf is None
    assert np.array_equal(summary.alpha, np.zeros(2))
    assert summary.xi == pytest.approx(data.y.mean(axis=0), abs=0.3)
    assert np.all(summary.xi_sd > 0)


def test_fit_is_deterministic_and_thread_count_independent(gaussian_data_factory, prior):
    data = gaussian_data_factory(50)
    spec = ModelSpec.from_name("t")
    single = run_pmc(data, spec, prior, 200, 2, RngStream(42), chunk_size=64)
    again = run_pmc(data, spec, prior, 200, 2, RngStream(42), chunk_size=64)
    threaded = run_pmc(data, spec, prior, 200, 2, RngStream(42), chunk_size=64, workers=3)
    for other in (again, threaded):
        assert other.log_marginal_likelihood == single.log_marginal_likelihood
        assert np.array_equal(other.summary.xi, single.summary.xi)
        assert np.array_equal(other.summary.nu_pmf, single.summary.nu_pmf)


def test_skew_t_fit_smoke(truth_2d, prior, rng):
    spec = ModelSpec.from_name("st")
    data = simulate_dataset(spec, truth_2d, 80, rng.substream(1))
    result = run_pmc(data, spec, prior, 200, 2, rng.substream(2))
    summary = result.summary
    assert summary.nu_pmf.sum() == pytest.approx(1.0)
    assert summary.nu_grid.tolist() == list(prior.nu_grid)
    assert min(prior.nu_grid) <= summary.nu_mean <= max(prior.nu_grid)
    assert summary.sigma == pytest.approx(summary.g + np.outer(summary.psi, summary.psi))
    for record in result.diagnostics:
        assert 0.0 < record["v_acceptance"] <= 1.0
    assert math.isfinite(result.log_marginal_likelihood)


def test_prior_with_proper_scale_matrix(gaussian_data_factory, rng):
    cfg = PriorConfig(iw_dof=4.0, iw_scale=[[1.0, 0.0], [0.0, 1.0]])
    result = run_pmc(gaussian_data_factory(40), ModelSpec.from_name("sn"), cfg, 150, 2, rng)
    assert math.isfinite(result.log_marginal_likelihood)
    assert result.summary.alpha.shape == (2,)
