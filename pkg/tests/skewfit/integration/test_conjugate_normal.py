"""Normal model under the flat / Jeffreys-type prior has a closed-form posterior and marginal likelihood."""

import math

import numpy as np
import pytest
from scipy import special

from src.data.models import PRESETS
from src.skewfit.distributions import RngStream
from src.skewfit.likelihood import Dataset
from src.skewfit.model import ModelSpec, PriorConfig
from src.skewfit.pmc import run_pmc

TRUE_XI = np.array([1.0, -0.5])
TRUE_SIGMA = np.array([[1.5, 0.4], [0.4, 0.8]])


def _analytic_log_marginal(y: np.ndarray) -> float:
    n, p = y.shape
    centred = y - y.mean(axis=0)
    _, logdet_s = np.linalg.slogdet(centred.T @ centred)
    return (
        -0.5 * (n - 1) * p * math.log(2 * math.pi)
        - 0.5 * p * math.log(n)
        + 0.5 * (n - 1) * p * math.log(2.0)
        + float(special.multigammaln(0.5 * (n - 1), p))
        - 0.5 * (n - 1) * logdet_s
    )


@pytest.fixture(scope="module")
def conjugate_fit():
    gen = np.random.default_rng(2024)
    data = Dataset.from_array(gen.multivariate_normal(TRUE_XI, TRUE_SIGMA, size=500))
    preset = PRESETS["desk"]
    result = run_pmc(data, ModelSpec.from_name("normal"), PriorConfig(), preset["particles"], preset["iterations"], RngStream(77), workers=2)
    return data, result


@pytest.mark.slow
def test_location_matches_conjugate_posterior(conjugate_fit):
    data, result = conjugate_fit
    n, p = data.y.shape
    centred = data.y - data.y.mean(axis=0)
    scatter = centred.T @ centred
    posterior_sd = np.sqrt(np.diag(scatter) / (n * (n - p - 2)))

    assert np.all(np.abs(result.summary.xi - TRUE_XI) <= 3 * posterior_sd)
    assert np.all(np.abs(result.summary.xi - data.y.mean(axis=0)) <= 3 * posterior_sd)
    assert result.summary.xi_sd == pytest.approx(posterior_sd, rel=0.25)


@pytest.mark.slow
def test_marginal_likelihood_matches_closed_form(conjugate_fit):
    data, result = conjugate_fit
    assert result.log_marginal_likelihood == pytest.approx(_analytic_log_marginal(data.y), abs=0.5)


@pytest.mark.slow
def test_scale_estimate_is_close_to_posterior_mean(conjugate_fit):
    data, result = conjugate_fit
    n, p = data.y.shape
    centred = data.y - data.y.mean(axis=0)
    posterior_mean = centred.T @ centred / (n - p - 2)
    assert result.summary.sigma == pytest.approx(posterior_mean, rel=0.1, abs=0.02)
