import math
from types import SimpleNamespace

import numpy as np
import pytest

from src.skewfit.compare import (
    MODEL_INDEX,
    compare_models,
    model_probabilities,
    model_stream,
    run_replication,
    run_study,
    sort_study_rows,
    top_counts,
)
from src.skewfit.distributions import RngStream
from src.skewfit.errors import DegeneratePopulationError, NumericError, PreconditionError
from src.skewfit.model import ModelName, PriorConfig

# Offsets make the skew-t the clear favourite of the fake fits.
OFFSETS = {ModelName.NORMAL: 0.0, ModelName.T: 1.0, ModelName.SN: 2.0, ModelName.ST: 5.0}


def fake_fit(data, spec, prior, n_particles, iterations, rng, *, workers=1):
    return SimpleNamespace(log_marginal_likelihood=OFFSETS[spec.name] + 0.1 * float(rng.generator.standard_normal()), stream=repr(rng))


def failing_fit(data, spec, prior, n_particles, iterations, rng, *, workers=1):
    raise DegeneratePopulationError("all weights vanished", iteration=2)


def test_model_probabilities_renormalize():
    rows = model_probabilities({ModelName.NORMAL: 0.0, ModelName.T: math.log(3.0)})
    by_model = {row["model"]: row for row in rows}
    assert by_model["normal"]["probability"] == pytest.approx(0.25)
    assert by_model["t"]["probability"] == pytest.approx(0.75)
    assert by_model["t"]["log_bayes_factor"] == 0.0
    assert by_model["normal"]["log_bayes_factor"] == pytest.approx(-math.log(3.0))
    assert sum(row["probability"] for row in rows) == pytest.approx(1.0, abs=1e-12)


def test_model_probabilities_handle_large_log_values():
    rows = model_probabilities({ModelName.SN: -5000.0, ModelName.ST: -4990.0})
    assert rows[1]["probability"] == pytest.approx(1.0 / (1.0 + math.exp(-10.0)))


def test_failed_models_are_excluded():
    rows = model_probabilities({ModelName.NORMAL: -10.0, ModelName.ST: None, ModelName.T: -math.inf}, {ModelName.ST: "boom"})
    assert [row["model"] for row in rows] == ["normal", "t", "st"]
    assert rows[0]["probability"] == 1.0
    assert rows[1]["failed"] and rows[1]["error"] == "non-finite marginal likelihood"
    assert rows[2]["failed"] and rows[2]["error"] == "boom"
    with pytest.raises(NumericError):
        model_probabilities({ModelName.NORMAL: None})


def test_compare_models_records_failed_fit(gaussian_data_factory, prior, rng):
    def sometimes_failing(data, spec, *args, **kwargs):
        if spec.name == ModelName.ST:
            raise PreconditionError("no", condition="n >= p+1")
        return fake_fit(data, spec, *args, **kwargs)

    comparison = compare_models(gaussian_data_factory(20), prior, 10, 1, rng, fit_fn=sometimes_failing)
    probabilities = comparison.probabilities()
    assert probabilities["st"] is None
    assert sum(value for value in probabilities.values() if value is not None) == pytest.approx(1.0, abs=1e-12)
    assert comparison.best_model == ModelName.SN
    assert ModelName.ST not in comparison.fits


def test_compare_models_is_order_invariant(gaussian_data_factory, prior, rng):
    data = gaussian_data_factory(20)
    forward = compare_models(data, prior, 10, 1, rng, models=["normal", "st"], fit_fn=fake_fit)
    backward = compare_models(data, prior, 10, 1, rng, models=["st", "normal"], fit_fn=fake_fit)
    assert forward.rows == backward.rows
    assert forward.fits[ModelName.ST].stream == repr(model_stream(rng, "st"))
    assert [row["model"] for row in backward.rows] == ["normal", "st"]


def test_model_index_is_canonical():
    assert [MODEL_INDEX[name] for name in (ModelName.NORMAL, ModelName.T, ModelName.SN, ModelName.ST)] == [0, 1, 2, 3]


def test_failed_replication_is_recorded(truth_2d, prior, rng):
    row, error = run_replication(ModelName.T, 4, truth_2d, 30, prior, 10, 1, rng, fit_fn=failing_fit)
    assert error is not None and "every model failed" in error
    assert row["top_model"] is None
    assert row["replication"] == 4
    assert row["failed_models"] == ["normal", "t", "sn", "st"]
    assert set(row["probabilities"].values()) == {None}


def test_run_study_rows_and_counts(truth_2d, prior, rng):
    generating = [ModelName.ST, ModelName.NORMAL]
    seen = []
    rows, errors = run_study(
        truth_2d, 30, prior, 10, 1, 3, rng, generating_models=generating, fit_fn=fake_fit, on_replication=lambda row, err: seen.append(row)
    )
    assert [(row["true_model"], row["replication"]) for row in rows] == [("st", 0), ("st", 1), ("st", 2), ("normal", 0), ("normal", 1), ("normal", 2)]
    assert errors == [None] * 6
    assert len(seen) == 6
    assert all(row["top_model"] == "st" for row in rows)

    counts = top_counts(rows)
    assert counts["st"] == {"normal": 0, "t": 0, "sn": 0, "st": 3}
    assert counts["normal"]["st"] == 3

    ordered = sort_study_rows(rows)
    assert [row["true_model"] for row in ordered] == ["normal"] * 3 + ["st"] * 3
    normal_probs = [row["probabilities"]["normal"] for row in ordered[:3]]
    assert normal_probs == sorted(normal_probs, reverse=True)


def test_run_study_is_independent_of_workers(truth_2d, prior):
    kwargs = dict(generating_models=[ModelName.T, ModelName.SN], fit_fn=fake_fit)
    serial, _ = run_study(truth_2d, 30, prior, 10, 1, 2, RngStream(5), **kwargs)
    threaded, _ = run_study(truth_2d, 30, prior, 10, 1, 2, RngStream(5), workers=3, **kwargs)
    assert serial == threaded


def test_compare_models_with_real_fits(gaussian_data_factory, rng):
    comparison = compare_models(gaussian_data_factory(40), PriorConfig(), 150, 2, rng, models=["normal", "t"])
    probabilities = comparison.probabilities()
    assert set(probabilities) == {"normal", "t"}
    assert sum(probabilities.values()) == pytest.approx(1.0, abs=1e-12)
    assert np.isfinite(comparison.fits[ModelName.NORMAL].log_marginal_likelihood)
