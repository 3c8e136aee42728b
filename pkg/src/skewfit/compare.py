"""Posterior model probabilities over the nested family and the simulation study built on them."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .distributions import RngStream
from .errors import DomainError, NumericError, SkewfitError
from .likelihood import Dataset
from .model import AlphaParams, ModelName, ModelSpec, PriorConfig
from .pmc import FitResult, run_pmc
from .simulate import simulate_dataset
from .types import ModelProbability, StudyRow

logger = logging.getLogger(__name__)

# Canonical index of each model; substreams are keyed on it, never on config order.
MODEL_INDEX: dict[ModelName, int] = {name: index for index, name in enumerate(ModelName)}

# Top-level substream keys under the run seed.
_SIMULATE_KEY = 1
_COMPARE_KEY = 2

FitFn = Callable[..., FitResult]


def model_stream(rng: RngStream, model: ModelName | str) -> RngStream:
    return rng.substream(MODEL_INDEX[ModelName(model)])


@dataclass(frozen=True, eq=False)
class Comparison:
    rows: list[ModelProbability]
    fits: dict[ModelName, FitResult]

    @property
    def best_model(self) -> ModelName:
        best = max((row for row in self.rows if not row["failed"]), key=lambda row: row["probability"])
        return ModelName(best["model"])

    def probabilities(self) -> dict[str, float | None]:
        return {row["model"]: row["probability"] for row in self.rows}


def model_probabilities(log_marginals: dict[ModelName, float | None], errors: dict[ModelName, str] | None = None) -> list[ModelProbability]:
    """Uniform model prior: pi(M | y) = p(y | M) / sum over the models that did not fail."""
    errors = errors or {}
    ordered = sorted(log_marginals, key=MODEL_INDEX.__getitem__)
    alive = [name for name in ordered if log_marginals[name] is not None and math.isfinite(log_marginals[name])]
    if not alive:
        raise NumericError("every model failed; no posterior model probabilities")
    values = np.array([log_marginals[name] for name in alive], dtype=float)
    log_total = float(logsumexp(values))
    best = float(values.max())

    rows: list[ModelProbability] = []
    for name in ordered:
        value = log_marginals[name]
        if name in alive:
            rows.append(
                {
                    "model": name.value,
                    "log_marginal_likelihood": float(value),
                    "probability": math.exp(float(value) - log_total),
                    "log_bayes_factor": float(value) - best,
                    "failed": False,
                    "error": None,
                }
            )
        else:
            rows.append(
                {
                    "model": name.value,
                    "log_marginal_likelihood": None,
                    "probability": None,
                    "log_bayes_factor": None,
                    "failed": True,
                    "error": errors.get(name, "non-finite marginal likelihood"),
                }
            )
    return rows


def compare_models(
    data: Dataset,
    prior: PriorConfig,
    n_particles: int,
    iterations: int,
    rng: RngStream,
    *,
    models: Sequence[ModelName | str] = tuple(ModelName),
    workers: int = 1,
    fit_fn: FitFn = run_pmc,
) -> Comparison:
    """Fit every requested model on the same data and renormalize their marginal likelihoods.

    Each model draws from the substream of its canonical index, so the result
    does not depend on the order the models are listed in. A model whose fit
    raises is marked failed and excluded from the renormalization.
    """
    names = sorted({ModelName(name) for name in models}, key=MODEL_INDEX.__getitem__)
    log_marginals: dict[ModelName, float | None] = {}
    errors: dict[ModelName, str] = {}
    fits: dict[ModelName, FitResult] = {}
    for name in names:
        try:
            result = fit_fn(data, ModelSpec.from_name(name), prior, n_particles, iterations, model_stream(rng, name), workers=workers)
        except SkewfitError as exc:
            logger.warning("%s fit failed and is dropped from the model probabilities: %s", name.value, exc)
            log_marginals[name] = None
            errors[name] = str(exc)
            continue
        fits[name] = result
        log_marginals[name] = result.log_marginal_likelihood
        if not math.isfinite(result.log_marginal_likelihood):
            logger.warning("%s fit returned a non-finite marginal likelihood and is dropped", name.value)

    return Comparison(rows=model_probabilities(log_marginals, errors), fits=fits)


def _empty_row(true_model: ModelName, replication: int, models: Iterable[ModelName]) -> StudyRow:
    names = list(models)
    return {
        "true_model": true_model.value,
        "replication": replication,
        "probabilities": {name.value: None for name in names},
        "top_model": None,
        "failed_models": [name.value for name in names],
    }


def run_replication(
    true_model: ModelName,
    replication: int,
    truth: AlphaParams,
    n: int,
    prior: PriorConfig,
    n_particles: int,
    iterations: int,
    rng: RngStream,
    *,
    models: Sequence[ModelName] = tuple(ModelName),
    fit_fn: FitFn = run_pmc,
) -> tuple[StudyRow, str | None]:
    """One study replication: simulate from ``true_model`` then compare. Failures are returned, not raised."""
    key = (MODEL_INDEX[true_model], replication)
    try:
        data = simulate_dataset(ModelSpec.from_name(true_model), truth, n, rng.substream(_SIMULATE_KEY, *key))
        comparison = compare_models(data, prior, n_particles, iterations, rng.substream(_COMPARE_KEY, *key), models=models, fit_fn=fit_fn)
    except SkewfitError as exc:
        logger.warning("replication %d of %s failed: %s", replication, true_model.value, exc)
        return _empty_row(true_model, replication, models), str(exc)

    row: StudyRow = {
        "true_model": true_model.value,
        "replication": replication,
        "probabilities": comparison.probabilities(),
        "top_model": comparison.best_model.value,
        "failed_models": [r["model"] for r in comparison.rows if r["failed"]],
    }
    return row, None


def _true_probability(row: StudyRow) -> float:
    value = row["probabilities"].get(row["true_model"])
    return -1.0 if value is None else value


def sort_study_rows(rows: Sequence[StudyRow]) -> list[StudyRow]:
    """Group by generating model in canonical order; within a group, highest true-model probability first."""
    return sorted(rows, key=lambda row: (MODEL_INDEX[ModelName(row["true_model"])], -_true_probability(row), row["replication"]))


def top_counts(rows: Sequence[StudyRow], models: Sequence[ModelName] = tuple(ModelName)) -> dict[str, dict[str, int]]:
    counts: dict[str, dict[str, int]] = {}
    for row in rows:
        block = counts.setdefault(row["true_model"], {name.value: 0 for name in models})
        if row["top_model"] is not None:
            block[row["top_model"]] = block.get(row["top_model"], 0) + 1
    return counts


def run_study(
    truth: AlphaParams,
    n: int,
    prior: PriorConfig,
    n_particles: int,
    iterations: int,
    replications: int,
    rng: RngStream,
    *,
    generating_models: Sequence[ModelName] = tuple(ModelName),
    models: Sequence[ModelName] = tuple(ModelName),
    workers: int = 1,
    fit_fn: FitFn = run_pmc,
    on_replication: Callable[[StudyRow, str | None], None] | None = None,
) -> tuple[list[StudyRow], list[str | None]]:
    """Simulate ``replications`` datasets per generating model and compare the candidate models on each.

    Replications may run on ``workers`` threads; rows are collected in
    (generating model, replication) order whatever the completion order.
    """
    if replications < 1:
        raise DomainError(f"replications must be positive, got {replications}")
    jobs = [(ModelName(true_model), r) for true_model in generating_models for r in range(replications)]

    def job(item: tuple[ModelName, int]) -> tuple[StudyRow, str | None]:
        true_model, replication = item
        result = run_replication(true_model, replication, truth, n, prior, n_particles, iterations, rng, models=models, fit_fn=fit_fn)
        if on_replication is not None:
            on_replication(*result)
        return result

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, jobs))
    else:
        results = [job(item) for item in jobs]

    rows = [row for row, _ in results]
    errors = [error for _, error in results]
    logger.info("study finished: %d replications, %d failed", len(rows), sum(error is not None for error in errors))
    return rows, errors
