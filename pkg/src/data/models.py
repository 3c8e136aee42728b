from __future__ import annotations

import math
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from src.skewfit.distributions import SpdMatrix
from src.skewfit.model import AlphaParams, ModelName, PriorConfig
from src.skewfit.pmc import FitResult

Command = Literal["simulate", "fit", "compare", "study"]
PresetName = Literal["full", "desk"]

PRESETS: dict[str, dict[str, int]] = {
    "full": {"particles": 20000, "iterations": 6},
    "desk": {"particles": 4000, "iterations": 5},
}

# Simulation setting used by the study defaults: p = 4, n = 300
DEFAULT_XI = [5.0, 9.0, 3.0, 10.0]
DEFAULT_SIGMA = [
    [7.0, 2.0, 1.0, 1.0],
    [2.0, 8.0, -2.0, 3.0],
    [1.0, -2.0, 5.0, -2.0],
    [1.0, 3.0, -2.0, 8.0],
]
DEFAULT_ALPHA = [4.0, 4.0, 4.0, 4.0]


class TruthConfig(BaseModel):
    """Generating parameters (xi, Sigma, alpha, nu) for simulated data."""

    xi: list[float] = Field(default_factory=lambda: list(DEFAULT_XI))
    sigma: list[list[float]] = Field(default_factory=lambda: [list(row) for row in DEFAULT_SIGMA])
    alpha: list[float] = Field(default_factory=lambda: list(DEFAULT_ALPHA))
    nu: float = Field(default=10.0, gt=0)

    @model_validator(mode="after")
    def _dimensions_agree(self) -> "TruthConfig":
        p = len(self.xi)
        if p < 1 or len(self.alpha) != p or len(self.sigma) != p or any(len(row) != p for row in self.sigma):
            raise ValueError("xi, alpha and sigma dimensions disagree")
        return self

    @property
    def p(self) -> int:
        return len(self.xi)

    def to_alpha_params(self) -> AlphaParams:
        return AlphaParams(
            xi=np.asarray(self.xi, dtype=float),
            alpha=np.asarray(self.alpha, dtype=float),
            sigma=SpdMatrix.from_array(self.sigma),
            nu=float(self.nu),
        )


class StudyConfig(BaseModel):
    n: int = Field(default=300, ge=1)
    truth: TruthConfig = Field(default_factory=TruthConfig)
    generating_models: list[ModelName] = Field(default_factory=lambda: list(ModelName))


class RunConfig(BaseModel):
    """Everything a CLI command needs; mirrors the JSON config file."""

    command: Optional[Command] = None
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    model: ModelName = ModelName.ST
    models: list[ModelName] = Field(default_factory=lambda: list(ModelName))
    prior: PriorConfig = Field(default_factory=PriorConfig)
    particles: int = Field(default=PRESETS["full"]["particles"], ge=2)
    iterations: int = Field(default=PRESETS["full"]["iterations"], ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    replications: int = Field(default=50, ge=1)
    workers: int = Field(default=1, ge=1)
    study: StudyConfig = Field(default_factory=StudyConfig)

    @field_validator("models")
    @classmethod
    def _models_unique(cls, models: list[ModelName]) -> list[ModelName]:
        if not models:
            raise ValueError("at least one model is required")
        if len(set(models)) != len(models):
            raise ValueError("models must not repeat")
        return models

    def with_preset(self, preset: PresetName | None) -> "RunConfig":
        if preset is None:
            return self
        return self.model_copy(update=PRESETS[preset])


class DiagnosticsRecord(BaseModel):
    t: int
    entropy: float
    log_sum_unnorm: float
    ess: float
    v_acceptance: Optional[float] = None
    zero_weight_count: int


class FitReport(BaseModel):
    model: ModelName
    log_marginal_likelihood: float
    xi: list[float]
    xi_sd: list[float]
    alpha: list[float]
    delta: list[float]
    psi: list[float]
    sigma: list[list[float]]
    g: list[list[float]]
    nu_mean: Optional[float] = None
    nu_grid: Optional[list[float]] = None
    nu_pmf: Optional[list[float]] = None
    diagnostics: list[DiagnosticsRecord]
    particles: int
    iterations: int
    seed: int
    n: int
    p: int
    wall_time: Optional[float] = None

    @field_validator("nu_pmf")
    @classmethod
    def _pmf_sums_to_one(cls, pmf: Optional[list[float]]) -> Optional[list[float]]:
        if pmf is not None and not math.isclose(sum(pmf), 1.0, abs_tol=1e-9):
            raise ValueError("nu pmf must sum to one")
        return pmf

    @classmethod
    def from_result(cls, result: FitResult, *, seed: int, n: int) -> "FitReport":
        summary = result.summary
        return cls(
            model=ModelName(summary.model),
            log_marginal_likelihood=result.log_marginal_likelihood,
            xi=summary.xi.tolist(),
            xi_sd=summary.xi_sd.tolist(),
            alpha=summary.alpha.tolist(),
            delta=summary.delta.tolist(),
            psi=summary.psi.tolist(),
            sigma=summary.sigma.tolist(),
            g=summary.g.tolist(),
            nu_mean=summary.nu_mean,
            nu_grid=None if summary.nu_grid is None else summary.nu_grid.tolist(),
            nu_pmf=None if summary.nu_pmf is None else summary.nu_pmf.tolist(),
            diagnostics=[DiagnosticsRecord(**record) for record in result.diagnostics],
            particles=result.n_particles,
            iterations=result.iterations,
            seed=seed,
            n=n,
            p=int(summary.xi.size),
            wall_time=result.wall_time,
        )


class ModelProbabilityRow(BaseModel):
    model: ModelName
    log_marginal_likelihood: Optional[float] = None
    probability: Optional[float] = None
    log_bayes_factor: Optional[float] = None
    failed: bool = False
    error: Optional[str] = None


class CompareReport(BaseModel):
    rows: list[ModelProbabilityRow]
    best_model: ModelName
    fits: dict[str, FitReport]

    @model_validator(mode="after")
    def _probabilities_sum_to_one(self) -> "CompareReport":
        total = sum(row.probability for row in self.rows if row.probability is not None)
        if not math.isclose(total, 1.0, abs_tol=1e-12):
            raise ValueError(f"model probabilities sum to {total}, not one")
        return self


class StudyRowRecord(BaseModel):
    true_model: ModelName
    replication: int
    probabilities: dict[str, Optional[float]]
    top_model: Optional[ModelName] = None
    failed_models: list[ModelName] = Field(default_factory=list)
    error: Optional[str] = None


class StudyReport(BaseModel):
    """Stacked posterior model probabilities, sorted by the true model's probability within each block."""

    rows: list[StudyRowRecord]
    top_counts: dict[str, dict[str, int]]
    replications: int
    n: int
    particles: int
    iterations: int
    seed: int
