from __future__ import annotations

from typing import Dict, List, Optional, TypedDict


class IterationDiagnostics(TypedDict):
    """Per-iteration record emitted by the population engine."""

    t: int
    entropy: float
    log_sum_unnorm: float
    ess: float
    v_acceptance: Optional[float]
    zero_weight_count: int


class ModelProbability(TypedDict):
    model: str
    log_marginal_likelihood: Optional[float]
    probability: Optional[float]
    log_bayes_factor: Optional[float]
    failed: bool
    error: Optional[str]


class StudyRow(TypedDict):
    """One replication of the simulation study; probabilities keyed by model name."""

    true_model: str
    replication: int
    probabilities: Dict[str, Optional[float]]
    top_model: Optional[str]
    failed_models: List[str]
