from __future__ import annotations

from typing import Sequence

import pandas as pd

from src.data.models import CompareReport, FitReport, ModelProbabilityRow, StudyReport, StudyRowRecord
from src.utils.display import print_fit_summary, print_model_probabilities, print_study_summary

from .compare import Comparison, sort_study_rows, top_counts
from .model import ModelName
from .pmc import FitResult
from .types import StudyRow


class ReportBuilder:
    """Turns engine results into serializable reports and prints them using display utils.

    Stateless apart from the run identifiers every report carries.
    """

    def __init__(self, *, seed: int, particles: int, iterations: int) -> None:
        self._seed = seed
        self._particles = particles
        self._iterations = iterations

    def fit_report(self, result: FitResult, *, n: int) -> FitReport:
        return FitReport.from_result(result, seed=self._seed, n=n)

    def compare_report(self, comparison: Comparison, *, n: int) -> CompareReport:
        return CompareReport(
            rows=[ModelProbabilityRow(**row) for row in comparison.rows],
            best_model=comparison.best_model,
            fits={name.value: self.fit_report(result, n=n) for name, result in comparison.fits.items()},
        )

    def study_report(
        self,
        rows: Sequence[StudyRow],
        errors: Sequence[str | None],
        *,
        n: int,
        replications: int,
        models: Sequence[ModelName] = tuple(ModelName),
    ) -> StudyReport:
        by_key = {(row["true_model"], row["replication"]): error for row, error in zip(rows, errors)}
        ordered = sort_study_rows(rows)
        return StudyReport(
            rows=[StudyRowRecord(**row, error=by_key[(row["true_model"], row["replication"])]) for row in ordered],
            top_counts=top_counts(ordered, models),
            replications=replications,
            n=n,
            particles=self._particles,
            iterations=self._iterations,
            seed=self._seed,
        )

    @staticmethod
    def study_frame(report: StudyReport) -> pd.DataFrame:
        """Stacked probability table, one row per (generating model, replication)."""
        records = []
        for row in report.rows:
            record = {"true_model": row.true_model.value, "replication": row.replication}
            record.update({f"p_{name}": prob for name, prob in row.probabilities.items()})
            record["top_model"] = None if row.top_model is None else row.top_model.value
            records.append(record)
        return pd.DataFrame.from_records(records)

    def print_fit(self, report: FitReport, *, verbose: bool = False, initial_centre: list[float] | None = None) -> None:
        print_fit_summary(report, verbose=verbose, initial_centre=initial_centre)

    def print_compare(self, report: CompareReport) -> None:
        print_model_probabilities(report)

    def print_study(self, report: StudyReport) -> None:
        print_study_summary(report)
