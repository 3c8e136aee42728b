"""Dataset CSV files, run configs and JSON reports."""

from __future__ import annotations

import io
import logging
import math
import re
from pathlib import Path
from typing import TypeVar

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from src.skewfit.errors import DomainError, ParseError
from src.skewfit.likelihood import Dataset

from .models import RunConfig

logger = logging.getLogger(__name__)

ReportT = TypeVar("ReportT", bound=BaseModel)

_RAGGED = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


def _as_number(cell: object) -> float | None:
    if cell is None or (isinstance(cell, float) and math.isnan(cell)):
        return None
    try:
        value = float(str(cell).strip())
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_csv(path: str | Path) -> Dataset:
    """Read a comma-separated numeric matrix; a first row with no numeric cell is a header.

    Rows and columns in errors are 1-based file coordinates.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        frame = pd.read_csv(io.StringIO(text), header=None, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError as exc:
        raise ParseError(f"{path} is empty") from exc
    except pd.errors.ParserError as exc:
        match = _RAGGED.search(str(exc))
        if match is None:
            raise ParseError(f"{path}: {exc}") from exc
        expected, line, _ = (int(g) for g in match.groups())
        raise ParseError(f"ragged row in {path}", row=line, column=expected + 1) from exc

    cells = frame.to_numpy(dtype=object)
    header_rows = 0
    if all(_as_number(cell) is None for cell in cells[0]):
        header_rows = 1
        logger.debug("header detected in %s: %s", path, list(cells[0]))
    body = cells[header_rows:]
    if body.shape[0] == 0:
        raise ParseError(f"{path} has no data rows")

    # pandas does not report blank lines, so map frame rows back to file lines.
    lines = [i + 1 for i, line in enumerate(text.splitlines()) if line.strip()]
    y = np.empty(body.shape, dtype=float)
    for i, row in enumerate(body):
        for j, cell in enumerate(row):
            value = _as_number(cell)
            if value is None:
                label = "missing value" if str(cell).strip() in ("", "NA", "NaN", "nan") else f"non-numeric cell {cell!r}"
                raise ParseError(f"{label} in {path}", row=lines[i + header_rows], column=j + 1)
            y[i, j] = value
    try:
        return Dataset.from_array(y)
    except DomainError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_csv(data: Dataset, path: str | Path | None) -> str:
    """Write the dataset with a y1..yp header at full float precision; returns the text."""
    frame = pd.DataFrame(data.y, columns=[f"y{j + 1}" for j in range(data.p)])
    text = frame.to_csv(index=False, lineterminator="\n")
    if path is not None:
        Path(path).write_text(text)
    return text


def load_run_config(path: str | Path) -> RunConfig:
    try:
        return RunConfig.model_validate_json(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    except ValidationError as exc:
        raise ParseError(f"invalid config {path}: {exc}") from exc


def dump_report(report: BaseModel, *, timings: bool = False) -> str:
    """Serialize a report; wall times are dropped unless ``timings`` so seeded reports are byte-identical."""
    exclude = None if timings else _wall_time_paths(report)
    return report.model_dump_json(indent=2, exclude=exclude) + "\n"


def _wall_time_paths(report: BaseModel) -> dict | None:
    if "wall_time" in type(report).model_fields:
        return {"wall_time": True}
    fits = getattr(report, "fits", None)
    if isinstance(fits, dict):
        return {"fits": {name: {"wall_time": True} for name in fits}}
    return None


def write_report(report: BaseModel, path: str | Path, *, timings: bool = False) -> None:
    Path(path).write_text(dump_report(report, timings=timings))


def read_report(path: str | Path, cls: type[ReportT]) -> ReportT:
    try:
        return cls.model_validate_json(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read report {path}: {exc}") from exc
    except ValidationError as exc:
        raise ParseError(f"invalid report {path}: {exc}") from exc
