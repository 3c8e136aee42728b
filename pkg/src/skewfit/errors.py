from __future__ import annotations

import numpy as np


class SkewfitError(Exception):
    """Base class for every error raised by the skewfit package."""


class DomainError(SkewfitError, ValueError):
    """An argument lies outside the domain of a function."""


class MatrixError(SkewfitError, np.linalg.LinAlgError):
    """A matrix that must be symmetric positive definite is not."""


class ConstraintError(SkewfitError, ValueError):
    """A parameter set violates the skewness ellipsoid or another model constraint."""


class DegenerateLatentsError(SkewfitError):
    """The latent variables do not identify the complete-data estimators."""


class NumericError(SkewfitError, ArithmeticError):
    """A numerical routine failed to converge or produced a non-finite value."""


class DegeneratePopulationError(NumericError):
    """Every particle of an iteration received a null importance weight."""

    def __init__(self, message: str, *, iteration: int | None = None) -> None:
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


class PreconditionError(SkewfitError):
    """A posterior-propriety or sample-size precondition does not hold."""

    def __init__(self, message: str, *, condition: str) -> None:
        super().__init__(message)
        self.condition = condition


class ParseError(SkewfitError, ValueError):
    """A dataset file could not be parsed; row and column are 1-based."""

    def __init__(self, message: str, *, row: int | None = None, column: int | None = None) -> None:
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.row = row
        self.column = column
