"""Exception classes for growth-engine."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

import numpy as np
from pydantic_core import ErrorDetails

from growth_engine.types import ExitCode

if TYPE_CHECKING:
    from growth_engine.model import ValidationReport


def _format_vector(vector: Any) -> str:
    values = np.atleast_1d(np.asarray(vector, dtype=float))
    return "[" + ", ".join(f"{value:.10g}" for value in values) + "]"


class GrowthEngineError(Exception):
    """
    Base exception for all growth-engine errors.

    Attributes:
        message: Human-readable error message.
        exit_code: Process exit code the CLI maps this error to.
    """

    exit_code: ExitCode = ExitCode.INPUT_ERROR

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return self.message


class ModelFileError(GrowthEngineError):
    """
    Raised when a model file cannot be read or does not match the schema.

    Attributes:
        path: The model file path.
        errors: Pydantic error details (empty for I/O failures).
        line: Line of a JSON syntax error, when known.
        column: Column of a JSON syntax error, when known.
    """

    def __init__(
        self,
        message: str,
        path: str,
        errors: list[ErrorDetails] | None = None,
        line: int | None = None,
        column: int | None = None,
    ) -> None:
        super().__init__(message)
        self.path = path
        self.errors = errors or []
        self.line = line
        self.column = column

    def __str__(self) -> str:
        location = self.path
        if self.line is not None:
            location = f"{location}:{self.line}:{self.column or 0}"
        if self.errors:
            return f"{location}: {self.message} ({len(self.errors)} error(s))"
        return f"{location}: {self.message}"


class ModelValidationError(GrowthEngineError):
    """
    Raised when a model fails semantic validation.

    Attributes:
        report: The validation report listing every check.
    """

    def __init__(self, report: ValidationReport) -> None:
        failed = [check.name for check in report.failed]
        super().__init__(f"Model validation failed: {', '.join(failed)}")
        self.report = report


class TimeOutOfRangeError(GrowthEngineError):
    """Raised when a time query lies outside the model horizon [0, T]."""

    def __init__(self, t: float, horizon: float) -> None:
        super().__init__(f"Time {t} outside [0, {horizon}]")
        self.t = t
        self.horizon = horizon


class DimensionError(GrowthEngineError):
    """Raised on dimension mismatches or unsupported dimensions."""


class DomainViolationError(GrowthEngineError):
    """
    Raised when a fraction leaves the admissible domain 1 + λᵀx > 0.

    Attributes:
        atom_index: Index of the offending atom.
        slack: The value of 1 + λᵀx at that atom.
    """

    def __init__(self, message: str, atom_index: int, slack: float) -> None:
        super().__init__(message)
        self.atom_index = atom_index
        self.slack = slack

    def __str__(self) -> str:
        return f"{self.message} (atom {self.atom_index}, slack {self.slack:.6g})"


class NonAttainmentError(GrowthEngineError):
    """
    Raised when the minimum of the log-growth objective is not attained.

    Attributes:
        direction: Witness direction of unbounded descent.
        recession_value: Recession value L0⁺ along the witness.
    """

    exit_code = ExitCode.NON_ATTAINMENT

    def __init__(self, message: str, direction: Any, recession_value: float) -> None:
        super().__init__(message)
        self.direction = np.asarray(direction, dtype=float)
        self.recession_value = recession_value

    def __str__(self) -> str:
        return (
            f"{self.message} (witness {_format_vector(self.direction)}, "
            f"L0+ = {self.recession_value:.10g})"
        )


class ConvergenceError(GrowthEngineError):
    """
    Raised when an iterative solver hits its iteration cap.

    Attributes:
        iterations: Number of iterations performed.
        trace: Objective values along the iterations.
    """

    exit_code = ExitCode.VERIFICATION_FAILURE

    def __init__(self, message: str, iterations: int, trace: list[float]) -> None:
        super().__init__(message)
        self.iterations = iterations
        self.trace = trace

    def __str__(self) -> str:
        return f"{self.message} (after {self.iterations} iterations)"


class UncertifiedReportError(GrowthEngineError):
    """Raised when a solve report without optimality certificate is used."""

    exit_code = ExitCode.VERIFICATION_FAILURE


class VerificationError(GrowthEngineError):
    """
    Raised when a verification report contains failed checks.

    Attributes:
        failures: Names of the failed checks.
    """

    exit_code = ExitCode.VERIFICATION_FAILURE

    def __init__(self, failures: list[str]) -> None:
        super().__init__(f"Verification failed: {', '.join(failures)}")
        self.failures = failures

    def __str__(self) -> str:
        return f"{self.message}: {', '.join(self.failures)}"
