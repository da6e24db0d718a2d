"""Type definitions and enumerations for growth-engine."""

from __future__ import annotations

from enum import Enum
from typing import TypeAlias

import numpy as np
import numpy.typing as npt

FloatArray: TypeAlias = npt.NDArray[np.float64]
IntArray: TypeAlias = npt.NDArray[np.int64]
VectorLike: TypeAlias = npt.ArrayLike


class Subcommand(str, Enum):
    """CLI subcommand enumeration."""

    VALIDATE = "validate"
    EVAL = "eval"
    SOLVE = "solve"
    ANALYZE_RECESSION = "analyze-recession"
    SIMULATE = "simulate"
    VERIFY = "verify"
    REPORT = "report"


class OutputFormat(str, Enum):
    """Output format of CLI artifacts."""

    TEXT = "text"
    TABLE = "table"


class CertificateMode(str, Enum):
    """How optimality of a segment minimizer was certified."""

    GRADIENT = "gradient"
    DIRECTIONAL = "directional"


class Verdict(str, Enum):
    """Summary verdict of an end-to-end report."""

    PASS = "PASS"
    FAIL = "FAIL"
    NON_ATTAINMENT = "NON-ATTAINMENT"
    INPUT_ERROR = "INPUT-ERROR"


class ExitCode(int, Enum):
    """Process exit codes of the CLI."""

    OK = 0
    VERIFICATION_FAILURE = 1
    INPUT_ERROR = 2
    NON_ATTAINMENT = 3
