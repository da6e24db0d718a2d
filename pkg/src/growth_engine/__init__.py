"""Log-optimal portfolios, optimal deflators and their Monte Carlo verification."""

__version__ = "0.1.0"

from growth_engine._model_file import dump_model, load_model, parse_model
from growth_engine.config import (
    RecessionConfig,
    RunConfig,
    SimulationConfig,
    SolverConfig,
)
from growth_engine.deflator import (
    DeflatorParam,
    DeflatorValidation,
    build_deflator,
    naive_deflator,
    perturbed_deflators,
    validate_deflator,
)
from growth_engine.exceptions import (
    ConvergenceError,
    DimensionError,
    DomainViolationError,
    GrowthEngineError,
    ModelFileError,
    ModelValidationError,
    NonAttainmentError,
    TimeOutOfRangeError,
    UncertifiedReportError,
    VerificationError,
)
from growth_engine.geometry import (
    RecessionReport,
    analyze_recession,
    attainment_certificate,
    recession_value,
)
from growth_engine.model import (
    Characteristics,
    JumpAtom,
    JumpMeasure,
    MarketModel,
    SegmentSpec,
    admissible_domain,
    characteristics_of,
    validate_model,
)
from growth_engine.objective import eval_L, eval_L_delta
from growth_engine.report import EndToEndReport, end_to_end_report
from growth_engine.simulation import PathBundle, simulate, simulate_summary
from growth_engine.solver import (
    SegmentSolution,
    SolveReport,
    condi11_evaluate,
    solve,
    solve_segment,
    verify_first_order,
)
from growth_engine.types import CertificateMode, ExitCode, Verdict
from growth_engine.verification import (
    VerificationReport,
    check_supermartingale,
    lemma_a1_oracle,
    verify_duality,
)

__all__ = [
    "__version__",
    "CertificateMode",
    "Characteristics",
    "ConvergenceError",
    "DeflatorParam",
    "DeflatorValidation",
    "DimensionError",
    "DomainViolationError",
    "EndToEndReport",
    "ExitCode",
    "GrowthEngineError",
    "JumpAtom",
    "JumpMeasure",
    "MarketModel",
    "ModelFileError",
    "ModelValidationError",
    "NonAttainmentError",
    "PathBundle",
    "RecessionConfig",
    "RecessionReport",
    "RunConfig",
    "SegmentSolution",
    "SegmentSpec",
    "SimulationConfig",
    "SolveReport",
    "SolverConfig",
    "TimeOutOfRangeError",
    "UncertifiedReportError",
    "VerificationError",
    "VerificationReport",
    "Verdict",
    "admissible_domain",
    "analyze_recession",
    "attainment_certificate",
    "build_deflator",
    "characteristics_of",
    "check_supermartingale",
    "condi11_evaluate",
    "dump_model",
    "end_to_end_report",
    "eval_L",
    "eval_L_delta",
    "lemma_a1_oracle",
    "load_model",
    "naive_deflator",
    "parse_model",
    "perturbed_deflators",
    "recession_value",
    "simulate",
    "simulate_summary",
    "solve",
    "solve_segment",
    "validate_deflator",
    "validate_model",
    "verify_duality",
]
