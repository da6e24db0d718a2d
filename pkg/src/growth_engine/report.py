"""Text and table renderings of every report, and the end-to-end run.

Each renderer returns an ``Artifact``: the lines of the human-readable
report together with a table holding the same numbers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from growth_engine._defaults import resolve_run_config
from growth_engine._model_file import load_model
from growth_engine.config import RunConfig, SimulationConfig, SolverConfig
from growth_engine.deflator import (
    DeflatorValidation,
    build_deflator,
    validate_deflator,
)
from growth_engine.exceptions import GrowthEngineError, VerificationError
from growth_engine.geometry import RecessionReport, analyze_recession
from growth_engine.model import (
    MarketModel,
    ValidationReport,
    admissible_domain,
    validate_model,
)
from growth_engine.objective import eval_L, eval_L_delta
from growth_engine.simulation import SummaryRow, simulate_summary
from growth_engine.solver import SolveReport, solve
from growth_engine.types import ExitCode, FloatArray, Verdict
from growth_engine.verification import (
    VerificationReport,
    check_supermartingale,
    verify_duality,
)

logger = logging.getLogger(__name__)

SUMMARY_HEADER = [
    "t",
    "mean_wealth",
    "se_wealth",
    "mean_deflator",
    "se_deflator",
    "mean_product",
    "se_product",
]
FINDINGS_HEADER = ["report", "check", "passed", "value", "reference", "slack"]


@dataclass
class Artifact:
    """
    A rendered report.

    Attributes:
        name: Base name of the output files.
        lines: Human-readable report.
        header: Table header.
        rows: Table rows.
        exit_code: Exit status the CLI reports for this artifact.
        failures: Names of the failed verification checks.
    """

    name: str
    lines: list[str]
    header: list[str]
    rows: list[list[Any]]
    exit_code: ExitCode = ExitCode.OK
    failures: list[str] = field(default_factory=list)

    def raise_for_failures(self) -> None:
        """
        Raise if verification checks failed.

        Raises:
            VerificationError: With the failed check names, when the exit
                code marks a verification failure.
        """
        if self.exit_code is ExitCode.VERIFICATION_FAILURE and self.failures:
            raise VerificationError(self.failures)


def solver_options(config: RunConfig) -> SolverConfig:
    """Solver overrides carried by a run configuration."""
    opts: SolverConfig = {"seed": config["seed"], "n_probes": config["n_probes"]}
    if config.get("tol") is not None:
        opts["tol"] = float(config["tol"])  # type: ignore[arg-type]
    return opts


def _vector_columns(prefix: str, dim: int) -> list[str]:
    return [f"{prefix}_{i + 1}" for i in range(dim)]


def _join(values: Any) -> str:
    return ", ".join(f"{v:.17g}" for v in values)


def validation_artifact(report: ValidationReport) -> Artifact:
    """Render ``validate_model``."""
    return Artifact(
        name="validate",
        lines=[*report.lines(), f"usable: {report.usable}"],
        header=["check", "passed", "message"],
        rows=[[c.name, c.passed, c.message] for c in report.checks],
        exit_code=ExitCode.OK if report.usable else ExitCode.INPUT_ERROR,
    )


def eval_artifact(m: MarketModel, lam: FloatArray, delta: float | None) -> Artifact:
    """Render L (or L_δ) with derivatives at one point and the domain description."""
    chars = m.characteristics
    if delta is None:
        evaluation, label = eval_L(chars, lam), "L"
    else:
        evaluation, label = eval_L_delta(chars, lam, delta), f"L_delta(delta={delta:g})"
    rows: list[list[Any]] = [["value", "", evaluation.value]]
    lines = [f"{label}({_join(lam)}) = {evaluation.value:.17g}"]
    if evaluation.gradient is not None:
        rows.extend(["gradient", i, g] for i, g in enumerate(evaluation.gradient))
        lines.append(f"gradient: [{_join(evaluation.gradient)}]")
    if evaluation.hessian is not None:
        for i, row in enumerate(evaluation.hessian):
            rows.extend(["hessian", f"{i}:{j}", h] for j, h in enumerate(row))
            lines.append(f"hessian[{i}]: [{_join(row)}]")
    domain = admissible_domain(chars)
    lines.append("domain:")
    lines.extend(f"  {line}" for line in domain.lines())
    rows.extend(
        ["domain", h.atom_index, float(v)] for h in domain.constraints for v in h.normal
    )
    return Artifact(
        name="eval", lines=lines, header=["quantity", "index", "value"], rows=rows
    )


def solve_artifact(report: SolveReport) -> Artifact:
    """One table row per segment; run totals are repeated on every row."""
    dim = len(report.phi[0])
    header = [
        "segment",
        "t_start",
        "t_end",
        *_vector_columns("phi", dim),
        "value",
        "grad_norm",
        "kkt_residual",
        "v_drift",
        "condi11_rate",
        "iterations",
        "mode",
        "certified",
        "optimal_growth",
        "condi11_value",
    ]
    totals = [report.certified, report.optimal_growth, report.condi11_value]
    rows = [
        [
            s.segment.index,
            s.segment.start,
            s.segment.end,
            *s.phi.tolist(),
            s.value,
            s.grad_norm,
            s.kkt_residual,
            s.v_drift,
            s.condi11_rate,
            s.iterations,
            s.mode.value,
            *totals,
        ]
        for s in report.segments
    ]
    return Artifact(name="solve", lines=report.lines(), header=header, rows=rows)


def recession_artifact(reports: list[RecessionReport], dim: int) -> Artifact:
    """Witnesses and constancy bases of every segment."""
    header = ["segment", "kind", "index", *_vector_columns("y", dim), "value"]
    rows: list[list[Any]] = []
    lines: list[str] = []
    for k, r in enumerate(reports):
        lines.append(f"segment {k}")
        lines.extend(f"  {line}" for line in r.lines())
        rows.append([k, "attained", 0, *([math.nan] * dim), float(r.attained)])
        witness = r.witness_direction
        if witness is not None:
            rows.append([k, "witness", 0, *witness.tolist(), r.witness_value])
            rows.extend(
                [k, "ray", i, *(alpha * witness).tolist(), value]
                for i, (alpha, value) in enumerate(r.ray_values)
            )
        rows.extend(
            [k, "rc_basis", i, *y.tolist(), 0.0] for i, y in enumerate(r.rc_basis)
        )
    attained = all(r.attained for r in reports)
    return Artifact(
        name="analyze-recession",
        lines=lines,
        header=header,
        rows=rows,
        exit_code=ExitCode.OK if attained else ExitCode.NON_ATTAINMENT,
    )


def summary_artifact(rows: list[SummaryRow]) -> Artifact:
    """Grid means of wealth, deflator and product."""
    table = [
        [
            r.t,
            r.mean_wealth,
            r.se_wealth,
            r.mean_deflator,
            r.se_deflator,
            r.mean_product,
            r.se_product,
        ]
        for r in rows
    ]
    last = rows[-1]
    lines = [
        f"grid points: {len(rows)}",
        f"E[wealth_T] = {last.mean_wealth:.10g} (se {last.se_wealth:.3g})",
        f"E[deflator_T] = {last.mean_deflator:.10g} (se {last.se_deflator:.3g})",
        f"E[product_T] = {last.mean_product:.10g} (se {last.se_product:.3g})",
    ]
    return Artifact(name="simulate", lines=lines, header=SUMMARY_HEADER, rows=table)


def verification_artifact(reports: list[VerificationReport]) -> Artifact:
    """All findings of the given verification reports."""
    lines = [line for r in reports for line in r.lines()]
    rows = [
        [r.title, f.name, f.passed, f.value, f.reference, f.slack]
        for r in reports
        for f in r.findings
    ]
    failures = [f"{r.title}:{name}" for r in reports for name in r.failures]
    return Artifact(
        name="verify",
        lines=lines,
        header=FINDINGS_HEADER,
        rows=rows,
        exit_code=ExitCode.VERIFICATION_FAILURE if failures else ExitCode.OK,
        failures=failures,
    )


@dataclass
class EndToEndReport:
    """
    The consolidated document of a full run.

    Attributes:
        verdict: Summary verdict.
        exit_code: Exit status of the run.
        facts: (stage, name, passed, value, reference, slack) records; both
            the text and the table are rendered from them.
        message: Error message of the failing stage, if any.
    """

    verdict: Verdict
    exit_code: ExitCode
    facts: list[list[Any]] = field(default_factory=list)
    message: str = ""

    def fact(
        self,
        stage: str,
        name: str,
        value: float,
        passed: bool = True,
        reference: float = math.nan,
        slack: float = math.nan,
    ) -> None:
        self.facts.append(
            [stage, name, bool(passed), float(value), float(reference), float(slack)]
        )

    def artifact(self) -> Artifact:
        lines: list[str] = []
        stage = None
        for s, name, passed, value, reference, slack in self.facts:
            if s != stage:
                lines.append(f"== {s} ==")
                stage = s
            detail = f"{name}: {value:.17g}"
            if not math.isnan(reference):
                detail += f" vs {reference:.17g} (slack {slack:.3g})"
            lines.append(f"  [{'PASS' if passed else 'FAIL'}] {detail}")
        if self.message:
            lines.append(f"error: {self.message}")
        lines.append(f"verdict: {self.verdict.value}")
        summary = [
            "summary",
            f"verdict={self.verdict.value}",
            self.verdict is Verdict.PASS,
            float(self.exit_code.value),
            math.nan,
            math.nan,
        ]
        return Artifact(
            name="report",
            lines=lines,
            header=["stage", "name", "passed", "value", "reference", "slack"],
            rows=[*self.facts, summary],
            exit_code=self.exit_code,
            failures=[f"{s}:{n}" for s, n, passed, *_ in self.facts if not passed],
        )


def _verdict_for(error: GrowthEngineError) -> Verdict:
    if error.exit_code is ExitCode.NON_ATTAINMENT:
        return Verdict.NON_ATTAINMENT
    if error.exit_code is ExitCode.INPUT_ERROR:
        return Verdict.INPUT_ERROR
    return Verdict.FAIL


def _add_validation(out: EndToEndReport, report: ValidationReport) -> None:
    for check in report.checks:
        out.fact("validate", check.name, float(check.passed), check.passed)


def _add_recession(out: EndToEndReport, reports: list[RecessionReport]) -> bool:
    for k, r in enumerate(reports):
        out.fact("recession", f"segment[{k}].attained", float(r.attained), r.attained)
        if r.witness_direction is not None:
            for i, v in enumerate(r.witness_direction):
                out.fact("recession", f"segment[{k}].witness[{i}]", v, False)
            value = float(r.witness_value or 0.0)
            out.fact("recession", f"segment[{k}].witness_value", value, False)
        out.fact("recession", f"segment[{k}].rc_dimension", float(len(r.rc_basis)))
    return all(r.attained for r in reports)


def _add_solve(out: EndToEndReport, report: SolveReport) -> None:
    for s in report.segments:
        k = s.segment.index
        for i, v in enumerate(s.phi):
            out.fact("solve", f"segment[{k}].phi[{i}]", v)
        out.fact("solve", f"segment[{k}].value", s.value)
        out.fact("solve", f"segment[{k}].grad_norm", s.grad_norm, s.certified)
        out.fact("solve", f"segment[{k}].kkt_residual", s.kkt_residual)
        out.fact("solve", f"segment[{k}].v_drift", s.v_drift)
    out.fact("solve", "optimal_growth", report.optimal_growth)
    out.fact("solve", "condi11", report.condi11_value)


def _add_deflator(out: EndToEndReport, validation: DeflatorValidation) -> None:
    out.fact("deflator", "valid", float(validation.valid), validation.valid)
    out.fact("deflator", "log_value", validation.log_value)
    for s in validation.segments:
        name = f"segment[{s.index}].support"
        out.fact("deflator", name, s.support, s.passed, s.v_drift, 0.0)


def _add_verification(out: EndToEndReport, report: VerificationReport) -> None:
    for f in report.findings:
        out.fact(report.title, f.name, f.value, f.passed, f.reference, f.slack)


def end_to_end_report(config: RunConfig) -> EndToEndReport:
    """
    Run validate, recession analysis, solve, deflator construction,
    simulation, duality and supermartingale checks in order.

    The first failing stage stops the run; its error decides the verdict and
    exit code. Nothing is raised for errors of the package's own hierarchy.
    """
    cfg = resolve_run_config(config)
    out = EndToEndReport(verdict=Verdict.PASS, exit_code=ExitCode.OK)
    try:
        m = load_model(cfg["model_path"])
        validation = validate_model(m)
        _add_validation(out, validation)
        if not validation.usable:
            out.verdict, out.exit_code = Verdict.INPUT_ERROR, ExitCode.INPUT_ERROR
            out.message = "model failed validation"
            return out

        recession = analyze_recession(m, {"seed": cfg["seed"]})
        if not _add_recession(out, recession):
            out.verdict, out.exit_code = Verdict.NON_ATTAINMENT, ExitCode.NON_ATTAINMENT
            witness = next(r for r in recession if not r.attained).witness_direction
            out.message = "minimum not attained; witness " + np.array2string(
                np.asarray(witness), precision=10
            )
            return out

        solver_cfg = solver_options(cfg)
        solver_cfg["workers"] = cfg["workers"]
        report = solve(m, solver_cfg)
        _add_solve(out, report)

        param, coefficients = build_deflator(m, report)
        drift_check = validate_deflator(
            m, param, n_probes=cfg["n_probes"], seed=cfg["seed"]
        )
        _add_deflator(out, drift_check)

        sim_cfg: SimulationConfig = {
            "n_paths": cfg["n_paths"],
            "n_steps": cfg["n_steps"],
            "seed": cfg["seed"],
            "workers": cfg["workers"],
        }
        last = simulate_summary(m, report.phi, coefficients, sim_cfg)[-1]
        for name, mean, se in (
            ("mean_wealth_T", last.mean_wealth, last.se_wealth),
            ("mean_deflator_T", last.mean_deflator, last.se_deflator),
            ("mean_product_T", last.mean_product, last.se_product),
        ):
            out.fact("simulate", name, mean, True, math.nan, se)

        checks = [
            verify_duality(
                m,
                report,
                n_paths=cfg["n_paths"],
                seed=cfg["seed"],
                n_steps=cfg["n_steps"],
                workers=cfg["workers"],
            ),
            check_supermartingale(
                m,
                report,
                n_paths=cfg["n_paths"],
                n_steps=cfg["n_steps"],
                seed=cfg["seed"],
                workers=cfg["workers"],
            ),
        ]
        for check in checks:
            _add_verification(out, check)
        if not all(check.passed for check in checks):
            out.verdict, out.exit_code = Verdict.FAIL, ExitCode.VERIFICATION_FAILURE
            failures = [name for check in checks for name in check.failures]
            out.message = "failed checks: " + ", ".join(failures)
    except GrowthEngineError as e:
        logger.info("report stopped: %s", e)
        out.verdict, out.exit_code, out.message = _verdict_for(e), e.exit_code, str(e)
    return out
