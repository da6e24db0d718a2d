"""Command-line interface.

Settings come from flags, then ``GE_*`` environment variables, then
``RUN_CONFIG_DEFAULTS``. Every subcommand writes ``<out>/<subcommand>.csv``
and, in text format, ``<out>/<subcommand>.txt``; both are written atomically.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 the minimum
of the log-growth objective is not attained.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Callable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from growth_engine import __version__
from growth_engine._defaults import resolve_run_config
from growth_engine._model_file import load_model
from growth_engine._tables import render_table, write_table, write_text
from growth_engine.config import RunConfig
from growth_engine.deflator import build_deflator
from growth_engine.exceptions import (
    GrowthEngineError,
    ModelValidationError,
    NonAttainmentError,
)
from growth_engine.geometry import analyze_recession
from growth_engine.model import MarketModel, validate_model
from growth_engine.report import (
    Artifact,
    end_to_end_report,
    eval_artifact,
    recession_artifact,
    solve_artifact,
    solver_options,
    summary_artifact,
    validation_artifact,
    verification_artifact,
)
from growth_engine.simulation import (
    ExponentialCoefficients,
    simulate,
    simulate_summary,
)
from growth_engine.solver import solve
from growth_engine.types import ExitCode, OutputFormat, Subcommand
from growth_engine.verification import check_supermartingale, verify_duality

logger = logging.getLogger(__name__)

# config key -> (environment variable, parser)
ENVIRONMENT: dict[str, tuple[str, Callable[[str], Any]]] = {
    "model_path": ("GE_MODEL", str),
    "seed": ("GE_SEED", int),
    "n_paths": ("GE_PATHS", int),
    "n_steps": ("GE_STEPS", int),
    "n_probes": ("GE_PROBES", int),
    "tol": ("GE_TOL", float),
    "workers": ("GE_WORKERS", int),
    "output_dir": ("GE_OUT", str),
    "format": ("GE_FORMAT", str),
}

POSITIVE_COUNTS = ("n_paths", "n_steps", "n_probes", "workers")


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per operation and shared flags."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", dest="model_path", help="model file (JSON)")
    common.add_argument("--seed", type=int, help="root seed")
    common.add_argument("--paths", dest="n_paths", type=int, help="Monte Carlo paths")
    common.add_argument("--steps", dest="n_steps", type=int, help="time steps")
    common.add_argument(
        "--probes", dest="n_probes", type=int, help="first-order test points"
    )
    common.add_argument("--tol", type=float, help="solver tolerance")
    common.add_argument("--workers", type=int, help="parallel workers")
    common.add_argument("--out", dest="output_dir", help="output directory")
    common.add_argument(
        "--format", choices=[f.value for f in OutputFormat], help="output format"
    )
    common.add_argument("-v", "--verbose", action="store_true", default=None)

    parser = argparse.ArgumentParser(
        prog="growth-engine",
        description="Log-optimal portfolios and deflators for jump-diffusion markets.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="subcommand", required=True)

    commands.add_parser(
        Subcommand.VALIDATE.value, parents=[common], help="check a model file"
    )
    evaluate = commands.add_parser(
        Subcommand.EVAL.value, parents=[common], help="evaluate L or L_delta"
    )
    evaluate.add_argument(
        "--lambda", dest="lambda_", type=float, nargs="+", required=True
    )
    evaluate.add_argument("--delta", type=float)
    commands.add_parser(
        Subcommand.SOLVE.value, parents=[common], help="minimize L per segment"
    )
    commands.add_parser(
        Subcommand.ANALYZE_RECESSION.value,
        parents=[common],
        help="certify attainment or find a witness of unbounded descent",
    )
    simulate_cmd = commands.add_parser(
        Subcommand.SIMULATE.value, parents=[common], help="simulate wealth paths"
    )
    simulate_cmd.add_argument("--phi", type=float, nargs="+")
    simulate_cmd.add_argument("--dump-paths", action="store_true", default=None)
    commands.add_parser(
        Subcommand.VERIFY.value, parents=[common], help="Monte Carlo duality checks"
    )
    commands.add_parser(
        Subcommand.REPORT.value, parents=[common], help="run every stage in order"
    )
    return parser


def config_from_args(
    args: argparse.Namespace, environ: Mapping[str, str] | None = None
) -> RunConfig:
    """
    Merge flags, ``GE_*`` variables and defaults into a run configuration.

    Raises:
        ValueError: On unparsable environment values, non-positive counts, a
            missing model path or an unknown format.
    """
    environ = os.environ if environ is None else environ
    overrides: dict[str, Any] = {}
    for key, (variable, parse) in ENVIRONMENT.items():
        raw = environ.get(variable)
        if raw is None or raw == "":
            continue
        try:
            overrides[key] = parse(raw)
        except ValueError as e:
            raise ValueError(f"{variable}={raw!r} is not a valid value") from e
    for key, value in vars(args).items():
        if value is not None:
            overrides[key] = value

    config = resolve_run_config(overrides)  # type: ignore[arg-type]
    for key in POSITIVE_COUNTS:
        value = config.get(key)
        if value is not None and value <= 0:
            raise ValueError(f"{key} must be positive, got {value}")
    if not config.get("model_path"):
        raise ValueError("no model file given (use --model or GE_MODEL)")
    if config["format"] not in {f.value for f in OutputFormat}:
        raise ValueError(f"unknown format {config['format']!r}")
    return config


def _load(config: RunConfig) -> MarketModel:
    m = load_model(config["model_path"])
    report = validate_model(m)
    if not report.usable:
        raise ModelValidationError(report)
    return m


def _solve_opts(config: RunConfig) -> Any:
    opts = solver_options(config)
    opts["workers"] = config["workers"]
    return opts


def _sim_opts(config: RunConfig) -> Any:
    return {
        "n_paths": config["n_paths"],
        "n_steps": config["n_steps"],
        "seed": config["seed"],
        "workers": config["workers"],
    }


def _validate(config: RunConfig) -> Artifact:
    return validation_artifact(validate_model(load_model(config["model_path"])))


def _eval(config: RunConfig) -> Artifact:
    m = _load(config)
    lam = np.asarray(config.get("lambda_") or [], dtype=float)
    if lam.shape != (m.dim,):
        raise ValueError(f"--lambda needs {m.dim} values, got {lam.size}")
    return eval_artifact(m, lam, config.get("delta"))


def _solve(config: RunConfig) -> Artifact:
    return solve_artifact(solve(_load(config), _solve_opts(config)))


def _recession(config: RunConfig) -> Artifact:
    m = _load(config)
    reports = analyze_recession(m, {"seed": config["seed"]})
    return recession_artifact(reports, m.dim)


def _simulate(config: RunConfig) -> Artifact:
    m = _load(config)
    coefficients: ExponentialCoefficients | None = None
    phi: Any = config.get("phi")
    try:
        report = solve(m, _solve_opts(config))
        _, coefficients = build_deflator(m, report)
        if phi is None:
            phi = report.phi
    except NonAttainmentError:
        if phi is None:
            raise
        logger.warning("minimum not attained; simulating without a deflator")
    if config.get("phi") is not None and len(phi) != m.dim:
        raise ValueError(f"--phi needs {m.dim} values, got {len(phi)}")

    rows = simulate_summary(m, phi, coefficients, _sim_opts(config))
    artifact = summary_artifact(rows)
    if config["dump_paths"]:
        bundle = simulate(
            m,
            phi,
            n_paths=config["n_paths"],
            n_steps=config["n_steps"],
            seed=config["seed"],
            deflator=coefficients,
            workers=config["workers"],
        )
        log_deflator = (
            bundle.log_deflator_T
            if bundle.log_deflator_T is not None
            else np.full(bundle.n_paths, np.nan)
        )
        write_table(
            Path(config["output_dir"]) / "simulate_paths.csv",
            ["path", "log_wealth_T", "log_deflator_T"],
            (
                [i, float(w), float(z)]
                for i, (w, z) in enumerate(zip(bundle.log_wealth_T, log_deflator))
            ),
        )
    return artifact


def _verify(config: RunConfig) -> Artifact:
    m = _load(config)
    report = solve(m, _solve_opts(config))
    kwargs = {
        "n_paths": config["n_paths"],
        "n_steps": config["n_steps"],
        "seed": config["seed"],
        "workers": config["workers"],
    }
    return verification_artifact(
        [
            verify_duality(m, report, **kwargs),
            check_supermartingale(m, report, **kwargs),
        ]
    )


def _report(config: RunConfig) -> Artifact:
    return end_to_end_report(config).artifact()


HANDLERS: dict[str, Callable[[RunConfig], Artifact]] = {
    Subcommand.VALIDATE.value: _validate,
    Subcommand.EVAL.value: _eval,
    Subcommand.SOLVE.value: _solve,
    Subcommand.ANALYZE_RECESSION.value: _recession,
    Subcommand.SIMULATE.value: _simulate,
    Subcommand.VERIFY.value: _verify,
    Subcommand.REPORT.value: _report,
}


def emit(artifact: Artifact, config: RunConfig) -> None:
    """Write the artifact files and print the report to stdout."""
    out = Path(config["output_dir"])
    write_table(out / f"{artifact.name}.csv", artifact.header, artifact.rows)
    if config["format"] == OutputFormat.TEXT.value:
        write_text(out / f"{artifact.name}.txt", artifact.lines)
        for line in artifact.lines:
            print(line)
    else:
        sys.stdout.write(render_table(artifact.header, artifact.rows))


def run(config: RunConfig) -> int:
    """
    Execute one subcommand.

    The artifact files are written before failed verification checks are
    raised as ``VerificationError``; every package error maps to its exit code.

    Returns:
        The process exit code.
    """
    handler = HANDLERS[config["subcommand"]]
    try:
        artifact = handler(config)
        emit(artifact, config)
        artifact.raise_for_failures()
    except ModelValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        for line in e.report.lines():
            print(f"  {line}", file=sys.stderr)
        return int(e.exit_code)
    except GrowthEngineError as e:
        print(f"error: {e}", file=sys.stderr)
        return int(e.exit_code)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return int(ExitCode.INPUT_ERROR)
    return int(artifact.exit_code)


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point of the ``growth-engine`` script."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return int(ExitCode.INPUT_ERROR)
    logger.info("running %s on %s", config["subcommand"], config["model_path"])
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
