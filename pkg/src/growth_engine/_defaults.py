"""Default configuration values for solvers, simulations and runs.

This module centralizes all default values so every consumer merges the same
numbers, and exposes the ``resolve_*`` helpers that apply them.
"""

from __future__ import annotations

import os

from growth_engine.config import (
    RecessionConfig,
    RunConfig,
    SimulationConfig,
    SolverConfig,
)

STEPS_PER_UNIT_TIME = 250
PSD_TOLERANCE = 1e-10

SOLVER_CONFIG_DEFAULTS: SolverConfig = {
    "tol": 1e-10,
    "max_iterations": 200,
    "boundary_threshold": 1e-7,
    "fraction_to_boundary": 0.1,
    "armijo": 1e-4,
    "delta_ladder": (0.5, 0.9, 0.99, 0.999),
    "rc_tol": 1e-9,
    "n_dirs": 256,
    "seed": 42,
    "n_probes": 50,
    "workers": 1,
}

RECESSION_CONFIG_DEFAULTS: RecessionConfig = {
    "n_dirs": 256,
    "tol": 1e-9,
    "seed": 42,
}

SIMULATION_CONFIG_DEFAULTS: SimulationConfig = {
    "n_paths": 100_000,
    "n_steps": None,
    "seed": 42,
    "workers": 1,
    "block_size": 2048,
}

RUN_CONFIG_DEFAULTS: RunConfig = {
    "model_path": "",
    "seed": 42,
    "n_paths": 100_000,
    "n_steps": None,
    "n_probes": 50,
    "tol": None,
    "workers": os.cpu_count() or 1,
    "output_dir": ".",
    "format": "text",
    "dump_paths": False,
    "verbose": False,
    "lambda_": None,
    "delta": None,
    "phi": None,
}


def resolve_solver_config(opts: SolverConfig | None = None) -> SolverConfig:
    """Merge solver overrides onto the defaults."""
    return {**SOLVER_CONFIG_DEFAULTS, **(opts or {})}  # type: ignore[typeddict-item]


def resolve_recession_config(opts: RecessionConfig | None = None) -> RecessionConfig:
    """Merge recession-analysis overrides onto the defaults."""
    return {**RECESSION_CONFIG_DEFAULTS, **(opts or {})}  # type: ignore[typeddict-item]


def resolve_simulation_config(
    opts: SimulationConfig | None = None,
) -> SimulationConfig:
    """Merge simulation overrides onto the defaults."""
    return {  # type: ignore[typeddict-item]
        **SIMULATION_CONFIG_DEFAULTS,
        **(opts or {}),
    }


def resolve_run_config(opts: RunConfig | None = None) -> RunConfig:
    """Merge run overrides onto the defaults."""
    return {**RUN_CONFIG_DEFAULTS, **(opts or {})}  # type: ignore[typeddict-item]
