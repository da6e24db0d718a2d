"""Configuration TypedDicts for solvers, simulations and CLI runs."""

from __future__ import annotations

import sys
from typing import TypedDict

if sys.version_info >= (3, 11):
    from typing import NotRequired
else:
    from typing_extensions import NotRequired


class SolverConfig(TypedDict, total=False):
    """
    Configuration for the pointwise minimization of L.

    All fields are optional; missing fields fall back to
    ``SOLVER_CONFIG_DEFAULTS``. ``tol`` and ``rc_tol`` are relative to the
    segment's size |b| + ‖c‖ + Λ, so scaling (b, c, F) leaves results unchanged.

    Example:
        >>> opts = SolverConfig(tol=1e-12, max_iterations=500)
        >>> report = solve(model, opts)
    """

    tol: float
    max_iterations: int
    boundary_threshold: float
    fraction_to_boundary: float
    armijo: float
    delta_ladder: tuple[float, ...]
    rc_tol: float
    n_dirs: int
    seed: int
    n_probes: int
    workers: int


class RecessionConfig(TypedDict, total=False):
    """Configuration for the recession-cone analysis."""

    n_dirs: int
    tol: float
    seed: int


class SimulationConfig(TypedDict, total=False):
    """
    Configuration for Monte Carlo simulation.

    Example:
        >>> cfg = SimulationConfig(n_paths=10_000, n_steps=250, seed=7)
        >>> bundle = simulate(model, phi, **cfg)
    """

    n_paths: int
    n_steps: int | None
    seed: int
    workers: int
    block_size: int


class RunConfig(TypedDict, total=False):
    """
    Configuration of a CLI run.

    Built by the argument parser from flags, ``GE_*`` environment variables
    and ``RUN_CONFIG_DEFAULTS``, in that order of precedence.
    """

    subcommand: str
    model_path: str
    seed: int
    n_paths: int
    n_steps: int | None
    n_probes: int
    tol: NotRequired[float | None]
    workers: int
    output_dir: str
    format: str
    dump_paths: bool
    verbose: bool
    lambda_: NotRequired[list[float] | None]
    delta: NotRequired[float | None]
    phi: NotRequired[list[float] | None]
