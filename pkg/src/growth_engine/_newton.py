"""Damped Newton iterations that stay inside {λ : 1 + λᵀx_i > 0}."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from growth_engine.objective import ObjectiveEval
from growth_engine.types import FloatArray

logger = logging.getLogger(__name__)

MAX_BACKTRACKS = 60


@dataclass
class NewtonResult:
    """
    Outcome of one damped Newton run.

    Attributes:
        point: Last iterate.
        evaluation: Objective evaluation at ``point``.
        iterations: Newton steps taken.
        trace: Objective values, starting with the start point.
        converged: Gradient norm reached the tolerance.
        stalled: The line search could not decrease the objective.
    """

    point: FloatArray
    evaluation: ObjectiveEval
    iterations: int = 0
    trace: list[float] = field(default_factory=list)
    converged: bool = False
    stalled: bool = False

    @property
    def grad_norm(self) -> float:
        if self.evaluation.gradient is None:
            return math.inf
        return float(np.linalg.norm(self.evaluation.gradient))


def max_feasible_step(
    slack: FloatArray, rate: FloatArray, fraction_to_boundary: float
) -> float:
    """
    Largest step α ≤ 1 keeping every slack at least a fraction of its value.

    Along λ + αp the slacks move as s + α·(Xp); the step is capped so that
    each shrinking slack keeps ``fraction_to_boundary`` of its current value.
    """
    shrinking = rate < 0
    if not np.any(shrinking):
        return 1.0
    limits = (1.0 - fraction_to_boundary) * slack[shrinking] / -rate[shrinking]
    return float(min(1.0, np.min(limits)))


def damped_newton(
    objective: Callable[[FloatArray], ObjectiveEval],
    start: FloatArray,
    sizes: FloatArray,
    tol: float,
    max_iterations: int,
    fraction_to_boundary: float,
    armijo: float,
) -> NewtonResult:
    """
    Minimize ``objective`` from ``start`` with backtracking Newton steps.

    Steps are the minimum-norm least-squares solutions of Hp = −g, so flat
    directions of a singular Hessian are never entered. Every trial point
    satisfies 1 + λᵀx_i ≥ fraction_to_boundary·(current slack) for each atom.

    Args:
        objective: Returns value, gradient and Hessian at a point.
        start: Feasible starting point.
        sizes: Positive-intensity atoms, shape (n, d).
        tol: Gradient-norm tolerance.
        max_iterations: Iteration cap.
        fraction_to_boundary: Fraction of each slack that must survive a step.
        armijo: Sufficient-decrease constant.

    Returns:
        The run's result; the caller decides what a stall or cap means.
    """
    point = np.array(start, dtype=float)
    evaluation = objective(point)
    if not evaluation.finite or evaluation.gradient is None:
        raise ValueError("Newton start point must be feasible")
    result = NewtonResult(point=point, evaluation=evaluation, trace=[evaluation.value])

    while result.iterations < max_iterations:
        gradient = result.evaluation.gradient
        hessian = result.evaluation.hessian
        assert gradient is not None and hessian is not None
        if np.linalg.norm(gradient) <= tol:
            result.converged = True
            break

        step, *_ = linalg.lstsq(hessian, -gradient, cond=1e-14)
        slope = float(gradient @ step)
        if not slope < 0:
            step, slope = -gradient, -float(gradient @ gradient)

        slack = 1.0 + sizes @ result.point
        alpha = max_feasible_step(slack, sizes @ step, fraction_to_boundary)
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            trial = result.point + alpha * step
            trial_eval = objective(trial)
            if (
                trial_eval.finite
                and trial_eval.gradient is not None
                and trial_eval.value <= result.evaluation.value + armijo * alpha * slope
            ):
                accepted = True
                break
            alpha *= 0.5

        if not accepted:
            result.stalled = True
            logger.debug(
                "line search stalled at iteration %d (|g| = %.3g)",
                result.iterations,
                float(np.linalg.norm(gradient)),
            )
            break

        result.point = trial
        result.evaluation = trial_eval
        result.iterations += 1
        result.trace.append(trial_eval.value)

    if not result.converged and result.grad_norm <= tol:
        result.converged = True
    return result
