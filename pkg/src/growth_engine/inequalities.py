"""Scalar inequalities behind the integrability and smoothing arguments.

Each inequality comes as a pair of vectorized sides plus a grid checker that
counts violations beyond a small absolute slack:

* the entropy bound (1+y)ln(1+y) − y ≥ ((1−δ)/2)·y²/(1+y)·1{|y|≤δ}
  + δ/(2(1+δ))·|y|·1{|y|>δ} used to integrate the optimal deflator;
* the jump bound y − ln(1+y) ≥ a_δ|y|·1{|y|>δ} + q_δ·y²·1{|y|≤δ} used to pass
  from E[⟨Kᶜ⟩ + Σ(ΔK − ln(1+ΔK))] < ∞ to E[√[K,K]] < ∞;
* the two-sided bounds on f_δ(λ, x) for small and large atoms;
* the path decomposition √[K,K] ≤ √⟨Kᶜ⟩ + Σ|ΔK|1{|ΔK|>δ} + √(Σ ΔK²1{|ΔK|≤δ}).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from growth_engine.objective import f_delta
from growth_engine.types import FloatArray, VectorLike

DEFAULT_DELTAS: tuple[float, ...] = tuple(round(0.1 * k, 1) for k in range(1, 10))
DEFAULT_SLACK = 1e-12


def default_y_grid(n: int = 1000) -> FloatArray:
    """n points on (−1, 10]."""
    return np.linspace(-1.0, 10.0, n + 1)[1:]


def default_lambda_grid(n: int = 1000) -> FloatArray:
    """n points on [−10, 10]."""
    return np.linspace(-10.0, 10.0, n)


@dataclass(frozen=True)
class InequalityReport:
    """
    Result of checking one inequality on a grid.

    Attributes:
        name: Which inequality.
        n_checked: Number of (δ, point) pairs evaluated.
        violations: Number of pairs with lower − upper > slack.
        worst: Largest lower − upper seen (negative when all hold strictly).
    """

    name: str
    n_checked: int
    violations: int
    worst: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def entropy_gap(y: VectorLike) -> FloatArray:
    """(1+y)ln(1+y) − y, continuous at y = −1."""
    z = 1.0 + np.asarray(y, dtype=float)
    return xlogy(z, z) - (z - 1.0)


def entropy_lower_bound(y: VectorLike, delta: float) -> FloatArray:
    """Right side of the entropy bound."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) <= delta
    quadratic = 0.5 * (1.0 - delta) * y**2 / (1.0 + y)
    linear = delta / (2.0 * (1.0 + delta)) * np.abs(y)
    return np.where(small, quadratic, linear)


def log_gap(y: VectorLike) -> FloatArray:
    """y − ln(1+y) for y > −1."""
    y = np.asarray(y, dtype=float)
    return y - np.log1p(y)


def jump_lower_bound(y: VectorLike, delta: float, unhalved: bool = False) -> FloatArray:
    """
    Right side of the jump bound.

    With ``unhalved`` the coefficients δ/max(2(1−δ), 1+δ²) and 1/(1+δ) are used;
    that form fails near y = 0 (y − ln(1+y) ~ y²/2 < y²/(1+δ)) and is kept
    for diagnostics only. The default uses δ/(2(1+δ)) and 1/(2(1+δ)), which
    hold for every y > −1 and δ ∈ (0, 1).
    """
    y = np.asarray(y, dtype=float)
    small = np.abs(y) <= delta
    if unhalved:
        linear = delta / max(2.0 * (1.0 - delta), 1.0 + delta**2)
        quadratic = 1.0 / (1.0 + delta)
    else:
        linear = delta / (2.0 * (1.0 + delta))
        quadratic = 1.0 / (2.0 * (1.0 + delta))
    return np.where(small, quadratic * y**2, linear * np.abs(y))


def jump_bound_constant(delta: float) -> float:
    """C_δ with E[⟨Kᶜ⟩ + Σ|ΔK|1{>δ} + ΣΔK²1{≤δ}] ≤ C_δ·E[⟨Kᶜ⟩ + Σ(ΔK − ln(1+ΔK))]."""
    return 2.0 * (1.0 + delta) / delta


def smoothing_bounds(
    lam: VectorLike, x: VectorLike, delta: float
) -> tuple[FloatArray, FloatArray]:
    """
    Lower and upper bounds on f_δ(λ, x) for scalar λ and x grids.

    For |x| ≤ 1 the bounds are −δλ²x² and max(1/(2(1−δ)²), −δ − ln(1−δ))·λ²x²;
    for |x| > 1 they are −δ|λ||x| and −ln(1−δ).

    Returns:
        Arrays broadcast over ``lam`` and ``x``.
    """
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    squared = lam**2 * x**2
    small = np.abs(x) <= 1.0
    upper_coefficient = max(0.5 / (1.0 - delta) ** 2, -delta - np.log1p(-delta))
    lower = np.where(small, -delta * squared, -delta * np.abs(lam) * np.abs(x))
    upper = np.where(small, upper_coefficient * squared, -np.log1p(-delta))
    return lower, upper


def _report(name: str, gaps: list[FloatArray], slack: float) -> InequalityReport:
    stacked = np.concatenate([np.ravel(g) for g in gaps])
    return InequalityReport(
        name=name,
        n_checked=int(stacked.size),
        violations=int(np.count_nonzero(stacked > slack)),
        worst=float(np.max(stacked)),
    )


def check_entropy_inequality(
    deltas: tuple[float, ...] = DEFAULT_DELTAS,
    ys: FloatArray | None = None,
    slack: float = DEFAULT_SLACK,
) -> InequalityReport:
    """Check the entropy bound on a δ × y grid."""
    grid = default_y_grid() if ys is None else ys
    gaps = [entropy_lower_bound(grid, d) - entropy_gap(grid) for d in deltas]
    return _report("entropy", gaps, slack)


def check_jump_inequality(
    deltas: tuple[float, ...] = DEFAULT_DELTAS,
    ys: FloatArray | None = None,
    slack: float = DEFAULT_SLACK,
    unhalved: bool = False,
) -> InequalityReport:
    """Check the jump bound on a δ × y grid."""
    grid = default_y_grid() if ys is None else ys
    gaps = [jump_lower_bound(grid, d, unhalved) - log_gap(grid) for d in deltas]
    return _report("jump-unhalved" if unhalved else "jump", gaps, slack)


def check_smoothing_bounds(
    deltas: tuple[float, ...] = DEFAULT_DELTAS,
    lams: FloatArray | None = None,
    xs: FloatArray | None = None,
    slack: float = DEFAULT_SLACK,
) -> InequalityReport:
    """Check both sides of the f_δ bounds on a δ × λ × x grid (d = 1)."""
    lam_grid = default_lambda_grid() if lams is None else lams
    x_grid = np.linspace(-2.0, 2.0, 41) if xs is None else xs
    gaps: list[FloatArray] = []
    for d in deltas:
        values = np.array([f_delta([lam], x_grid[:, None], d) for lam in lam_grid])
        lower, upper = smoothing_bounds(lam_grid[:, None], x_grid[None, :], d)
        scale = 1.0 + np.abs(values)
        gaps.append((lower - values) / scale)
        gaps.append((values - upper) / scale)
    return _report("smoothing", gaps, slack)


def bracket_decomposition(
    continuous_variation: float, jumps: VectorLike, delta: float = 0.5
) -> tuple[float, float]:
    """
    Both sides of √[K,K] ≤ √⟨Kᶜ⟩ + Σ|ΔK|1{|ΔK|>δ} + √(ΣΔK²1{|ΔK|≤δ}).

    Args:
        continuous_variation: ⟨Kᶜ⟩_T.
        jumps: The jumps ΔK of one path.
        delta: Split level.

    Returns:
        (left, right).
    """
    k = np.asarray(jumps, dtype=float)
    large = np.abs(k) > delta
    left = float(np.sqrt(continuous_variation + np.sum(k**2)))
    right = float(
        np.sqrt(continuous_variation)
        + np.sum(np.abs(k[large]))
        + np.sqrt(np.sum(k[~large] ** 2))
    )
    return left, right


def relative_jump_decomposition(
    u: VectorLike, delta: float = 0.5
) -> tuple[float, float]:
    """
    Both sides of √Σ(u/(1+u))² ≤ √Σ(u/(1+u))²1{|u|≤δ} + Σ|u|/(1+u)·1{|u|>δ}.

    Args:
        u: Values φᵀΔX of one path's jumps, each > −1.
        delta: Split level.
    """
    u = np.asarray(u, dtype=float)
    ratio = u / (1.0 + u)
    large = np.abs(u) > delta
    left = float(np.sqrt(np.sum(ratio**2)))
    right = float(np.sqrt(np.sum(ratio[~large] ** 2)) + np.sum(np.abs(ratio[large])))
    return left, right
