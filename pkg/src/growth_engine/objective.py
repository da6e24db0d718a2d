"""The log-growth objective L and its δ-smoothed family L_δ.

For one segment with characteristics (b, c, F),

    L(λ) = −λᵀb + ½λᵀcλ + Σ_i w_i (λᵀh(x_i) − ln(1 + λᵀx_i)),

with L(λ) = +∞ as soon as some 1 + λᵀx_i ≤ 0, and

    L_δ(λ) = −λᵀb + ½λᵀcλ + Σ_i w_i f_δ(λ, x_i),
    f_δ(λ, x) = δλᵀh(x) − ln(1 − δ + δ(1 + λᵀx)⁺),

which is finite everywhere for δ ∈ (0, 1). All F-integrals are exact sums.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from growth_engine.model import (
    Characteristics,
    MarketModel,
    characteristics_of,
    truncate,
)
from growth_engine.types import FloatArray, VectorLike

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectiveEval:
    """
    Value, gradient and Hessian of L (or L_δ) at one point.

    Attributes:
        value: Objective value, possibly +∞.
        gradient: Gradient, absent when the value is +∞ or at a kink.
        hessian: Hessian, absent when the gradient is.
    """

    value: float
    gradient: FloatArray | None = None
    hessian: FloatArray | None = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)

    @classmethod
    def infinite(cls) -> ObjectiveEval:
        return cls(value=math.inf)


def as_point(chars: Characteristics, lam: VectorLike) -> FloatArray:
    """Coerce ``lam`` to a float vector of the segment's dimension."""
    point = np.atleast_1d(np.asarray(lam, dtype=float))
    if point.shape != (chars.dim,):
        raise ValueError(f"lambda must have shape ({chars.dim},), got {point.shape}")
    return point


def segment_fractions(
    m: MarketModel, phi: VectorLike | Sequence[VectorLike]
) -> list[FloatArray]:
    """
    Broadcast ``phi`` to one fraction per segment.

    A single vector applies to every segment; otherwise one vector per
    segment is expected.

    Raises:
        ValueError: On a count or shape mismatch.
    """
    pieces = m.pieces()
    array = np.asarray(phi, dtype=float)
    if array.ndim <= 1:
        point = np.atleast_1d(array)
        return [as_point(p.characteristics, point) for p in pieces]
    if len(array) != len(pieces):
        raise ValueError(f"expected {len(pieces)} fractions, got {len(array)}")
    return [as_point(p.characteristics, row) for p, row in zip(pieces, array)]


def slack(chars: Characteristics, lam: VectorLike) -> FloatArray:
    """Return 1 + λᵀx_i for every positive-intensity atom."""
    sizes, _ = chars.support()
    return 1.0 + sizes @ as_point(chars, lam)


def eval_L(m: MarketModel | Characteristics, lam: VectorLike) -> ObjectiveEval:
    """
    Evaluate L with its gradient and Hessian.

    Off the domain the value is +∞ and no derivatives are returned.

    Args:
        m: One segment's characteristics (or a model; its first piece).
        lam: Point λ ∈ R^d.

    Returns:
        The evaluation.
    """
    chars = characteristics_of(m)
    point = as_point(chars, lam)
    b, c = chars.drift, chars.covariance
    sizes, weights = chars.support()

    s = 1.0 + sizes @ point
    if np.any(s <= 0):
        return ObjectiveEval.infinite()

    h = truncate(sizes)
    value = float(
        -point @ b + 0.5 * point @ c @ point + weights @ (h @ point - np.log(s))
    )
    gradient = -b + c @ point + weights @ (h - sizes / s[:, None])
    hessian = c + (sizes.T * (weights / s**2)) @ sizes
    return ObjectiveEval(
        value=value, gradient=gradient, hessian=0.5 * (hessian + hessian.T)
    )


def f_delta(lam: VectorLike, sizes: VectorLike, delta: float) -> FloatArray:
    """
    Evaluate the smoothed integrand f_δ(λ, x) for a stack of atoms.

    Args:
        lam: Point λ ∈ R^d.
        sizes: Atoms of shape (n, d).
        delta: Smoothing parameter in (0, 1).

    Returns:
        Array of shape (n,).
    """
    point = np.asarray(lam, dtype=float)
    x = np.atleast_2d(np.asarray(sizes, dtype=float))
    s = 1.0 + x @ point
    smoothed = 1.0 - delta + delta * np.maximum(s, 0.0)
    return delta * (truncate(x) @ point) - np.log(smoothed)


def eval_L_delta(
    m: MarketModel | Characteristics, lam: VectorLike, delta: float
) -> ObjectiveEval:
    """
    Evaluate the smoothed objective L_δ.

    The value is finite for every λ. Derivatives are supplied unless some
    atom sits exactly on the kink 1 + λᵀx_i = 0.

    Raises:
        ValueError: If δ is outside (0, 1).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    chars = characteristics_of(m)
    point = as_point(chars, lam)
    b, c = chars.drift, chars.covariance
    sizes, weights = chars.support()

    quadratic = float(-point @ b + 0.5 * point @ c @ point)
    if not len(weights):
        return ObjectiveEval(value=quadratic, gradient=c @ point - b, hessian=c)

    s = 1.0 + sizes @ point
    value = quadratic + float(weights @ f_delta(point, sizes, delta))
    if np.any(s == 0):
        return ObjectiveEval(value=value)

    h = truncate(sizes)
    inside = s > 0
    denominator = 1.0 - delta + delta * np.where(inside, s, 0.0)
    atom_gradient = delta * h - np.where(
        inside[:, None], delta * sizes / denominator[:, None], 0.0
    )
    gradient = -b + c @ point + weights @ atom_gradient
    curvature = np.where(inside, weights * delta**2 / denominator**2, 0.0)
    hessian = c + (sizes.T * curvature) @ sizes
    return ObjectiveEval(
        value=value, gradient=gradient, hessian=0.5 * (hessian + hessian.T)
    )


def sample_scale(chars: Characteristics) -> float:
    """A radius on which sampled points reach both the domain and its boundary."""
    sizes, _ = chars.support()
    if len(sizes):
        return 1.5 / float(np.max(np.linalg.norm(sizes, axis=1)))
    return 3.0


@dataclass(frozen=True)
class ConvexityReport:
    """Outcome of the sampled midpoint-convexity check."""

    passed: bool
    n_samples: int
    n_finite_pairs: int
    n_straddling_pairs: int
    max_violation: float


def check_convexity_sample(
    m: MarketModel | Characteristics,
    seed: int,
    n_samples: int,
    tol: float = 1e-9,
) -> ConvexityReport:
    """
    Check L(mid) ≤ ½L(λ₁) + ½L(λ₂) on random pairs.

    Pairs are drawn around the origin on a radius that makes some of them
    straddle the domain boundary. A pair with an infinite endpoint passes
    under extended-real arithmetic and is counted as straddling when exactly
    one endpoint is infinite; a NaN midpoint fails the check.

    Args:
        m: Segment characteristics or model.
        seed: RNG seed.
        n_samples: Number of pairs.
        tol: Relative slack.

    Returns:
        Report with ``passed`` and the largest violation seen.
    """
    chars = characteristics_of(m)
    rng = np.random.default_rng(seed)
    scale = sample_scale(chars)
    worst = 0.0
    finite_pairs = 0
    straddling_pairs = 0
    for _ in range(n_samples):
        first = rng.normal(scale=scale, size=chars.dim)
        second = rng.normal(scale=scale, size=chars.dim)
        left = eval_L(chars, first).value
        right = eval_L(chars, second).value
        middle = eval_L(chars, 0.5 * (first + second)).value
        if math.isnan(middle):
            worst = math.inf
            continue
        if math.isfinite(left) != math.isfinite(right):
            straddling_pairs += 1
        if not (math.isfinite(left) and math.isfinite(right)):
            continue
        finite_pairs += 1
        bound = 0.5 * left + 0.5 * right
        violation = middle - bound - tol * (1.0 + abs(left) + abs(right))
        worst = max(worst, violation)
    passed = worst <= 0.0
    if not passed:
        logger.warning("convexity violated by %.3g", worst)
    return ConvexityReport(
        passed=passed,
        n_samples=n_samples,
        n_finite_pairs=finite_pairs,
        n_straddling_pairs=straddling_pairs,
        max_violation=worst,
    )
