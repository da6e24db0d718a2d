"""Recession analysis of L: unbounded descent and attainment of the minimum.

The recession function of L along a direction y is

    L0⁺(y) = +∞                                   if yᵀcy > 0 or F(Γ⁻(y)) > 0,
    L0⁺(y) = −yᵀb + Σ_{yᵀx_i>0} w_i yᵀh(x_i)      otherwise,

where Γ±(y) = {x : ±yᵀx > 0}. The minimum of L is attained when every
recession direction (L0⁺ ≤ 0) is a constancy direction (L0⁺(±y) = 0).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import linprog
from scipy.stats import norm, qmc

from growth_engine._defaults import resolve_recession_config
from growth_engine.config import RecessionConfig
from growth_engine.exceptions import DimensionError
from growth_engine.model import (
    Characteristics,
    MarketModel,
    characteristics_of,
    truncate,
)
from growth_engine.objective import eval_L
from growth_engine.types import FloatArray, VectorLike

logger = logging.getLogger(__name__)

MAX_DIMENSION = 4
RAY_SCALES: tuple[float, ...] = (1e2, 1e3, 1e4)
ORTHOGONALITY_TOL = 1e-12
MAX_SUBSETS = 256


@dataclass(frozen=True)
class DirectionDiagnostic:
    """
    Breakdown of L0⁺ along one candidate direction.

    Attributes:
        source: Where the candidate came from (sobol, projection, null-space,
            subset, basis, lp-descent, lp-cone).
        direction: Unit direction y.
        curvature: yᵀcy.
        mass_minus: F(Γ⁻(y)).
        mass_plus: F(Γ⁺(y)).
        linear_part: −yᵀb + Σ_{yᵀx_i>0} w_i yᵀh(x_i).
        value: L0⁺(y).
        opposite_value: L0⁺(−y).
        kind: descent, constancy, recession (RC but not CD) or growth.
    """

    source: str
    direction: FloatArray
    curvature: float
    mass_minus: float
    mass_plus: float
    linear_part: float
    value: float
    opposite_value: float
    kind: str


@dataclass(frozen=True)
class RecessionReport:
    """
    Attainment certificate or witness of unbounded descent for one segment.

    Attributes:
        attained: True iff no candidate descends and every recession
            candidate is a constancy direction.
        witness_direction: A direction with L0⁺ < 0, or in RC but not CD.
        witness_value: L0⁺ along the witness.
        rc_basis: Rows spanning {y : cy = 0, yᵀb = 0, yᵀx_i = 0 for all atoms}.
        diagnostics: Breakdown for every candidate with finite L0⁺.
        ray_values: (α, L(α·witness)) at the ray scales, when a witness exists.
        ray_verified: Whether L decreases along the witness ray.
        inconclusive: True when the witness has L0⁺ within tol of 0.
        n_candidates: Number of directions evaluated.
    """

    attained: bool
    witness_direction: FloatArray | None
    witness_value: float | None
    rc_basis: FloatArray
    diagnostics: list[DirectionDiagnostic] = field(default_factory=list)
    ray_values: list[tuple[float, float]] = field(default_factory=list)
    ray_verified: bool = False
    inconclusive: bool = False
    n_candidates: int = 0

    def lines(self) -> list[str]:
        """Human-readable summary."""
        out = [f"attained: {self.attained}", f"candidates: {self.n_candidates}"]
        if self.witness_direction is not None:
            out.append(
                "witness: ["
                + ", ".join(f"{v:.10g}" for v in self.witness_direction)
                + f"] L0+ = {self.witness_value:.10g}"
            )
            for alpha, value in self.ray_values:
                out.append(f"  L({alpha:g} * witness) = {value:.10g}")
            if self.inconclusive:
                out.append("  tie: recession direction outside the constancy space")
        out.append(f"rc_basis dimension: {len(self.rc_basis)}")
        for row in self.rc_basis:
            out.append("  [" + ", ".join(f"{v:.10g}" for v in row) + "]")
        return out


def _unit(y: VectorLike) -> FloatArray:
    direction = np.atleast_1d(np.asarray(y, dtype=float))
    length = float(np.linalg.norm(direction))
    if length == 0.0 or not math.isfinite(length):
        raise ValueError("direction must be a nonzero finite vector")
    return direction / length


def _curvature_tol(chars: Characteristics) -> float:
    return 1e-12 * chars.magnitude


def _breakdown(
    chars: Characteristics, y: FloatArray
) -> tuple[float, float, float, float]:
    sizes, weights = chars.support()
    projections = sizes @ y
    plus = projections > ORTHOGONALITY_TOL
    minus = projections < -ORTHOGONALITY_TOL
    curvature = float(y @ chars.covariance @ y)
    linear = float(-y @ chars.drift + weights[plus] @ (truncate(sizes[plus]) @ y))
    mass_minus = float(np.sum(weights[minus]))
    return curvature, mass_minus, float(np.sum(weights[plus])), linear


def recession_value(m: MarketModel | Characteristics, y: VectorLike) -> float:
    """
    Evaluate the recession function L0⁺ along the unit direction of ``y``.

    Args:
        m: Segment characteristics or model.
        y: Nonzero direction; it is normalized before evaluation.

    Returns:
        +∞ when yᵀcy > 0 or some atom lies in Γ⁻(y), else the linear slope.

    Raises:
        ValueError: For the zero vector.
    """
    chars = characteristics_of(m)
    direction = _unit(y)
    curvature, mass_minus, _, linear = _breakdown(chars, direction)
    if curvature > _curvature_tol(chars) or mass_minus > 0:
        return math.inf
    return linear


def constancy_basis(m: MarketModel | Characteristics) -> FloatArray:
    """Orthonormal rows spanning {y : cy = 0, yᵀb = 0, yᵀx_i = 0 for all atoms}."""
    chars = characteristics_of(m)
    sizes, _ = chars.support()
    size = chars.magnitude or 1.0
    stacked = np.vstack([chars.covariance / size, sizes, chars.drift[None, :] / size])
    return linalg.null_space(stacked, rcond=1e-10).T


def _sphere_samples(dim: int, n_dirs: int, seed: int) -> FloatArray:
    if n_dirs <= 0:
        return np.zeros((0, dim))
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    points = sampler.random_base2(m=max(1, math.ceil(math.log2(n_dirs))))[:n_dirs]
    gaussian = norm.ppf(np.clip(points, 1e-12, 1.0 - 1e-12))
    lengths = np.linalg.norm(gaussian, axis=1)
    keep = lengths > 1e-12
    return gaussian[keep] / lengths[keep, None]


def _cone_programs(chars: Characteristics) -> list[tuple[str, FloatArray]]:
    """Exact witnesses from two linear programs on K = {cy = 0, Xy ≥ 0}."""
    basis = linalg.null_space(chars.covariance)
    if basis.shape[1] == 0:
        return []
    sizes, weights = chars.support()
    size = chars.magnitude or 1.0
    gradient_at_zero = (-chars.drift + weights @ truncate(sizes)) / size
    cone = sizes @ basis
    objective = gradient_at_zero @ basis
    bounds = [(-1.0, 1.0)] * basis.shape[1]
    found: list[tuple[str, FloatArray]] = []

    descent = linprog(
        objective,
        A_ub=-cone if len(cone) else None,
        b_ub=np.zeros(len(cone)) if len(cone) else None,
        bounds=bounds,
        method="highs",
    )
    if descent.status == 0 and np.linalg.norm(descent.x) > 1e-12:
        found.append(("lp-descent", basis @ descent.x))

    if len(cone):
        rows = np.vstack([-cone, objective[None, :]])
        spread = linprog(
            -np.sum(cone, axis=0),
            A_ub=rows,
            b_ub=np.zeros(len(rows)),
            bounds=bounds,
            method="highs",
        )
        if spread.status == 0 and np.linalg.norm(spread.x) > 1e-12:
            found.append(("lp-cone", basis @ spread.x))
    return found


def _candidates(
    chars: Characteristics, n_dirs: int, seed: int
) -> list[tuple[str, FloatArray]]:
    dim = chars.dim
    sizes, _ = chars.support()
    size = chars.magnitude or 1.0
    candidates: list[tuple[str, FloatArray]] = []

    samples = _sphere_samples(dim, n_dirs, seed)
    candidates.extend(("sobol", y) for y in samples)

    covariance_null = linalg.null_space(chars.covariance)
    if 0 < covariance_null.shape[1] < dim:
        projector = covariance_null @ covariance_null.T
        candidates.extend(("projection", projector @ y) for y in samples)

    for k in range(dim):
        unit = np.zeros(dim)
        unit[k] = 1.0
        candidates.extend([("basis", unit), ("basis", -unit)])

    subsets = itertools.chain.from_iterable(
        itertools.combinations(range(len(sizes)), r) for r in range(0, dim)
    )
    for subset in itertools.islice(subsets, MAX_SUBSETS):
        stacked = np.vstack([chars.covariance / size, sizes[list(subset)]])
        for y in linalg.null_space(stacked, rcond=1e-10).T:
            candidates.extend([("subset", y), ("subset", -y)])

    for y in constancy_basis(chars):
        candidates.extend([("null-space", y), ("null-space", -y)])

    candidates.extend(_cone_programs(chars))
    return [
        (source, y / np.linalg.norm(y))
        for source, y in candidates
        if np.linalg.norm(y) > 1e-10
    ]


def _diagnose(
    chars: Characteristics, source: str, y: FloatArray, tol: float
) -> DirectionDiagnostic:
    curvature, mass_minus, mass_plus, linear = _breakdown(chars, y)
    value = recession_value(chars, y)
    opposite = recession_value(chars, -y)
    if value < -tol:
        kind = "descent"
    elif value <= tol:
        kind = "constancy" if opposite <= tol else "recession"
    else:
        kind = "growth"
    return DirectionDiagnostic(
        source=source,
        direction=y,
        curvature=curvature,
        mass_minus=mass_minus,
        mass_plus=mass_plus,
        linear_part=linear,
        value=value,
        opposite_value=opposite,
        kind=kind,
    )


def attainment_certificate(
    m: MarketModel | Characteristics,
    n_dirs: int | None = None,
    seed: int | None = None,
    tol: float | None = None,
) -> RecessionReport:
    """
    Certify attainment of min L or return a witness of non-attainment.

    Candidates are scrambled-Sobol unit directions, their projections onto
    the null space of c, the coordinate axes, null-space directions of c
    stacked with subsets of atoms, the constancy basis, and the optima of two
    linear programs on the cone {cy = 0, x_iᵀy ≥ 0}. Results are ordered by
    candidate index and depend only on ``seed``.

    Args:
        m: Segment characteristics or model (first piece).
        n_dirs: Number of Sobol directions (default from config).
        seed: Scrambling seed (default from config).
        tol: Recession tolerance relative to the size of the characteristics
            (default 1e-9).

    Returns:
        The recession report.

    Raises:
        DimensionError: For d > 4.
    """
    chars = characteristics_of(m)
    if chars.dim > MAX_DIMENSION:
        raise DimensionError(
            f"recession analysis supports d <= {MAX_DIMENSION}, got d = {chars.dim}"
        )
    overrides: RecessionConfig = {}
    if n_dirs is not None:
        overrides["n_dirs"] = n_dirs
    if seed is not None:
        overrides["seed"] = seed
    if tol is not None:
        overrides["tol"] = tol
    cfg = resolve_recession_config(overrides)
    threshold = cfg["tol"] * chars.magnitude

    candidates = _candidates(chars, cfg["n_dirs"], cfg["seed"])
    diagnostics = [
        _diagnose(chars, source, y, threshold) for source, y in candidates
    ]
    finite = [d for d in diagnostics if math.isfinite(d.value)]
    descents = [d for d in finite if d.kind == "descent"]
    recessions = [d for d in finite if d.kind == "recession"]

    witness: DirectionDiagnostic | None = None
    if descents:
        witness = min(descents, key=lambda d: d.value)
    elif recessions:
        witness = recessions[0]

    ray_values: list[tuple[float, float]] = []
    ray_verified = False
    if witness is not None:
        ray_values = [
            (alpha, eval_L(chars, alpha * witness.direction).value)
            for alpha in RAY_SCALES
        ]
        values = [value for _, value in ray_values]
        ray_verified = all(b < a for a, b in zip(values, values[1:]))
        logger.info(
            "non-attainment witness %s with L0+ = %.6g",
            np.array2string(witness.direction, precision=6),
            witness.value,
        )

    return RecessionReport(
        attained=witness is None,
        witness_direction=None if witness is None else witness.direction,
        witness_value=None if witness is None else witness.value,
        rc_basis=constancy_basis(chars),
        diagnostics=finite,
        ray_values=ray_values,
        ray_verified=ray_verified,
        inconclusive=witness is not None and witness.kind == "recession",
        n_candidates=len(candidates),
    )


def analyze_recession(
    m: MarketModel, cfg: RecessionConfig | None = None
) -> list[RecessionReport]:
    """Run ``attainment_certificate`` on every piece of a model, in order."""
    resolved = resolve_recession_config(cfg)
    return [
        attainment_certificate(
            piece.characteristics,
            n_dirs=resolved["n_dirs"],
            seed=resolved["seed"],
            tol=resolved["tol"],
        )
        for piece in m.pieces()
    ]
