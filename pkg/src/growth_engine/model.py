"""Market models given by predictable characteristics.

A model is the triple (b, c, F) of a drift vector, a diffusion covariance and
a finite-atom jump measure, on the clock A_t = t, optionally piecewise-constant
in time. This module owns the in-memory schema, the semantic validation and
the admissible-fraction domain {λ : 1 + λᵀx > 0 F-a.e.}.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field
from scipy import linalg

from growth_engine._defaults import PSD_TOLERANCE
from growth_engine.exceptions import DimensionError, TimeOutOfRangeError
from growth_engine.types import FloatArray, VectorLike

logger = logging.getLogger(__name__)

TRUNCATION_RADIUS = 1.0


def _as_vector(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (int, float)):
        return (float(value),)
    return value


def _as_matrix(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (int, float)):
        return ((float(value),),)
    return value


Vector = Annotated[tuple[float, ...], BeforeValidator(_as_vector)]
Matrix = Annotated[tuple[tuple[float, ...], ...], BeforeValidator(_as_matrix)]


def truncate(sizes: VectorLike) -> FloatArray:
    """
    Apply the truncation function h(x) = x·1{|x| ≤ 1} row-wise.

    The indicator uses the Euclidean norm of each jump, so a jump is either
    kept whole or dropped whole, component-agnostically.

    Args:
        sizes: A jump vector of shape (d,) or a stack of shape (n, d).

    Returns:
        Array of the same shape with the large jumps zeroed.
    """
    x = np.asarray(sizes, dtype=float)
    if x.ndim == 1:
        return x if np.linalg.norm(x) <= TRUNCATION_RADIUS else np.zeros_like(x)
    small = np.linalg.norm(x, axis=-1) <= TRUNCATION_RADIUS
    return np.where(small[..., None], x, 0.0)


class JumpAtom(BaseModel):
    """One atom x of the jump measure with intensity w (jumps per unit time)."""

    model_config = ConfigDict(frozen=True)

    x: Vector
    w: float


class JumpMeasure(BaseModel):
    """
    Finite-atom jump measure F(dx) = Σ w_i δ_{x_i}(dx).

    Example:
        >>> measure = JumpMeasure(atoms=[JumpAtom(x=0.5, w=1.0)])
        >>> measure.total_intensity
        1.0
    """

    model_config = ConfigDict(frozen=True)

    atoms: tuple[JumpAtom, ...] = ()

    @property
    def sizes(self) -> FloatArray:
        """All atom locations stacked as an (n, d) array."""
        if not self.atoms:
            return np.zeros((0, 0))
        return np.array([atom.x for atom in self.atoms], dtype=float)

    @property
    def intensities(self) -> FloatArray:
        """All atom intensities as an (n,) array."""
        return np.array([atom.w for atom in self.atoms], dtype=float)

    @property
    def total_intensity(self) -> float:
        """Total jump intensity Λ = Σ w_i."""
        return float(sum(atom.w for atom in self.atoms))

    def support(self, dim: int) -> tuple[FloatArray, FloatArray]:
        """
        Return the atoms carrying positive intensity.

        Atoms with w = 0 are F-null and take no part in any integral or
        domain constraint.

        Args:
            dim: Asset count, used to shape the empty case.

        Returns:
            Tuple of sizes (m, dim) and intensities (m,).
        """
        kept = [atom for atom in self.atoms if atom.w > 0]
        if not kept:
            return np.zeros((0, dim)), np.zeros(0)
        sizes = np.array([atom.x for atom in kept], dtype=float)
        return sizes, np.array([atom.w for atom in kept], dtype=float)


class Characteristics(BaseModel):
    """
    Constant characteristics (b, c, F) of one time segment.

    Attributes:
        b: Truncated drift per unit time.
        c: Diffusion covariance per unit time.
        jumps: Jump measure.
    """

    model_config = ConfigDict(frozen=True)

    b: Vector
    c: Matrix
    jumps: JumpMeasure = Field(default_factory=JumpMeasure)

    @property
    def dim(self) -> int:
        return len(self.b)

    @property
    def drift(self) -> FloatArray:
        return np.array(self.b, dtype=float)

    @property
    def covariance(self) -> FloatArray:
        return np.array(self.c, dtype=float).reshape(self.dim, self.dim)

    def support(self) -> tuple[FloatArray, FloatArray]:
        """Positive-intensity atoms and their intensities."""
        return self.jumps.support(self.dim)

    @property
    def magnitude(self) -> float:
        """
        Size |b| + ‖c‖ + Λ of the characteristics, with Λ the total intensity.

        L, its gradient and the recession function are all linear in this
        size, so tolerances on them are taken relative to it.
        """
        return float(
            np.linalg.norm(self.drift)
            + np.linalg.norm(self.covariance)
            + self.jumps.total_intensity
        )

    def scaled(self, kappa: float) -> Characteristics:
        """Return characteristics with (b, c, w) all multiplied by ``kappa``."""
        return Characteristics(
            b=tuple(kappa * v for v in self.b),
            c=tuple(tuple(kappa * v for v in row) for row in self.c),
            jumps=JumpMeasure(
                atoms=tuple(
                    JumpAtom(x=atom.x, w=kappa * atom.w) for atom in self.jumps.atoms
                )
            ),
        )


class SegmentSpec(BaseModel):
    """Characteristics that take over from time ``t`` on."""

    model_config = ConfigDict(frozen=True)

    t: float
    characteristics: Characteristics


class MarketModel(BaseModel):
    """
    Market model X on [0, T] given by piecewise-constant characteristics.

    The top-level characteristics are active on [0, t_1); each entry of
    ``segments`` replaces them from its break time on (right-continuous).

    Example:
        >>> merton = MarketModel(
        ...     dim=1,
        ...     horizon=1.0,
        ...     characteristics=Characteristics(b=0.08, c=0.04),
        ... )
    """

    model_config = ConfigDict(frozen=True)

    dim: int
    horizon: float
    characteristics: Characteristics
    segments: tuple[SegmentSpec, ...] = ()

    def pieces(self) -> list[ModelSegment]:
        """
        Split [0, T] into the constant-characteristics pieces.

        Returns:
            Segments ordered by start time; a constant model yields one piece.
        """
        starts = [0.0] + [spec.t for spec in self.segments]
        chars = [self.characteristics, *(s.characteristics for s in self.segments)]
        ends = starts[1:] + [self.horizon]
        return [
            ModelSegment(index=i, start=s, end=e, characteristics=ch)
            for i, (s, e, ch) in enumerate(zip(starts, ends, chars))
        ]

    def scaled(self, kappa: float) -> MarketModel:
        """Return the model with (b, c, w) multiplied by ``kappa`` on every piece."""
        return MarketModel(
            dim=self.dim,
            horizon=self.horizon,
            characteristics=self.characteristics.scaled(kappa),
            segments=tuple(
                SegmentSpec(t=s.t, characteristics=s.characteristics.scaled(kappa))
                for s in self.segments
            ),
        )


@dataclass(frozen=True)
class ModelSegment:
    """A time interval [start, end) with constant characteristics."""

    index: int
    start: float
    end: float
    characteristics: Characteristics

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Check:
    """One pass/fail entry of a validation report."""

    name: str
    passed: bool
    message: str = ""


@dataclass(frozen=True)
class ValidationReport:
    """
    Result of ``validate_model``.

    Attributes:
        checks: Every check performed, in order.
        sigma_special: Whether Σ w_i|x_i|1{|x_i|>1} is finite on every piece.
    """

    checks: list[Check] = field(default_factory=list)
    sigma_special: bool = True

    @property
    def usable(self) -> bool:
        """True iff every check passed."""
        return all(check.passed for check in self.checks)

    @property
    def failed(self) -> list[Check]:
        return [check for check in self.checks if not check.passed]

    def lines(self) -> list[str]:
        """Human-readable lines, one per check."""
        return [
            f"[{'PASS' if check.passed else 'FAIL'}] {check.name}"
            + (f": {check.message}" if check.message else "")
            for check in self.checks
        ]


def _check_characteristics(
    label: str, dim: int, chars: Characteristics
) -> tuple[list[Check], bool]:
    checks: list[Check] = []

    shapes_ok = len(chars.b) == dim and len(chars.c) == dim and all(
        len(row) == dim for row in chars.c
    )
    bad_atoms = [i for i, atom in enumerate(chars.jumps.atoms) if len(atom.x) != dim]
    if not shapes_ok or bad_atoms:
        checks.append(
            Check(
                f"{label}.dimension",
                False,
                f"b, c and atoms must have dimension {dim}",
            )
        )
        return checks, False
    checks.append(Check(f"{label}.dimension", True))

    c = chars.covariance
    finite = bool(np.all(np.isfinite(c)) and np.all(np.isfinite(chars.drift)))
    checks.append(
        Check(f"{label}.finite", finite, "" if finite else "non-finite b or c entries")
    )
    if not finite:
        return checks, False

    asymmetry = float(np.max(np.abs(c - c.T))) if dim else 0.0
    scale = max(float(np.max(np.abs(c))) if dim else 0.0, 1.0)
    symmetric = asymmetry <= 1e-12 * scale
    eigenvalues = linalg.eigvalsh(0.5 * (c + c.T)) if dim else np.zeros(0)
    largest = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    smallest = float(np.min(eigenvalues)) if eigenvalues.size else 0.0
    psd = symmetric and smallest >= -PSD_TOLERANCE * largest
    if not symmetric:
        message = f"c is not symmetric (max asymmetry {asymmetry:.3g})"
    elif not psd:
        message = f"c not positive semidefinite (eigenvalue {smallest:.6g})"
    else:
        message = ""
    checks.append(Check(f"{label}.psd", psd, message))

    sizes = chars.jumps.sizes
    weights = chars.jumps.intensities
    intensities_ok = bool(np.all(np.isfinite(weights)) and np.all(weights >= 0))
    checks.append(
        Check(
            f"{label}.intensities",
            intensities_ok,
            "" if intensities_ok else "intensities must be finite and >= 0",
        )
    )

    zero_atoms = [
        i for i in range(len(sizes)) if float(np.linalg.norm(sizes[i])) == 0.0
    ]
    checks.append(
        Check(
            f"{label}.no_zero_atom",
            not zero_atoms,
            f"F({{0}})=0 violated (atoms {zero_atoms})" if zero_atoms else "",
        )
    )

    duplicates = [
        (i, j)
        for i in range(len(sizes))
        for j in range(i + 1, len(sizes))
        if np.array_equal(sizes[i], sizes[j])
    ]
    checks.append(
        Check(
            f"{label}.distinct_atoms",
            not duplicates,
            f"duplicate atoms {duplicates}" if duplicates else "",
        )
    )

    if len(sizes):
        norms = np.linalg.norm(sizes, axis=1)
        large_mass = float(np.sum(weights * norms * (norms > TRUNCATION_RADIUS)))
    else:
        large_mass = 0.0
    sigma_special = math.isfinite(large_mass)
    checks.append(
        Check(
            f"{label}.sigma_special",
            sigma_special,
            f"sum w|x|1{{|x|>1}} = {large_mass:.6g}",
        )
    )
    return checks, sigma_special


def validate_model(m: MarketModel) -> ValidationReport:
    """
    Check a model for usability without raising.

    Performs the positive-semidefiniteness check on every c, the σ-special
    check, atom sanity (nonzero, distinct, nonnegative finite intensities),
    horizon positivity and segment ordering.

    Args:
        m: The model to validate.

    Returns:
        A report whose ``usable`` flag is true iff every check passed.
    """
    checks: list[Check] = []
    horizon_ok = math.isfinite(m.horizon) and m.horizon > 0
    checks.append(
        Check(
            "horizon",
            horizon_ok,
            "" if horizon_ok else f"horizon must be finite and > 0, got {m.horizon}",
        )
    )

    breaks = [spec.t for spec in m.segments]
    ordered = all(0 < t < m.horizon for t in breaks) and all(
        a < b for a, b in zip(breaks, breaks[1:])
    )
    checks.append(
        Check(
            "segments",
            ordered,
            "" if ordered else f"breaks must increase strictly inside (0, T): {breaks}",
        )
    )

    sigma_special = True
    for piece in m.pieces():
        piece_checks, piece_special = _check_characteristics(
            f"segment[{piece.index}]", m.dim, piece.characteristics
        )
        checks.extend(piece_checks)
        sigma_special = sigma_special and piece_special

    report = ValidationReport(checks=checks, sigma_special=sigma_special)
    if not report.usable:
        logger.info("model failed %d check(s)", len(report.failed))
    return report


@dataclass(frozen=True)
class HalfSpace:
    """The strict half-space {λ : 1 + λᵀx > 0} of one atom."""

    atom_index: int
    normal: FloatArray
    segment: int = 0

    def __str__(self) -> str:
        coefficients = ", ".join(f"{v:.10g}" for v in self.normal)
        return f"1 + lambda . [{coefficients}] > 0"


@dataclass(frozen=True)
class DomainDescription:
    """
    The admissible-fraction domain as a list of strict half-spaces.

    An empty constraint list means the whole of R^d.
    """

    dim: int
    constraints: list[HalfSpace]

    @property
    def unconstrained(self) -> bool:
        return not self.constraints

    @property
    def normals(self) -> FloatArray:
        if not self.constraints:
            return np.zeros((0, self.dim))
        return np.array([h.normal for h in self.constraints])

    def slack(self, lam: VectorLike) -> FloatArray:
        """Return 1 + λᵀx_i for every constraint."""
        return 1.0 + self.normals @ np.asarray(lam, dtype=float).reshape(self.dim)

    def contains(self, lam: VectorLike) -> bool:
        """True iff λ satisfies every strict constraint."""
        return bool(np.all(self.slack(lam) > 0))

    def interval(self) -> tuple[float, float]:
        """For d = 1, the open interval (low, high) the domain reduces to."""
        if self.dim != 1:
            raise DimensionError("interval() requires d = 1")
        low, high = -math.inf, math.inf
        for h in self.constraints:
            x = float(h.normal[0])
            if x > 0:
                low = max(low, -1.0 / x)
            else:
                high = min(high, -1.0 / x)
        return low, high

    def lines(self) -> list[str]:
        if self.unconstrained:
            return ["unconstrained (R^d)"]
        if self.dim == 1:
            low, high = self.interval()
            return [f"{low:.10g} < lambda < {high:.10g}"]
        return [str(h) for h in self.constraints]


def admissible_domain(m: MarketModel | Characteristics) -> DomainDescription:
    """
    Describe {λ : 1 + λᵀx_i > 0 for every atom with w_i > 0}.

    Args:
        m: A validated model, whose domain is the intersection over all of
            its pieces, or one segment's characteristics.

    Returns:
        One strict half-space per positive-intensity atom.
    """
    if isinstance(m, MarketModel):
        pieces = [(p.index, p.characteristics) for p in m.pieces()]
    else:
        pieces = [(0, m)]
    constraints = [
        HalfSpace(atom_index=i, normal=np.array(atom.x, dtype=float), segment=k)
        for k, chars in pieces
        for i, atom in enumerate(chars.jumps.atoms)
        if atom.w > 0
    ]
    return DomainDescription(dim=m.dim, constraints=constraints)


def segment_at(m: MarketModel, t: float) -> Characteristics:
    """
    Return the characteristics active at time ``t``.

    Break points belong to the segment they start (right-continuous).

    Raises:
        TimeOutOfRangeError: If t lies outside [0, T].
    """
    if not 0.0 <= t <= m.horizon:
        raise TimeOutOfRangeError(t, m.horizon)
    active = m.characteristics
    for spec in m.segments:
        if t >= spec.t:
            active = spec.characteristics
    return active


def characteristics_of(m: MarketModel | Characteristics) -> Characteristics:
    """Return ``m`` itself or, for a model, its first piece's characteristics."""
    return m.characteristics if isinstance(m, MarketModel) else m
