"""Pointwise minimization of L and the optimality conditions around φ̃.

On every segment the optimal fraction φ̃ minimizes L. This module finds it,
certifies it (gradient norm in the interior, directional derivatives near
the domain boundary), and evaluates the quantities built from it: the drift
rate of Ṽ, the integrability expectation, and the growth rate of Z̃·E(φ·X).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from growth_engine import _rng
from growth_engine._defaults import resolve_solver_config
from growth_engine._newton import NewtonResult, damped_newton
from growth_engine.config import SolverConfig
from growth_engine.exceptions import (
    ConvergenceError,
    DomainViolationError,
    NonAttainmentError,
)
from growth_engine.geometry import attainment_certificate
from growth_engine.model import (
    Characteristics,
    MarketModel,
    ModelSegment,
    truncate,
)
from growth_engine.objective import (
    ObjectiveEval,
    as_point,
    eval_L,
    eval_L_delta,
    segment_fractions,
)
from growth_engine.types import CertificateMode, FloatArray, VectorLike

logger = logging.getLogger(__name__)

BOUNDARY_SHRINK = 0.9


@dataclass
class SegmentSolution:
    """
    Optimal fraction and certificate on one segment.

    Attributes:
        segment: The time piece solved.
        phi: Optimal fraction φ̃.
        value: L(φ̃), always ≤ 0.
        grad_norm: |∇L(φ̃)|.
        kkt_residual: Largest first-order violation over the test points.
        v_drift: dṼ/dt.
        v_drift_split: The same rate computed with small and large jumps split.
        condi11_rate: Per-unit-time integrand of the integrability expectation.
        positive1: The two nonnegative expressions at φ̃.
        iterations: Newton steps over all stages.
        delta_ladder: Smoothing stages that were run (empty if none).
        mode: How optimality was certified.
        certified: Whether the certificate holds.
        trace: Objective values of the final stage.
    """

    segment: ModelSegment
    phi: FloatArray
    value: float
    grad_norm: float
    kkt_residual: float
    v_drift: float
    v_drift_split: float
    condi11_rate: float
    positive1: tuple[float, float]
    iterations: int
    delta_ladder: list[float] = field(default_factory=list)
    mode: CertificateMode = CertificateMode.GRADIENT
    certified: bool = True
    trace: list[float] = field(default_factory=list)
    rc_basis: FloatArray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def min_slack(self) -> float:
        sizes, _ = self.segment.characteristics.support()
        if not len(sizes):
            return math.inf
        return float(np.min(1.0 + sizes @ self.phi))


@dataclass
class SolveReport:
    """
    Optimal fractions for every segment of a model.

    Example:
        >>> report = solve(merton)
        >>> report.phi[0]
        array([2.])
        >>> report.optimal_growth
        0.08
    """

    segments: list[SegmentSolution]

    @property
    def phi(self) -> list[FloatArray]:
        return [s.phi for s in self.segments]

    @property
    def horizon(self) -> float:
        return sum(s.segment.duration for s in self.segments)

    @property
    def value(self) -> float:
        """Time-average of L(φ̃); equals L(φ̃) for a constant model."""
        return -self.optimal_growth / self.horizon

    @property
    def optimal_growth(self) -> float:
        """Optimal expected log-wealth −Σ Δt·L(φ̃)."""
        return -sum(s.segment.duration * s.value for s in self.segments)

    @property
    def grad_norm(self) -> float:
        return max(s.grad_norm for s in self.segments)

    @property
    def kkt_residual(self) -> float:
        return max(s.kkt_residual for s in self.segments)

    @property
    def v_drift(self) -> list[float]:
        return [s.v_drift for s in self.segments]

    @property
    def condi11_value(self) -> float:
        return sum(s.segment.duration * s.condi11_rate for s in self.segments)

    @property
    def iterations(self) -> int:
        return sum(s.iterations for s in self.segments)

    @property
    def delta_ladder(self) -> list[float]:
        return [delta for s in self.segments for delta in s.delta_ladder]

    @property
    def certified(self) -> bool:
        return all(s.certified for s in self.segments)

    def lines(self) -> list[str]:
        out = [
            f"optimal log-growth: {self.optimal_growth:.17g}",
            f"condi11: {self.condi11_value:.17g}",
            f"certified: {self.certified}",
        ]
        for s in self.segments:
            phi = ", ".join(f"{v:.17g}" for v in s.phi)
            out.extend(
                [
                    f"segment {s.segment.index} "
                    f"[{s.segment.start:g}, {s.segment.end:g})",
                    f"  phi: [{phi}]",
                    f"  L(phi): {s.value:.17g}",
                    f"  grad_norm: {s.grad_norm:.3g} ({s.mode.value} certificate)",
                    f"  kkt_residual: {s.kkt_residual:.3g}",
                    f"  v_drift: {s.v_drift:.3g}",
                    f"  iterations: {s.iterations}"
                    + (f", delta ladder {s.delta_ladder}" if s.delta_ladder else ""),
                ]
            )
        return out


@dataclass(frozen=True)
class PortfolioPair:
    """
    The optimal fractions with the rule turning them into holdings.

    Holdings are θ̃ = φ̃·E_−(φ̃·X) and fractions are recovered from holdings
    as φ = θ(1 + (θ·X)_−)⁻¹, where 1 + (θ·X)_− is the pre-jump wealth.
    """

    phi: list[FloatArray]

    def holdings(self, phi_steps: FloatArray, wealth_left: FloatArray) -> FloatArray:
        """
        Materialize θ̃ on a grid.

        Args:
            phi_steps: Fraction per step, shape (n_steps, d).
            wealth_left: Wealth at the left end of each step, shape (n_paths, n_steps).

        Returns:
            Holdings of shape (n_paths, n_steps, d).
        """
        return wealth_left[..., None] * phi_steps[None, :, :]

    def fractions(self, holdings: FloatArray, gains_left: FloatArray) -> FloatArray:
        """Recover fractions from holdings and accumulated gains (θ·X)_−."""
        return holdings / (1.0 + gains_left)[..., None]


def _as_segment(m: MarketModel | Characteristics | ModelSegment) -> ModelSegment:
    if isinstance(m, ModelSegment):
        return m
    if isinstance(m, MarketModel):
        return m.pieces()[0]
    return ModelSegment(index=0, start=0.0, end=1.0, characteristics=m)


def _chars(m: MarketModel | Characteristics | ModelSegment) -> Characteristics:
    return _as_segment(m).characteristics


def ensure_feasible(chars: Characteristics, phi: FloatArray) -> None:
    """
    Raise if some positive-intensity atom has 1 + φᵀx ≤ 0.

    Raises:
        DomainViolationError: With the first offending atom.
    """
    sizes, _ = chars.support()
    if not len(sizes):
        return
    slack = 1.0 + sizes @ phi
    bad = np.flatnonzero(slack <= 0)
    if bad.size:
        i = int(bad[0])
        raise DomainViolationError(
            "fraction outside the admissible domain",
            atom_index=i,
            slack=float(slack[i]),
        )


def first_order_expression(
    chars: Characteristics, phi_opt: FloatArray, phi: FloatArray
) -> float:
    """(φ−φ̃)ᵀ(b − cφ̃) + Σ w_i((φ−φ̃)ᵀx_i/(1+φ̃ᵀx_i) − (φ−φ̃)ᵀh(x_i))."""
    sizes, weights = chars.support()
    diff = phi - phi_opt
    value = float(diff @ (chars.drift - chars.covariance @ phi_opt))
    if len(sizes):
        s = 1.0 + sizes @ phi_opt
        value += float(weights @ (sizes @ diff / s - truncate(sizes) @ diff))
    return value


def product_growth_rate(
    m: MarketModel | Characteristics | ModelSegment,
    phi_opt: VectorLike,
    phi: VectorLike,
) -> float:
    """
    Exponential rate κ with E[Z̃_t·E(φ·X)_t] = exp(κt) on one segment.

    κ is the first-order expression at φ̃ tested against φ, so it is ≤ 0 at
    the optimum and 0 for φ = φ̃.
    """
    chars = _chars(m)
    return first_order_expression(chars, as_point(chars, phi_opt), as_point(chars, phi))


def v_drift_rate(chars: Characteristics, phi: FloatArray) -> float:
    """dṼ/dt = |φᵀ(b−cφ) + Σ w_i(φᵀx_i/(1+φᵀx_i) − φᵀh(x_i))|."""
    return abs(first_order_expression(chars, phi, np.zeros_like(phi)))


def v_drift_split(chars: Characteristics, phi: FloatArray) -> float:
    """
    The Ṽ rate with small and large jumps written separately.

    |φᵀ(b−cφ) − Σ_{|x|≤1} w(φᵀx)²/(1+φᵀx) + Σ_{|x|>1} w(1 − 1/(1+φᵀx))|
    """
    sizes, weights = chars.support()
    value = float(phi @ (chars.drift - chars.covariance @ phi))
    if len(sizes):
        u = sizes @ phi
        small = np.linalg.norm(sizes, axis=1) <= 1.0
        value -= float(weights[small] @ (u[small] ** 2 / (1.0 + u[small])))
        value += float(weights[~small] @ (1.0 - 1.0 / (1.0 + u[~small])))
    return abs(value)


def positive_expressions(
    chars: Characteristics, phi: FloatArray
) -> tuple[float, float]:
    """
    The two expressions that are nonnegative at φ̃.

    Returns:
        (φᵀb − φᵀcφ + Σw(φᵀx/(1+φᵀx) − φᵀh),  φᵀb − ½φᵀcφ + Σw(ln(1+φᵀx) − φᵀh)).
    """
    sizes, weights = chars.support()
    b, c = chars.drift, chars.covariance
    first = float(phi @ b - phi @ c @ phi)
    second = float(phi @ b - 0.5 * phi @ c @ phi)
    if len(sizes):
        u = sizes @ phi
        uh = truncate(sizes) @ phi
        first += float(weights @ (u / (1.0 + u) - uh))
        second += float(weights @ (np.log1p(u) - uh))
    return first, second


def condi11_rate(chars: Characteristics, phi: FloatArray) -> float:
    """v + ½φᵀcφ + Σ w_i(ln(1+φᵀx_i) − φᵀx_i/(1+φᵀx_i))."""
    sizes, weights = chars.support()
    rate = v_drift_rate(chars, phi) + 0.5 * float(phi @ chars.covariance @ phi)
    if len(sizes):
        u = sizes @ phi
        rate += float(weights @ (np.log1p(u) - u / (1.0 + u)))
    return rate


def condi11_evaluate(m: MarketModel, phi: VectorLike | Sequence[VectorLike]) -> float:
    """
    Evaluate the integrability expectation for deterministic characteristics.

    Returns:
        Σ_segments Δt·(v + ½φᵀcφ + Σ w_i(ln(1+φᵀx_i) − φᵀx_i/(1+φᵀx_i))).

    Raises:
        DomainViolationError: If ``phi`` is infeasible on some segment.
    """
    total = 0.0
    for piece, point in zip(m.pieces(), segment_fractions(m, phi)):
        ensure_feasible(piece.characteristics, point)
        total += piece.duration * condi11_rate(piece.characteristics, point)
    assert math.isfinite(total)
    return total


def shrink_into_domain(
    chars: Characteristics, center: FloatArray, direction: FloatArray, radius: float
) -> FloatArray:
    """
    Move from ``center`` along ``direction`` by at most ``radius``.

    The step stops at 0.9 of the distance to the nearest boundary hyperplane.
    """
    sizes, _ = chars.support()
    step = radius
    if len(sizes):
        slack = 1.0 + sizes @ center
        rate = sizes @ direction
        shrinking = rate < 0
        if np.any(shrinking):
            limit = float(np.min(slack[shrinking] / -rate[shrinking]))
            step = min(step, BOUNDARY_SHRINK * limit)
    return center + step * direction


def sample_feasible(
    chars: Characteristics,
    center: FloatArray,
    n: int,
    seed: int,
    radius: float,
    tag: int = _rng.TEST_POINTS,
) -> list[FloatArray]:
    """Draw ``n`` feasible points around a feasible ``center``, seed-controlled."""
    rng = _rng.stream(seed, tag)
    directions = rng.standard_normal((n, chars.dim))
    points = []
    for u in directions:
        length = float(np.linalg.norm(u))
        if length == 0.0:
            continue
        reach = radius * rng.uniform()
        points.append(shrink_into_domain(chars, center, u / length, reach))
    return points


def verify_first_order(
    m: MarketModel | Characteristics | ModelSegment,
    phi: VectorLike,
    n_probes: int = 50,
    seed: int = 42,
) -> float:
    """
    Largest left side of the first-order condition over sampled test points.

    The test points are ``n_probes`` seeded feasible points plus φ = 0 and φ = 2φ̃
    (shrunk into the domain). A residual ≤ tol certifies optimality.

    Raises:
        DomainViolationError: If ``phi`` is infeasible.
    """
    chars = _chars(m)
    point = as_point(chars, phi)
    ensure_feasible(chars, point)
    radius = max(1.0, 2.0 * float(np.linalg.norm(point)))
    points = sample_feasible(chars, point, n_probes, seed, radius)
    points.append(np.zeros_like(point))
    length = float(np.linalg.norm(point))
    if length > 0:
        points.append(shrink_into_domain(chars, point, point / length, length))
    return max(first_order_expression(chars, point, q) for q in points)


def _newton(
    chars: Characteristics, start: FloatArray, cfg: SolverConfig, delta: float | None
) -> NewtonResult:
    sizes, _ = chars.support()

    def objective(point: FloatArray) -> ObjectiveEval:
        if delta is None:
            return eval_L(chars, point)
        return eval_L_delta(chars, point, delta)
    return damped_newton(
        objective,
        start,
        sizes,
        tol=cfg["tol"] * chars.magnitude,
        max_iterations=cfg["max_iterations"],
        fraction_to_boundary=cfg["fraction_to_boundary"],
        armijo=cfg["armijo"],
    )


def smoothed_minimizer(
    m: MarketModel | Characteristics | ModelSegment,
    delta: float,
    start: VectorLike | None = None,
    opts: SolverConfig | None = None,
) -> FloatArray:
    """Minimize L_δ over the open domain of L, warm-started at ``start``."""
    chars = _chars(m)
    cfg = resolve_solver_config(opts)
    origin = np.zeros(chars.dim) if start is None else as_point(chars, start)
    return _newton(chars, origin, cfg, delta).point


def solve_segment(
    m: MarketModel | Characteristics | ModelSegment,
    opts: SolverConfig | None = None,
    start: VectorLike | None = None,
) -> SegmentSolution:
    """
    Minimize L on one segment and certify the minimizer.

    Starts at ``start`` (λ = 0 by default). If damped Newton on L does not
    converge, the δ ladder minimizes L_δ for increasing δ with warm starts and
    finishes on L. Tolerances are relative to the segment's magnitude.

    Args:
        m: The segment (a model uses its first piece; bare characteristics
            get unit duration).
        opts: Solver overrides.
        start: Feasible starting point.

    Returns:
        The certified segment solution.

    Raises:
        DomainViolationError: If ``start`` lies outside the domain.
        NonAttainmentError: If the recession analysis finds a witness.
        ConvergenceError: If no stage reaches the tolerance.
    """
    segment = _as_segment(m)
    chars = segment.characteristics
    cfg = resolve_solver_config(opts)

    certificate = attainment_certificate(
        chars, n_dirs=cfg["n_dirs"], seed=cfg["seed"], tol=cfg["rc_tol"]
    )
    if not certificate.attained:
        assert certificate.witness_direction is not None
        raise NonAttainmentError(
            f"minimum of L not attained on segment {segment.index}",
            direction=certificate.witness_direction,
            recession_value=float(certificate.witness_value or 0.0),
        )

    origin = np.zeros(chars.dim) if start is None else as_point(chars, start)
    ensure_feasible(chars, origin)
    result = _newton(chars, origin, cfg, None)
    iterations = result.iterations
    ladder: list[float] = []
    if not result.converged:
        logger.info(
            "segment %d: Newton did not converge, running delta ladder", segment.index
        )
        point = origin
        for delta in cfg["delta_ladder"]:
            stage = _newton(chars, point, cfg, delta)
            iterations += stage.iterations
            ladder.append(delta)
            point = stage.point
            logger.debug("delta %.6g: L_delta = %.17g", delta, stage.evaluation.value)
        result = _newton(chars, point, cfg, None)
        iterations += result.iterations

    phi = result.point
    basis = certificate.rc_basis
    if len(basis):
        phi = phi - basis.T @ (basis @ phi)
    evaluation = eval_L(chars, phi)
    assert evaluation.gradient is not None
    grad_norm = float(np.linalg.norm(evaluation.gradient))

    sizes, _ = chars.support()
    min_slack = float(np.min(1.0 + sizes @ phi)) if len(sizes) else math.inf
    residual = verify_first_order(
        segment, phi, n_probes=cfg["n_probes"], seed=cfg["seed"]
    )
    tol = cfg["tol"] * chars.magnitude
    if min_slack < cfg["boundary_threshold"]:
        mode = CertificateMode.DIRECTIONAL
        certified = residual <= tol
    else:
        mode = CertificateMode.GRADIENT
        certified = grad_norm <= tol

    if not certified:
        raise ConvergenceError(
            f"solver did not certify segment {segment.index} "
            f"(|g| = {grad_norm:.3g}, residual = {residual:.3g})",
            iterations=iterations,
            trace=result.trace,
        )

    return SegmentSolution(
        segment=segment,
        phi=phi,
        value=evaluation.value,
        grad_norm=grad_norm,
        kkt_residual=residual,
        v_drift=v_drift_rate(chars, phi),
        v_drift_split=v_drift_split(chars, phi),
        condi11_rate=condi11_rate(chars, phi),
        positive1=positive_expressions(chars, phi),
        iterations=iterations,
        delta_ladder=ladder,
        mode=mode,
        certified=certified,
        trace=result.trace,
        rc_basis=basis,
    )


def solve(m: MarketModel, opts: SolverConfig | None = None) -> SolveReport:
    """
    Solve every segment of ``m``.

    Segments are independent; with ``workers > 1`` they run on a thread pool
    and the solutions are collected in segment order.
    """
    cfg = resolve_solver_config(opts)
    pieces = m.pieces()
    if cfg["workers"] > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=cfg["workers"]) as pool:
            solutions = list(pool.map(lambda p: solve_segment(p, cfg), pieces))
    else:
        solutions = [solve_segment(p, cfg) for p in pieces]
    report = SolveReport(segments=solutions)
    logger.info(
        "optimal log-growth %.10g over %d segment(s)",
        report.optimal_growth,
        len(pieces),
    )
    return report


def fraction_to_holdings(phi: Sequence[VectorLike] | SolveReport) -> PortfolioPair:
    """Wrap optimal fractions with the holdings conversion rule."""
    if isinstance(phi, SolveReport):
        return PortfolioPair(phi=phi.phi)
    return PortfolioPair(phi=[np.atleast_1d(np.asarray(p, dtype=float)) for p in phi])
