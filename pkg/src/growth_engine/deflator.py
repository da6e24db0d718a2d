"""Deflators given by a triplet (β, f, V) and the optimal one built from φ̃.

A triplet defines Z = E(β·Xᶜ + (f−1)⋆(μ−ν))·exp(−V) with f > 0 on the atoms
and V = v·t on each segment. Z is a deflator when, for every admissible θ,

    θᵀb + θᵀcβ + Σ_i w_i (f_i θᵀx_i − θᵀh(x_i)) ≤ v,

and then E[−ln Z_T] = Σ_seg Δt·(v + ½βᵀcβ + Σ_i w_i(f_i − 1 − ln f_i)).
The optimal triplet is β = −φ̃, f_i = 1/(1 + φ̃ᵀx_i), v = dṼ/dt, for which
Z̃·E(φ̃·X) ≡ 1 pathwise.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from growth_engine import _rng
from growth_engine.exceptions import UncertifiedReportError
from growth_engine.model import Characteristics, MarketModel, truncate
from growth_engine.simulation import ExponentialCoefficients
from growth_engine.solver import (
    SolveReport,
    ensure_feasible,
    sample_feasible,
)
from growth_engine.types import FloatArray, VectorLike

logger = logging.getLogger(__name__)

THETA_RADIUS = 10.0


@dataclass
class DeflatorParam:
    """
    A deflator triplet, one entry per segment.

    Attributes:
        beta: Loading β of Xᶜ.
        f_values: f on the positive-intensity atoms, all > 0.
        v_drift: Rate v ≥ 0 of V.
        valid: Whether the drift condition holds (set by ``validate_deflator``).
        log_value: E[−ln Z_T].
    """

    beta: list[FloatArray]
    f_values: list[FloatArray]
    v_drift: list[float]
    valid: bool = False
    log_value: float = math.nan


@dataclass(frozen=True)
class SegmentCondition:
    """
    Drift-condition check of one segment.

    Attributes:
        index: Segment index.
        cond1: Whether ½βᵀcβ + Σw(f−1−ln f) and v are finite.
        sampled_drift: Largest θᵀg over the sampled θ.
        support: sup θᵀg over the closed domain (+∞ if unbounded).
        v_drift: The rate v.
        passed: sampled_drift and support both ≤ v + tol.
    """

    index: int
    cond1: bool
    sampled_drift: float
    support: float
    v_drift: float
    passed: bool


@dataclass(frozen=True)
class DeflatorValidation:
    """Result of ``validate_deflator``."""

    valid: bool
    log_value: float
    segments: list[SegmentCondition] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"valid: {self.valid}", f"log_value: {self.log_value:.17g}"]
        for s in self.segments:
            out.append(
                f"segment {s.index}: cond1 {s.cond1}, "
                f"sampled drift {s.sampled_drift:.6g}, "
                f"support {s.support:.6g} <= v {s.v_drift:.6g}: {s.passed}"
            )
        return out


def deflator_drift(
    chars: Characteristics, beta: FloatArray, f: FloatArray
) -> FloatArray:
    """g = b + cβ + Σ w_i(f_i x_i − h(x_i)), so the drift condition reads θᵀg ≤ v."""
    sizes, weights = chars.support()
    g = chars.drift + chars.covariance @ beta
    if len(sizes):
        g = g + weights @ (f[:, None] * sizes - truncate(sizes))
    return g


def support_value(chars: Characteristics, g: FloatArray, tol: float = 1e-10) -> float:
    """
    sup θᵀg over {θ : 1 + θᵀx_i ≥ 0 for every atom}.

    A drift vector with |g| ≤ tol counts as zero.
    """
    if float(np.linalg.norm(g)) <= tol:
        return 0.0
    sizes, _ = chars.support()
    if not len(sizes):
        return math.inf
    result = linprog(
        -g,
        A_ub=-sizes,
        b_ub=np.ones(len(sizes)),
        bounds=[(None, None)] * chars.dim,
        method="highs",
    )
    if result.status == 3:
        return math.inf
    if result.status != 0:
        logger.warning("support program failed: %s", result.message)
        return math.inf
    return float(-result.fun)


def _entropy_rate(chars: Characteristics, beta: FloatArray, f: FloatArray) -> float:
    _, weights = chars.support()
    rate = 0.5 * float(beta @ chars.covariance @ beta)
    if len(weights):
        rate += float(weights @ (f - 1.0 - np.log(f)))
    return rate


def deflator_log_value(m: MarketModel, p: DeflatorParam) -> float:
    """Σ_seg Δt·(v + ½βᵀcβ + Σ w_i(f_i − 1 − ln f_i))."""
    return sum(
        piece.duration * (v + _entropy_rate(piece.characteristics, beta, f))
        for piece, beta, f, v in zip(m.pieces(), p.beta, p.f_values, p.v_drift)
    )


def deflator_coefficients(m: MarketModel, p: DeflatorParam) -> ExponentialCoefficients:
    """
    Coefficients of ln Z for the path simulator.

    Per segment: loading β, rate −½βᵀcβ − Σ w_i(f_i − 1) − v, factors f_i.
    """
    rates = []
    for piece, beta, f, v in zip(m.pieces(), p.beta, p.f_values, p.v_drift):
        _, weights = piece.characteristics.support()
        compensator = float(weights @ (f - 1.0)) if len(weights) else 0.0
        rates.append(
            -0.5 * float(beta @ piece.characteristics.covariance @ beta)
            - compensator
            - v
        )
    return ExponentialCoefficients(
        continuous=np.array(p.beta),
        rate=np.array(rates),
        factors=[np.asarray(f, dtype=float) for f in p.f_values],
        label="deflator",
    )


def naive_deflator(m: MarketModel) -> DeflatorParam:
    """The candidate Z ≡ 1: β = 0, f = 1, v = 0."""
    pieces = m.pieces()
    return DeflatorParam(
        beta=[np.zeros(m.dim) for _ in pieces],
        f_values=[np.ones(len(p.characteristics.support()[1])) for p in pieces],
        v_drift=[0.0 for _ in pieces],
    )


def validate_deflator(
    m: MarketModel,
    p: DeflatorParam,
    probe_thetas: Sequence[VectorLike] | None = None,
    n_probes: int = 50,
    seed: int = 42,
    tol: float = 1e-10,
) -> DeflatorValidation:
    """
    Check the drift condition on sampled θ and exactly by linear programming.

    Without ``probe_thetas`` each segment gets ``n_probes`` seeded feasible θ
    around the origin. ``p.valid`` and ``p.log_value`` are updated in place.

    Raises:
        ValueError: If some f value is not positive or a list length is wrong.
    """
    pieces = m.pieces()
    if not len(p.beta) == len(p.f_values) == len(p.v_drift) == len(pieces):
        raise ValueError(f"deflator must have {len(pieces)} segment entries")

    conditions: list[SegmentCondition] = []
    for piece, beta, f, v in zip(pieces, p.beta, p.f_values, p.v_drift):
        chars = piece.characteristics
        f = np.asarray(f, dtype=float)
        if f.shape != (len(chars.support()[1]),):
            raise ValueError(f"segment {piece.index}: expected one f value per atom")
        if np.any(f <= 0):
            raise ValueError(f"segment {piece.index}: f must be positive on every atom")

        g = deflator_drift(chars, np.asarray(beta, dtype=float), f)
        if probe_thetas is None:
            thetas = sample_feasible(
                chars, np.zeros(chars.dim), n_probes, seed, THETA_RADIUS
            )
        else:
            thetas = [np.atleast_1d(np.asarray(t, dtype=float)) for t in probe_thetas]
        sampled_drift = max((float(theta @ g) for theta in thetas), default=-math.inf)
        support = support_value(chars, g, tol)
        cond1 = math.isfinite(_entropy_rate(chars, beta, f)) and math.isfinite(v)
        passed = cond1 and sampled_drift <= v + tol and support <= v + tol
        conditions.append(
            SegmentCondition(
                index=piece.index,
                cond1=cond1,
                sampled_drift=sampled_drift,
                support=support,
                v_drift=v,
                passed=passed,
            )
        )

    p.valid = all(c.passed for c in conditions)
    p.log_value = deflator_log_value(m, p)
    if not p.valid:
        logger.info("deflator candidate fails the drift condition")
    return DeflatorValidation(valid=p.valid, log_value=p.log_value, segments=conditions)


def build_deflator(
    m: MarketModel, report: SolveReport
) -> tuple[DeflatorParam, ExponentialCoefficients]:
    """
    The optimal triplet β = −φ̃, f_i = 1/(1+φ̃ᵀx_i), v = dṼ/dt and its path rule.

    Raises:
        UncertifiedReportError: If the report's certificate failed.
        DomainViolationError: If some φ̃ is infeasible.
    """
    if not report.certified:
        raise UncertifiedReportError("solve report is not certified optimal")
    betas, fs = [], []
    for piece, phi in zip(m.pieces(), report.phi):
        chars = piece.characteristics
        ensure_feasible(chars, phi)
        sizes, _ = chars.support()
        betas.append(-phi)
        fs.append(1.0 / (1.0 + sizes @ phi))
    param = DeflatorParam(beta=betas, f_values=fs, v_drift=list(report.v_drift))
    validate_deflator(m, param)
    return param, deflator_coefficients(m, param)


def perturbed_deflators(
    m: MarketModel, p: DeflatorParam, n: int = 10, seed: int = 42, scale: float = 0.1
) -> list[DeflatorParam]:
    """
    Valid deflators near ``p``.

    Each candidate perturbs β along the range of c and scales f by positive
    factors, falling back to fewer perturbations when the drift condition
    cannot be met with a finite v; v is then set to the exact support value
    plus a nonnegative slack.
    """
    rng = _rng.stream(seed, _rng.PERTURBATIONS)
    pieces = m.pieces()
    out: list[DeflatorParam] = []
    for _ in range(n):
        epsilon = scale * rng.uniform(0.2, 1.0)
        betas, fs, vs = [], [], []
        for piece, beta, f in zip(pieces, p.beta, p.f_values):
            chars = piece.characteristics
            noise = rng.standard_normal(chars.dim)
            moved_beta = beta + epsilon * chars.covariance @ noise
            moved_f = f * np.exp(epsilon * rng.standard_normal(len(f)))
            for candidate_beta, candidate_f in (
                (moved_beta, moved_f),
                (beta, moved_f),
                (moved_beta, f),
                (beta, f),
            ):
                support = support_value(
                    chars, deflator_drift(chars, candidate_beta, candidate_f)
                )
                if math.isfinite(support):
                    break
            betas.append(candidate_beta)
            fs.append(candidate_f)
            vs.append(max(support, 0.0) + epsilon * rng.uniform())
        candidate = DeflatorParam(beta=betas, f_values=fs, v_drift=vs)
        validate_deflator(m, candidate, seed=seed)
        if candidate.valid:
            out.append(candidate)
    return out
