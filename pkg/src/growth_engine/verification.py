"""Monte Carlo and pathwise verification of the optimal portfolio and deflator.

Every check produces a ``Finding`` with the measured value, the reference it
is compared against and the slack allowed, so reports can be printed and
tabulated from the same records. Statistical checks allow three standard
errors, widened by a Bonferroni correction where one report runs many rise
tests. Pathwise identities are checked to fixed relative tolerances.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.stats import norm

from growth_engine import _rng
from growth_engine._defaults import resolve_simulation_config
from growth_engine.config import SimulationConfig
from growth_engine.deflator import (
    DeflatorParam,
    build_deflator,
    perturbed_deflators,
)
from growth_engine.inequalities import (
    bracket_decomposition,
    jump_lower_bound,
    log_gap,
    relative_jump_decomposition,
)
from growth_engine.model import Characteristics, JumpAtom, JumpMeasure, MarketModel
from growth_engine.objective import eval_L, segment_fractions
from growth_engine.simulation import (
    ExponentialCoefficients,
    Moments,
    PathBlock,
    TimeGrid,
    compensated_drift,
    log_exponential,
    map_blocks,
    reduce_moments,
    simulate,
    wealth_coefficients,
)
from growth_engine.solver import (
    SolveReport,
    fraction_to_holdings,
    product_growth_rate,
    sample_feasible,
    solve,
    v_drift_split,
)
from growth_engine.types import FloatArray, VectorLike

logger = logging.getLogger(__name__)

N_SE = 3.0
PATHWISE_TOL = 1e-9
AUDIT_PATHS = 1000


def rise_quantile(n_comparisons: int) -> float:
    """
    Normal quantile for many one-sided rise tests at once.

    The tail probability of a single N_SE test is split evenly over
    ``n_comparisons`` (Bonferroni), so a whole battery raises a false alarm
    no more often than one N_SE comparison does.
    """
    return max(N_SE, float(norm.isf(norm.sf(N_SE) / max(1, n_comparisons))))


@dataclass(frozen=True)
class Finding:
    """
    One verification check.

    Attributes:
        name: Check identifier, e.g. ``analytic[phi]``.
        passed: Outcome.
        value: Measured quantity.
        reference: What it is compared against.
        slack: Allowed deviation (a multiple of the SE or a tolerance).
    """

    name: str
    passed: bool
    value: float
    reference: float
    slack: float


@dataclass
class VerificationReport:
    """A titled list of findings."""

    title: str
    findings: list[Finding] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.findings)

    @property
    def failures(self) -> list[str]:
        return [f.name for f in self.findings if not f.passed]

    def add(
        self, name: str, passed: bool, value: float, reference: float, slack: float
    ) -> None:
        finding = Finding(
            name=name,
            passed=bool(passed),
            value=float(value),
            reference=float(reference),
            slack=float(slack),
        )
        if not finding.passed:
            logger.warning(
                "%s: %s failed (value %.6g, reference %.6g, slack %.3g)",
                self.title,
                name,
                value,
                reference,
                slack,
            )
        self.findings.append(finding)

    def lines(self) -> list[str]:
        out = [f"{self.title}: {'PASS' if self.passed else 'FAIL'}"]
        for f in self.findings:
            out.append(
                f"  [{'PASS' if f.passed else 'FAIL'}] {f.name}: {f.value:.10g} "
                f"vs {f.reference:.10g} (slack {f.slack:.3g})"
            )
        return out


def expected_log_growth(
    m: MarketModel, phi: VectorLike | Sequence[VectorLike]
) -> float:
    """−Σ_seg Δt·L(φ): the exact mean of ln E(φ·X)_T."""
    return -sum(
        piece.duration * eval_L(piece.characteristics, point).value
        for piece, point in zip(m.pieces(), segment_fractions(m, phi))
    )


def expected_product(
    m: MarketModel, phi_opt: Sequence[FloatArray], phi: Sequence[FloatArray]
) -> float:
    """E[Z̃_T·E(φ·X)_T] = exp(Σ_seg Δt·κ)."""
    return math.exp(
        sum(
            piece.duration * product_growth_rate(piece.characteristics, opt, point)
            for piece, opt, point in zip(m.pieces(), phi_opt, phi)
        )
    )


def yor_coefficients(
    m: MarketModel, phi: Sequence[FloatArray], deflator: DeflatorParam
) -> ExponentialCoefficients:
    """
    Coefficients of ln E(U + V + [U,V]) for U = φ·X and V the deflator's exponent.

    Built from the characteristics directly: loading φ + β, drift
    φᵀ(b − Σ_{|x|≤1}wx) − Σw(f−1) − v + φᵀcβ − ½(φ+β)ᵀc(φ+β), and jumps
    1 + ΔU + ΔV + ΔUΔV.
    """
    loadings, rates, factors = [], [], []
    for piece, point, beta, f, v in zip(
        m.pieces(), phi, deflator.beta, deflator.f_values, deflator.v_drift
    ):
        chars = piece.characteristics
        sizes, weights = chars.support()
        c = chars.covariance
        total = point + beta
        compensator = float(weights @ (f - 1.0)) if len(weights) else 0.0
        drift = float(point @ compensated_drift(chars)) - compensator - v
        rates.append(drift + float(point @ c @ beta) - 0.5 * float(total @ c @ total))
        jump_u = sizes @ point
        jump_v = f - 1.0
        factors.append(1.0 + jump_u + jump_v + jump_u * jump_v)
        loadings.append(total)
    return ExponentialCoefficients(
        continuous=np.array(loadings),
        rate=np.array(rates),
        factors=factors,
        label="yor",
    )


def _terminal_moments(
    block: PathBlock,
    grid: TimeGrid,
    wealths: list[ExponentialCoefficients],
    deflator: ExponentialCoefficients,
) -> Moments:
    columns = [log_exponential(block, grid, w)[:, -1] for w in wealths]
    log_deflator = log_exponential(block, grid, deflator)[:, -1]
    columns.append(np.maximum(log_deflator, 0.0))
    return Moments.of(np.column_stack(columns))


def _product_moments(
    block: PathBlock,
    grid: TimeGrid,
    wealths: list[ExponentialCoefficients],
    deflator: ExponentialCoefficients,
) -> tuple[list[tuple[Moments, Moments]], float]:
    log_deflator = log_exponential(block, grid, deflator)
    parts = []
    for w in wealths:
        product = np.exp(log_exponential(block, grid, w) + log_deflator)
        parts.append((Moments.of(product), Moments.of(np.diff(product, axis=1))))
    exact = np.exp(log_exponential(block, grid, wealths[0]) + log_deflator)
    return parts, float(np.max(np.abs(exact - 1.0)))


def _perturbed_fractions(
    m: MarketModel, phi: Sequence[FloatArray], n: int, seed: int, tag: int, scale: float
) -> list[list[FloatArray]]:
    per_segment = []
    for piece, point in zip(m.pieces(), phi):
        radius = scale * max(1.0, float(np.linalg.norm(point)))
        per_segment.append(
            sample_feasible(piece.characteristics, point, n, seed, radius, tag=tag)
        )
    count = min(len(points) for points in per_segment)
    return [[points[k] for points in per_segment] for k in range(count)]


def _audit(
    m: MarketModel,
    report: SolveReport,
    deflator: DeflatorParam,
    coefficients: ExponentialCoefficients,
    out: VerificationReport,
    n_paths: int,
    n_steps: int | None,
    seed: int,
) -> None:
    bundle = simulate(
        m,
        report.phi,
        n_paths=n_paths,
        n_steps=n_steps,
        seed=seed,
        deflator=coefficients,
    )
    assert bundle.product is not None and bundle.log_deflator_T is not None
    deviation = float(np.max(np.abs(bundle.product - 1.0)))
    out.add("pathwise[Z*W=1]", deviation <= PATHWISE_TOL, deviation, 0.0, PATHWISE_TOL)

    log_gap_T = np.abs(bundle.log_wealth_T + bundle.log_deflator_T)
    scale = 1.0 + np.abs(bundle.log_wealth_T)
    worst = float(np.max(log_gap_T / scale))
    out.add("pathwise[-lnZ=lnW]", worst <= 1e-10, worst, 0.0, 1e-10)

    wealth_positive = float(np.min(bundle.wealth))
    out.add("positivity[wealth]", wealth_positive > 0, wealth_positive, 0.0, 0.0)
    assert bundle.deflator is not None
    deflator_positive = float(np.min(bundle.deflator))
    out.add(
        "positivity[deflator]", deflator_positive > 0, deflator_positive, 0.0, 0.0
    )

    pair = fraction_to_holdings(report)
    wealth_left = bundle.wealth[:, :-1]
    holdings = pair.holdings(bundle.phi_steps, wealth_left)
    recovered = pair.fractions(holdings, wealth_left - 1.0)
    phi_scale = max(1.0, float(np.max(np.abs(bundle.phi_steps))))
    error = np.abs(recovered - bundle.phi_steps[None, :, :])
    round_trip = float(np.max(error)) / phi_scale
    out.add("holdings[round-trip]", round_trip <= 1e-12, round_trip, 0.0, 1e-12)

    grid_cfg: SimulationConfig = {"n_paths": n_paths, "n_steps": n_steps, "seed": seed}
    for label, phi in (("phi", report.phi), ("half", [0.5 * p for p in report.phi])):
        yor = yor_coefficients(m, phi, deflator)
        left = wealth_coefficients(m, phi)
        task = partial(_yor_gap, left=left, right=coefficients, composed=yor)
        _, gaps = map_blocks(task, m, grid_cfg)
        yor_gap = max(gaps)
        out.add(f"yor[{label}]", yor_gap <= PATHWISE_TOL, yor_gap, 0.0, PATHWISE_TOL)


def _yor_gap(
    block: PathBlock,
    grid: TimeGrid,
    left: ExponentialCoefficients,
    right: ExponentialCoefficients,
    composed: ExponentialCoefficients,
) -> float:
    product = (
        log_exponential(block, grid, left)[:, -1]
        + log_exponential(block, grid, right)[:, -1]
    )
    direct = log_exponential(block, grid, composed)[:, -1]
    return float(np.max(np.abs(np.expm1(direct - product))))


def verify_duality(
    m: MarketModel,
    report: SolveReport,
    n_paths: int = 10_000,
    seed: int = 42,
    n_steps: int | None = None,
    n_perturbations: int = 10,
    tol: float = 1e-10,
    workers: int = 1,
    block_size: int = 2048,
) -> VerificationReport:
    """
    Check primal and dual optimality of (φ̃, Z̃).

    Pathwise on up to 1000 audit paths: Z̃·E(φ̃·X) = 1, −ln Z̃_T = ln E(φ̃·X)_T,
    positivity, the holdings round-trip and Yor's product formula. By Monte
    Carlo over ``n_paths``: the mean terminal log-wealth of φ̃, ½φ̃ and 0
    against −Σ Δt·L; perturbed fractions do no better than φ̃; E[ln⁺ Z̃_T] ≤
    ln 2. Analytically: valid perturbed deflators have log_value ≥ the
    optimum, and the integrability value equals the optimum.

    Raises:
        UncertifiedReportError: If the report is not certified.
    """
    out = VerificationReport(title="duality")
    deflator, coefficients = build_deflator(m, report)
    optimum = report.optimal_growth

    # Both identities hold up to 2·|φ̃|·|∇L(φ̃)| per unit time.
    identity_slack = 2.0 * tol * sum(
        s.segment.duration * (1.0 + float(np.linalg.norm(s.phi)))
        for s in report.segments
    )
    out.add("deflator[valid]", deflator.valid, float(deflator.valid), 1.0, 0.0)
    out.add(
        "deflator[log_value]",
        abs(deflator.log_value - optimum) <= identity_slack,
        deflator.log_value,
        optimum,
        identity_slack,
    )

    condi11 = report.condi11_value
    out.add(
        "condi11",
        abs(condi11 - optimum) <= identity_slack,
        condi11,
        optimum,
        identity_slack,
    )
    for s in report.segments:
        k = s.segment.index
        first, second = s.positive1
        out.add(f"positive1[{k}].first", first >= -tol, first, 0.0, tol)
        out.add(f"positive1[{k}].second", second >= -tol, second, 0.0, tol)
        split = v_drift_split(s.segment.characteristics, s.phi)
        out.add(
            f"v_drift[{k}].split",
            abs(split - s.v_drift) <= 1e-12,
            split,
            s.v_drift,
            1e-12,
        )

    audit_paths = min(n_paths, AUDIT_PATHS)
    _audit(m, report, deflator, coefficients, out, audit_paths, n_steps, seed)

    half = [0.5 * p for p in report.phi]
    zero = [np.zeros_like(p) for p in report.phi]
    perturbed = _perturbed_fractions(
        m, report.phi, n_perturbations, seed, _rng.PRIMAL_PERTURBATIONS, 0.5
    )
    candidates = [report.phi, half, zero, *perturbed]
    task = partial(
        _terminal_moments,
        wealths=[wealth_coefficients(m, phi) for phi in candidates],
        deflator=coefficients,
    )
    cfg = resolve_simulation_config(
        {
            "n_paths": n_paths,
            "n_steps": n_steps,
            "seed": seed,
            "workers": workers,
            "block_size": block_size,
        }
    )
    _, parts = map_blocks(task, m, cfg)
    moments = reduce_moments(parts)
    means, ses = moments.mean, moments.se

    for k, label in enumerate(("phi", "half", "zero")):
        expected = expected_log_growth(m, candidates[k])
        slack = N_SE * ses[k] + 1e-12
        out.add(
            f"analytic[{label}]",
            abs(means[k] - expected) <= slack,
            means[k],
            expected,
            slack,
        )
    for j in range(len(perturbed)):
        k = 3 + j
        slack = N_SE * ses[k] + 1e-12
        out.add(f"primal[{j}]", means[k] <= optimum + slack, means[k], optimum, slack)
        exact = expected_log_growth(m, candidates[k])
        out.add(f"primal[{j}].exact", exact <= optimum + tol, exact, optimum, tol)

    positive_part = means[-1]
    bound = math.log(2.0)
    slack = N_SE * ses[-1]
    out.add("log_plus[Z]", positive_part <= bound + slack, positive_part, bound, slack)

    dual_candidates = perturbed_deflators(m, deflator, n_perturbations, seed)
    for j, candidate in enumerate(dual_candidates):
        value = candidate.log_value
        out.add(f"dual[{j}]", value >= optimum - tol, value, optimum, tol)
    return out


def random_test_fractions(
    m: MarketModel, report: SolveReport, n: int = 10, seed: int = 42
) -> list[list[FloatArray]]:
    """Seeded feasible fractions per segment, spread around the origin and φ̃."""
    scale = 2.0
    per_segment = []
    for piece, point in zip(m.pieces(), report.phi):
        radius = scale * max(1.0, float(np.linalg.norm(point)))
        per_segment.append(
            sample_feasible(
                piece.characteristics,
                np.zeros_like(point),
                n,
                seed,
                radius,
                tag=_rng.TEST_PORTFOLIOS,
            )
        )
    count = min(len(points) for points in per_segment)
    return [[points[k] for points in per_segment] for k in range(count)]


def check_supermartingale(
    m: MarketModel,
    report: SolveReport,
    test_phis: Sequence[VectorLike | Sequence[VectorLike]] | None = None,
    n_paths: int = 10_000,
    n_steps: int | None = None,
    seed: int = 42,
    workers: int = 1,
    block_size: int = 2048,
) -> VerificationReport:
    """
    Check that Z̃·E(φ·X) is a supermartingale for each test fraction.

    For every test φ the mean one-step increment of the product must not be
    positive beyond ``rise_quantile`` standard errors, taking the larger of
    the paired per-path increment error and the level error. The terminal
    mean must match the exact value exp(Σ Δt·κ) within three standard
    errors. For φ = φ̃ the product is 1 on every path and grid point.
    """
    out = VerificationReport(title="supermartingale")
    _, coefficients = build_deflator(m, report)
    if test_phis is None:
        tests = random_test_fractions(m, report, seed=seed)
    else:
        tests = [segment_fractions(m, phi) for phi in test_phis]
    fractions = [report.phi, *tests]

    task = partial(
        _product_moments,
        wealths=[wealth_coefficients(m, phi) for phi in fractions],
        deflator=coefficients,
    )
    cfg = resolve_simulation_config(
        {
            "n_paths": n_paths,
            "n_steps": n_steps,
            "seed": seed,
            "workers": workers,
            "block_size": block_size,
        }
    )
    _, parts = map_blocks(task, m, cfg)
    exact_gap = max(gap for _, gap in parts)
    out.add("exact[phi]", exact_gap <= PATHWISE_TOL, exact_gap, 1.0, PATHWISE_TOL)

    n_increments = len(parts[0][0][0][1].total)
    z = rise_quantile(len(fractions) * n_increments)
    for k, phi in enumerate(fractions):
        label = "phi" if k == 0 else str(k - 1)
        levels = reduce_moments([p[0][k][0] for p in parts])
        steps = reduce_moments([p[0][k][1] for p in parts])
        mean, se = levels.mean, levels.se
        rise_slack = z * np.maximum(steps.se, se[1:]) + 1e-12
        rises = steps.mean - rise_slack
        worst = int(np.argmax(rises))
        out.add(
            f"non-increasing[{label}]",
            rises[worst] <= 0,
            float(steps.mean[worst]),
            0.0,
            float(rise_slack[worst]),
        )
        expected = expected_product(m, report.phi, phi)
        slack = N_SE * float(se[-1]) + 1e-12
        terminal = float(mean[-1])
        out.add(
            f"growth[{label}]",
            abs(terminal - expected) <= slack,
            terminal,
            expected,
            slack,
        )
    return out


@dataclass(frozen=True)
class OracleReport:
    """
    Outcome of the path-functional inequality oracle.

    Attributes:
        passed: No inequality was violated.
        n_cases: Random models checked.
        n_paths: Paths checked.
        n_jumps: Jumps checked.
        worst: Largest left − right seen over all inequalities.
    """

    passed: bool
    n_cases: int
    n_paths: int
    n_jumps: int
    worst: float


def random_oracle_model(rng: np.random.Generator) -> MarketModel:
    """A one-asset model with an up and a down atom, so the optimum is attained."""
    up = float(rng.uniform(0.1, 1.5))
    down = float(rng.uniform(-0.9, -0.1))
    return MarketModel(
        dim=1,
        horizon=1.0,
        characteristics=Characteristics(
            b=float(rng.uniform(-0.2, 0.2)),
            c=float(rng.uniform(0.0, 0.1)),
            jumps=JumpMeasure(
                atoms=(
                    JumpAtom(x=up, w=float(rng.uniform(0.2, 2.0))),
                    JumpAtom(x=down, w=float(rng.uniform(0.2, 2.0))),
                )
            ),
        ),
    )


def lemma_a1_oracle(
    n_cases: int = 20,
    seed: int = 42,
    n_paths: int = 200,
    n_steps: int = 50,
    delta: float = 0.5,
) -> OracleReport:
    """
    Check the bracket decomposition of K on simulated optimal-deflator paths.

    On each path √[K,K]_T ≤ √⟨Kᶜ⟩_T + Σ|ΔK|1{|ΔK|>δ} + √(ΣΔK²1{|ΔK|≤δ}),
    the same split for u/(1+u) with u = φ̃ᵀΔX, and on every jump
    y − ln(1+y) ≥ the jump lower bound at y = ΔK.
    """
    rng = _rng.stream(seed, _rng.ORACLE_MODELS)
    worst = -math.inf
    total_paths = total_jumps = 0
    for _ in range(n_cases):
        m = random_oracle_model(rng)
        report = solve(m)
        deflator, _ = build_deflator(m, report)
        path_seed = int(rng.integers(2**32))
        bundle = simulate(
            m, report.phi, n_paths=n_paths, n_steps=n_steps, seed=path_seed
        )
        phi = report.phi[0]
        chars = m.characteristics
        continuous_variation = float(phi @ chars.covariance @ phi) * m.horizon
        u = bundle.events.size @ phi
        jumps = deflator.f_values[0][bundle.events.atom] - 1.0

        gaps = log_gap(jumps) - jump_lower_bound(jumps, delta)
        if gaps.size:
            worst = max(worst, float(np.max(-gaps)))

        boundaries = np.searchsorted(bundle.events.path, np.arange(1, n_paths))
        per_path = zip(np.split(jumps, boundaries), np.split(u, boundaries))
        for path_jumps, path_u in per_path:
            left, right = bracket_decomposition(
                continuous_variation, path_jumps, delta
            )
            worst = max(worst, left - right)
            left, right = relative_jump_decomposition(path_u, delta)
            worst = max(worst, left - right)
        total_paths += n_paths
        total_jumps += len(jumps)

    passed = worst <= 1e-12
    if not passed:
        logger.warning("path inequality violated by %.3g", worst)
    return OracleReport(
        passed=passed,
        n_cases=n_cases,
        n_paths=total_paths,
        n_jumps=total_jumps,
        worst=worst,
    )
