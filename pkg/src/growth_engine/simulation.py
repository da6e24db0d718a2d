"""Monte Carlo paths of X and stochastic exponentials along them.

X is simulated from its canonical decomposition on a grid: per step the
continuous part is (b − Σ_{|x_i|≤1} w_i x_i)Δt + √c·ΔW. The jumps are an
exact compound-Poisson draw per segment (Poisson count, categorical atom,
uniform times) and ΔW bridges Brownian segment totals, so the grid decides
where values are recorded but not what they are at segment ends.
Stochastic exponentials E(Y) of processes Y that are linear in X on each
step are then exact in the log:

    ln E(Y) per step = βᵀΔXᶜ + r·Δt + Σ_{jumps in step} ln(1 + ΔY),

which holds for wealth E(φ·X), for deflators E(β·Xᶜ + (f−1)⋆(μ−ν))e^{−V}, and
for any composition of the two.

Paths come in blocks of ``block_size``; block j has its own counter-based
stream, so each path is the same whatever the worker count, and reductions
add per-block sums in block order.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any, TypeVar

import numpy as np
from scipy import linalg

from growth_engine import _rng
from growth_engine._defaults import STEPS_PER_UNIT_TIME, resolve_simulation_config
from growth_engine.config import SimulationConfig
from growth_engine.exceptions import DomainViolationError
from growth_engine.model import Characteristics, MarketModel, truncate
from growth_engine.objective import segment_fractions
from growth_engine.types import FloatArray, IntArray, VectorLike

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class TimeGrid:
    """
    Simulation grid 0 = t₀ < … < t_N = T.

    Attributes:
        points: Grid points, shape (N+1,).
        segment_index: Segment active on each step [t_k, t_{k+1}), shape (N,).
    """

    points: FloatArray
    segment_index: IntArray

    @property
    def dt(self) -> FloatArray:
        return np.diff(self.points)

    @property
    def n_steps(self) -> int:
        return len(self.points) - 1


def default_steps(m: MarketModel) -> int:
    """250 steps per unit of time, at least one."""
    return max(1, math.ceil(STEPS_PER_UNIT_TIME * m.horizon))


def build_grid(m: MarketModel, n_steps: int | None = None) -> TimeGrid:
    """
    Uniform grid with ``n_steps`` intervals on [0, T] plus every segment break.

    Raises:
        ValueError: If ``n_steps`` is not positive.
    """
    steps = default_steps(m) if n_steps is None else n_steps
    if steps <= 0:
        raise ValueError(f"n_steps must be positive, got {steps}")
    breaks = np.array([spec.t for spec in m.segments], dtype=float)
    points = np.unique(np.concatenate([np.linspace(0.0, m.horizon, steps + 1), breaks]))
    segment_index = np.searchsorted(breaks, points[:-1], side="right").astype(np.int64)
    return TimeGrid(points=points, segment_index=segment_index)


def covariance_root(c: FloatArray) -> FloatArray:
    """Symmetric square root of a PSD matrix, negative rounding clipped to 0."""
    eigenvalues, vectors = linalg.eigh(c)
    return (vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ vectors.T


def compensated_drift(chars: Characteristics) -> FloatArray:
    """b − Σ_{|x_i|≤1} w_i x_i: the drift of X between jumps."""
    sizes, weights = chars.support()
    return chars.drift - weights @ truncate(sizes) if len(sizes) else chars.drift


@dataclass(frozen=True)
class JumpEvents:
    """
    Jump events of a set of paths, sorted by path then time.

    ``atom`` indexes the positive-intensity atoms of the step's segment.
    """

    path: IntArray
    step: IntArray
    atom: IntArray
    time: FloatArray
    size: FloatArray

    def __len__(self) -> int:
        return len(self.path)


@dataclass(frozen=True)
class PathBlock:
    """
    One block of simulated paths.

    Attributes:
        index: Block number; fixes the random stream.
        first_path: Global index of the block's first path.
        n_paths: Paths in the block.
        continuous: Increments of the continuous martingale part Xᶜ,
            shape (n_paths, N, d).
        events: Jump events with block-local path indices.
    """

    index: int
    first_path: int
    n_paths: int
    continuous: FloatArray
    events: JumpEvents


def _bridge_increments(
    totals: FloatArray, grid: TimeGrid, durations: FloatArray, rng: np.random.Generator
) -> FloatArray:
    """
    Standard Brownian increments per step that add up to ``totals`` per segment.

    Independent N(0, Δt) draws are shifted by their share Δt/D of the gap to
    the segment total, which is the exact conditional law of the increments.
    """
    dt = grid.dt
    count, _, dim = totals.shape
    noise = rng.standard_normal((count, grid.n_steps, dim)) * np.sqrt(dt)[None, :, None]
    gaps = np.zeros_like(totals)
    np.add.at(gaps, (slice(None), grid.segment_index), noise)
    gaps = totals - gaps
    share = (dt / durations[grid.segment_index])[None, :, None]
    return noise + share * gaps[:, grid.segment_index, :]


def sample_block(
    m: MarketModel,
    grid: TimeGrid,
    seed: int,
    block_index: int,
    first_path: int,
    count: int,
) -> PathBlock:
    """
    Draw one block of paths from its own streams.

    Brownian segment totals and the jump events come first from the block's
    path stream and do not depend on the grid; the grid only fixes the
    bridge between them, drawn from a second stream. Refining the grid
    therefore leaves every terminal value unchanged.
    """
    rng = _rng.block_generator(seed, block_index)
    pieces = m.pieces()
    dim = m.dim
    starts = np.array([p.start for p in pieces])
    durations = np.array([p.duration for p in pieces])

    brownian = rng.standard_normal((count, len(pieces), dim))
    brownian *= np.sqrt(durations)[None, :, None]

    supports = [p.characteristics.support() for p in pieces]
    totals = np.array([float(np.sum(w)) for _, w in supports])
    counts = rng.poisson(totals * durations, size=(count, len(pieces)))
    flat = np.repeat(np.arange(count * len(pieces)), counts.ravel())
    path, event_segment = np.divmod(flat, len(pieces))
    n_events = len(flat)

    uniforms = rng.uniform(size=n_events)
    atom = np.zeros(n_events, dtype=np.int64)
    size = np.zeros((n_events, dim))
    for s, (sizes, weights) in enumerate(supports):
        here = event_segment == s
        if not np.any(here):
            continue
        cumulative = np.cumsum(weights) / totals[s]
        chosen = np.searchsorted(cumulative, uniforms[here], side="right")
        chosen = np.minimum(chosen, len(weights) - 1)
        atom[here] = chosen
        size[here] = sizes[chosen]
    offsets = rng.uniform(size=n_events)
    time = starts[event_segment] + offsets * durations[event_segment]

    segment_ids = np.arange(len(pieces))
    last_step = np.searchsorted(grid.segment_index, segment_ids, side="right") - 1
    step = np.searchsorted(grid.points, time, side="right") - 1
    step = np.minimum(step, last_step[event_segment])

    roots = np.array([covariance_root(p.characteristics.covariance) for p in pieces])
    increments = _bridge_increments(
        brownian, grid, durations, _rng.bridge_generator(seed, block_index)
    )
    continuous = np.einsum("kde,pke->pkd", roots[grid.segment_index], increments)

    order = np.lexsort((time, path))
    events = JumpEvents(
        path=path[order].astype(np.int64),
        step=step[order].astype(np.int64),
        atom=atom[order],
        time=time[order],
        size=size[order],
    )
    return PathBlock(
        index=block_index,
        first_path=first_path,
        n_paths=count,
        continuous=continuous,
        events=events,
    )


def iter_path_blocks(
    m: MarketModel,
    n_paths: int,
    n_steps: int | None = None,
    seed: int = 42,
    block_size: int = 2048,
) -> Iterator[tuple[TimeGrid, PathBlock]]:
    """Yield the grid with each path block, in block order."""
    grid = build_grid(m, n_steps)
    for j, start, count in _rng.path_blocks(n_paths, block_size):
        yield grid, sample_block(m, grid, seed, j, start, count)


@dataclass(frozen=True)
class ExponentialCoefficients:
    """
    Per-segment description of ln E(Y) for Y linear in X on each segment.

    Attributes:
        continuous: Loading of ΔXᶜ per segment, shape (S, d).
        rate: Drift of ln E(Y) between jumps per segment, shape (S,).
        factors: 1 + ΔY for each positive-intensity atom, one array per segment.
        label: Name used in error messages.
    """

    continuous: FloatArray
    rate: FloatArray
    factors: list[FloatArray]
    label: str = "exponential"


def wealth_coefficients(
    m: MarketModel, phi: VectorLike | Sequence[VectorLike]
) -> ExponentialCoefficients:
    """
    Coefficients of ln E(φ·X).

    Per segment: loading φ, rate φᵀ(b − Σ_{|x|≤1} w x) − ½φᵀcφ, and factors
    1 + φᵀx_i.
    """
    phis = segment_fractions(m, phi)
    rates, factors = [], []
    for piece, point in zip(m.pieces(), phis):
        chars = piece.characteristics
        sizes, _ = chars.support()
        rates.append(
            float(point @ compensated_drift(chars))
            - 0.5 * float(point @ chars.covariance @ point)
        )
        factors.append(1.0 + sizes @ point)
    return ExponentialCoefficients(
        continuous=np.array(phis), rate=np.array(rates), factors=factors, label="wealth"
    )


def log_exponential(
    block: PathBlock, grid: TimeGrid, coefficients: ExponentialCoefficients
) -> FloatArray:
    """
    ln E(Y) on the grid for every path of the block.

    Returns:
        Array of shape (n_paths, N+1) starting at 0.

    Raises:
        DomainViolationError: If a simulated jump has 1 + ΔY ≤ 0.
    """
    segment = grid.segment_index
    loading = coefficients.continuous[segment]
    increments = np.einsum("pkd,kd->pk", block.continuous, loading)
    increments += (coefficients.rate[segment] * grid.dt)[None, :]

    events = block.events
    if len(events):
        event_segment = segment[events.step]
        factor = np.empty(len(events))
        for s, values in enumerate(coefficients.factors):
            here = event_segment == s
            factor[here] = values[events.atom[here]]
        bad = np.flatnonzero(factor <= 0)
        if bad.size:
            i = int(bad[0])
            raise DomainViolationError(
                f"{coefficients.label} jump factor not positive on path "
                f"{block.first_path + int(events.path[i])}",
                atom_index=int(events.atom[i]),
                slack=float(factor[i]),
            )
        np.add.at(increments, (events.path, events.step), np.log(factor))

    out = np.zeros((block.n_paths, grid.n_steps + 1))
    np.cumsum(increments, axis=1, out=out[:, 1:])
    return out


@dataclass
class Moments:
    """Running sums for means and standard errors over paths."""

    count: int
    total: FloatArray
    squares: FloatArray

    @classmethod
    def of(cls, values: FloatArray) -> Moments:
        """Sums over the leading (path) axis."""
        return cls(
            count=int(values.shape[0]),
            total=np.sum(values, axis=0),
            squares=np.sum(values**2, axis=0),
        )

    def merge(self, other: Moments) -> Moments:
        return Moments(
            count=self.count + other.count,
            total=self.total + other.total,
            squares=self.squares + other.squares,
        )

    @property
    def mean(self) -> FloatArray:
        return self.total / self.count

    @property
    def se(self) -> FloatArray:
        """Standard error of the mean with the unbiased variance."""
        if self.count < 2:
            return np.full_like(self.mean, math.inf)
        variance = (self.squares - self.count * self.mean**2) / (self.count - 1)
        return np.sqrt(np.maximum(variance, 0.0) / self.count)


def reduce_moments(parts: Sequence[Moments]) -> Moments:
    """Add per-block moments in block order."""
    result = parts[0]
    for part in parts[1:]:
        result = result.merge(part)
    return result


def _run_block(
    task: Callable[[PathBlock, TimeGrid], T],
    m: MarketModel,
    grid: TimeGrid,
    seed: int,
    spec: tuple[int, int, int],
) -> T:
    j, start, count = spec
    return task(sample_block(m, grid, seed, j, start, count), grid)


def map_blocks(
    task: Callable[[PathBlock, TimeGrid], T],
    m: MarketModel,
    cfg: SimulationConfig | None = None,
) -> tuple[TimeGrid, list[T]]:
    """
    Apply ``task`` to every path block and return the results in block order.

    With ``workers > 1`` blocks run in a process pool; ``task`` must then be
    picklable (a module-level function or a ``functools.partial`` of one).
    """
    resolved = resolve_simulation_config(cfg)
    grid = build_grid(m, resolved["n_steps"])
    specs = _rng.path_blocks(resolved["n_paths"], resolved["block_size"])
    run = partial(_run_block, task, m, grid, resolved["seed"])
    if resolved["workers"] > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=resolved["workers"]) as pool:
            results = list(pool.map(run, specs))
    else:
        results = [run(spec) for spec in specs]
    return grid, results


@dataclass(frozen=True)
class SummaryRow:
    """Cross-sectional means and standard errors at one grid point."""

    t: float
    mean_wealth: float
    se_wealth: float
    mean_deflator: float
    se_deflator: float
    mean_product: float
    se_product: float


@dataclass
class PathBundle:
    """
    Simulated paths with wealth and, optionally, deflator values on the grid.

    Attributes:
        grid: Time grid.
        continuous: Increments of Xᶜ, shape (n_paths, N, d).
        drift: Drift of X between jumps on each step, shape (N, d).
        events: Jump events with global path indices.
        phi_steps: Fraction used on each step, shape (N, d).
        wealth: E(φ·X), shape (n_paths, N+1).
        deflator: Deflator values, same shape, or None.
        log_wealth_T: ln E(φ·X)_T per path.
        log_deflator_T: ln Z_T per path, or None.
        seed: Seed of the run.
        n_paths: Number of paths.
    """

    grid: TimeGrid
    continuous: FloatArray
    drift: FloatArray
    events: JumpEvents
    phi_steps: FloatArray
    wealth: FloatArray
    deflator: FloatArray | None
    log_wealth_T: FloatArray
    log_deflator_T: FloatArray | None
    seed: int
    n_paths: int
    summary: list[SummaryRow] = field(default_factory=list)

    @property
    def product(self) -> FloatArray | None:
        """Z·E(φ·X) on the grid."""
        if self.deflator is None:
            return None
        return self.wealth * self.deflator


def _block_paths(
    block: PathBlock,
    grid: TimeGrid,
    wealth: ExponentialCoefficients,
    deflator: ExponentialCoefficients | None,
) -> dict[str, Any]:
    log_wealth = log_exponential(block, grid, wealth)
    log_deflator = None if deflator is None else log_exponential(block, grid, deflator)
    return {"block": block, "log_wealth": log_wealth, "log_deflator": log_deflator}


def _summary_moments(
    block: PathBlock,
    grid: TimeGrid,
    wealth: ExponentialCoefficients,
    deflator: ExponentialCoefficients | None,
) -> tuple[Moments, Moments | None, Moments | None]:
    log_wealth = log_exponential(block, grid, wealth)
    if deflator is None:
        return Moments.of(np.exp(log_wealth)), None, None
    log_deflator = log_exponential(block, grid, deflator)
    return (
        Moments.of(np.exp(log_wealth)),
        Moments.of(np.exp(log_deflator)),
        Moments.of(np.exp(log_wealth + log_deflator)),
    )


def _rows(
    grid: TimeGrid, wealth: Moments, deflator: Moments | None, product: Moments | None
) -> list[SummaryRow]:
    nan = np.full(grid.n_steps + 1, math.nan)
    d_mean, d_se = (nan, nan) if deflator is None else (deflator.mean, deflator.se)
    p_mean, p_se = (nan, nan) if product is None else (product.mean, product.se)
    return [
        SummaryRow(
            t=float(grid.points[k]),
            mean_wealth=float(wealth.mean[k]),
            se_wealth=float(wealth.se[k]),
            mean_deflator=float(d_mean[k]),
            se_deflator=float(d_se[k]),
            mean_product=float(p_mean[k]),
            se_product=float(p_se[k]),
        )
        for k in range(grid.n_steps + 1)
    ]


def simulate_summary(
    m: MarketModel,
    phi: VectorLike | Sequence[VectorLike],
    deflator: ExponentialCoefficients | None = None,
    cfg: SimulationConfig | None = None,
) -> list[SummaryRow]:
    """
    Grid means and standard errors of wealth, deflator and their product.

    Nothing is kept per path, so path counts are limited only by time.
    """
    wealth_coeffs = wealth_coefficients(m, phi)
    task = partial(_summary_moments, wealth=wealth_coeffs, deflator=deflator)
    grid, parts = map_blocks(task, m, cfg)
    wealth = reduce_moments([p[0] for p in parts])
    if deflator is None:
        return _rows(grid, wealth, None, None)
    deflators = reduce_moments([p[1] for p in parts if p[1] is not None])
    products = reduce_moments([p[2] for p in parts if p[2] is not None])
    return _rows(grid, wealth, deflators, products)


def simulate(
    m: MarketModel,
    phi: VectorLike | Sequence[VectorLike],
    n_paths: int = 1000,
    n_steps: int | None = None,
    seed: int = 42,
    deflator: ExponentialCoefficients | None = None,
    block_size: int = 2048,
    workers: int = 1,
) -> PathBundle:
    """
    Simulate paths and materialize wealth (and a deflator) on the grid.

    Args:
        m: Market model.
        phi: Fraction, one vector or one per segment.
        n_paths: Number of paths.
        n_steps: Uniform steps on [0, T] (default 250 per unit time).
        seed: Seed of the path streams.
        deflator: Coefficients of a deflator to evaluate on the same paths.
        block_size: Paths per random stream.
        workers: Processes used for the blocks.

    Returns:
        The path bundle.

    Raises:
        DomainViolationError: If a simulated jump leaves the domain of φ.
    """
    cfg: SimulationConfig = {
        "n_paths": n_paths,
        "n_steps": n_steps,
        "seed": seed,
        "block_size": block_size,
        "workers": workers,
    }
    wealth_coeffs = wealth_coefficients(m, phi)
    task = partial(_block_paths, wealth=wealth_coeffs, deflator=deflator)
    grid, parts = map_blocks(task, m, cfg)

    blocks: list[PathBlock] = [p["block"] for p in parts]
    log_wealth = np.concatenate([p["log_wealth"] for p in parts])
    log_deflator = (
        None if deflator is None else np.concatenate([p["log_deflator"] for p in parts])
    )
    offsets = [b.first_path for b in blocks]
    events = JumpEvents(
        path=np.concatenate([b.events.path + o for b, o in zip(blocks, offsets)]),
        step=np.concatenate([b.events.step for b in blocks]),
        atom=np.concatenate([b.events.atom for b in blocks]),
        time=np.concatenate([b.events.time for b in blocks]),
        size=np.concatenate([b.events.size for b in blocks]),
    )
    pieces = m.pieces()
    drift = np.array([compensated_drift(p.characteristics) for p in pieces])
    phis = np.array(segment_fractions(m, phi))

    wealth_moments = reduce_moments(
        [Moments.of(np.exp(p["log_wealth"])) for p in parts]
    )
    if log_deflator is None:
        summary = _rows(grid, wealth_moments, None, None)
    else:
        summary = _rows(
            grid,
            wealth_moments,
            reduce_moments([Moments.of(np.exp(p["log_deflator"])) for p in parts]),
            reduce_moments(
                [Moments.of(np.exp(p["log_wealth"] + p["log_deflator"])) for p in parts]
            ),
        )

    logger.debug("simulated %d paths on %d steps", n_paths, grid.n_steps)
    return PathBundle(
        grid=grid,
        continuous=np.concatenate([b.continuous for b in blocks]),
        drift=drift[grid.segment_index],
        events=events,
        phi_steps=phis[grid.segment_index],
        wealth=np.exp(log_wealth),
        deflator=None if log_deflator is None else np.exp(log_deflator),
        log_wealth_T=log_wealth[:, -1],
        log_deflator_T=None if log_deflator is None else log_deflator[:, -1],
        seed=seed,
        n_paths=n_paths,
        summary=summary,
    )
