"""Tests for path simulation and stochastic exponentials."""

import math

import numpy as np
import pytest

from growth_engine import (
    Characteristics,
    DomainViolationError,
    MarketModel,
    SegmentSpec,
    simulate,
    simulate_summary,
)
from growth_engine.simulation import (
    Moments,
    build_grid,
    compensated_drift,
    covariance_root,
    default_steps,
    iter_path_blocks,
    log_exponential,
    reduce_moments,
    wealth_coefficients,
)


@pytest.fixture
def switching() -> MarketModel:
    """Model with a break at t = 0.3."""
    return MarketModel(
        dim=1,
        horizon=1.0,
        characteristics=Characteristics(b=0.08, c=0.04),
        segments=(SegmentSpec(t=0.3, characteristics=Characteristics(b=0.0, c=0.09)),),
    )


class TestGrid:
    """Tests for build_grid."""

    def test_default_steps(self, merton: MarketModel) -> None:
        """Test 250 steps per unit time."""
        assert default_steps(merton) == 250
        assert build_grid(merton).n_steps == 250

    def test_breaks_are_grid_points(self, switching: MarketModel) -> None:
        """Test that segment breaks are inserted into the uniform grid."""
        grid = build_grid(switching, 4)

        np.testing.assert_allclose(grid.points, [0.0, 0.25, 0.3, 0.5, 0.75, 1.0])
        assert grid.segment_index.tolist() == [0, 0, 1, 1, 1]

    def test_non_positive_steps(self, merton: MarketModel) -> None:
        """Test that zero steps raise."""
        with pytest.raises(ValueError, match="positive"):
            build_grid(merton, 0)


class TestHelpers:
    """Tests for the coefficient helpers."""

    def test_covariance_root(self) -> None:
        """Test that the root squares back to c."""
        c = np.array([[0.04, 0.01], [0.01, 0.09]])
        root = covariance_root(c)
        np.testing.assert_allclose(root @ root, c, atol=1e-15)

    def test_compensated_drift(self, two_atom: MarketModel) -> None:
        """Test b − Σ w h(x) for the symmetric two-atom model."""
        np.testing.assert_allclose(compensated_drift(two_atom.characteristics), [0.1])

    def test_wealth_coefficients(self, merton: MarketModel) -> None:
        """Test rate φb − ½φ²c for Merton at φ = 2."""
        coefficients = wealth_coefficients(merton, 2.0)

        assert coefficients.rate[0] == pytest.approx(0.08)
        np.testing.assert_array_equal(coefficients.continuous, [[2.0]])

    def test_moments_merge(self) -> None:
        """Test that merged block sums equal sums over all values."""
        values = np.arange(10.0)[:, None]
        merged = reduce_moments([Moments.of(values[:4]), Moments.of(values[4:])])

        assert merged.mean[0] == pytest.approx(4.5)
        assert merged.se[0] == pytest.approx(np.std(values, ddof=1) / math.sqrt(10))

    def test_single_value_has_infinite_se(self) -> None:
        """Test that one path has no standard error."""
        assert Moments.of(np.ones((1, 2))).se.tolist() == [math.inf, math.inf]


class TestSampling:
    """Tests for block sampling."""

    def test_jump_counts(self, two_atom: MarketModel) -> None:
        """Test the mean jump count Λ·T = 2."""
        grid, block = next(iter_path_blocks(two_atom, 4000, n_steps=20, seed=1))

        assert grid.n_steps == 20
        per_path = len(block.events) / block.n_paths
        assert per_path == pytest.approx(2.0, abs=4 * math.sqrt(2.0 / 4000))

    def test_events_sorted(self, two_atom: MarketModel) -> None:
        """Test that events are ordered by path, then time."""
        _, block = next(iter_path_blocks(two_atom, 200, n_steps=10, seed=2))
        keys = list(zip(block.events.path.tolist(), block.events.time.tolist()))

        assert keys == sorted(keys)

    def test_event_times_inside_steps(self, two_atom: MarketModel) -> None:
        """Test that each jump time lies in its step."""
        grid, block = next(iter_path_blocks(two_atom, 200, n_steps=10, seed=3))
        events = block.events

        assert np.all(events.time >= grid.points[events.step])
        assert np.all(events.time <= grid.points[events.step + 1])

    def test_no_atoms_no_events(self, merton: MarketModel) -> None:
        """Test that a diffusive model draws no jumps."""
        _, block = next(iter_path_blocks(merton, 50, n_steps=5))
        assert len(block.events) == 0

    def test_domain_violation(self, one_atom: MarketModel) -> None:
        """Test that a jump with 1 + φx ≤ 0 raises."""
        grid, block = next(iter_path_blocks(one_atom, 100, n_steps=5))
        with pytest.raises(DomainViolationError):
            log_exponential(block, grid, wealth_coefficients(one_atom, 3.0))


class TestSimulate:
    """Tests for simulate and simulate_summary."""

    def test_merton_log_wealth_moments(self, merton: MarketModel) -> None:
        """Test mean 0.08 and variance 0.16 of ln W_T at φ = 2."""
        bundle = simulate(merton, 2.0, n_paths=20_000, n_steps=10, seed=5)
        log_wealth = bundle.log_wealth_T
        se = math.sqrt(0.16 / 20_000)

        assert float(np.mean(log_wealth)) == pytest.approx(0.08, abs=3 * se)
        assert float(np.var(log_wealth)) == pytest.approx(0.16, rel=0.05)

    def test_shapes(self, two_atom: MarketModel) -> None:
        """Test the bundle array shapes."""
        bundle = simulate(two_atom, 0.2, n_paths=30, n_steps=8, block_size=16)

        assert bundle.wealth.shape == (30, 9)
        assert bundle.continuous.shape == (30, 8, 1)
        assert bundle.phi_steps.shape == (8, 1)
        assert bundle.deflator is None
        assert bundle.product is None
        np.testing.assert_array_equal(bundle.wealth[:, 0], 1.0)
        assert len(bundle.summary) == 9

    def test_global_path_indices(self, two_atom: MarketModel) -> None:
        """Test that events carry global path numbers across blocks."""
        bundle = simulate(two_atom, 0.2, n_paths=40, n_steps=4, block_size=16)
        assert int(bundle.events.path.max()) < 40
        assert int(bundle.events.path.max()) >= 16

    def test_reproducible(self, two_atom: MarketModel) -> None:
        """Test that the same seed yields the same paths."""
        first = simulate(two_atom, 0.2, n_paths=50, n_steps=4, seed=11)
        second = simulate(two_atom, 0.2, n_paths=50, n_steps=4, seed=11)
        np.testing.assert_array_equal(first.wealth, second.wealth)

    def test_workers_do_not_change_paths(self, two_atom: MarketModel) -> None:
        """Test that a process pool reproduces the sequential paths."""
        sequential = simulate(two_atom, 0.2, n_paths=64, n_steps=4, block_size=16)
        parallel = simulate(
            two_atom, 0.2, n_paths=64, n_steps=4, block_size=16, workers=2
        )
        np.testing.assert_array_equal(sequential.wealth, parallel.wealth)

    @pytest.mark.parametrize(
        ("fixture", "phi"),
        [
            ("merton", 2.0),
            ("jump_diffusion", [0.5, -0.5]),
            ("regime_switch", [0.5, -0.5]),
        ],
    )
    def test_refining_steps_keeps_terminal_values(
        self, fixture: str, phi: float | list[float], request: pytest.FixtureRequest
    ) -> None:
        """Test that doubling n_steps moves the terminal log-wealth mean by < 1 SE."""
        m: MarketModel = request.getfixturevalue(fixture)
        coarse = simulate(m, phi, n_paths=4000, n_steps=10, seed=8)
        fine = simulate(m, phi, n_paths=4000, n_steps=20, seed=8)
        se = float(np.std(coarse.log_wealth_T, ddof=1)) / math.sqrt(4000)

        shift = abs(float(np.mean(fine.log_wealth_T) - np.mean(coarse.log_wealth_T)))
        assert shift <= se
        np.testing.assert_allclose(
            fine.log_wealth_T, coarse.log_wealth_T, rtol=1e-9, atol=1e-12
        )

    def test_refined_grid_changes_interior_values(self, merton: MarketModel) -> None:
        """Test that the bridge still draws fresh values between segment ends."""
        coarse = simulate(merton, 2.0, n_paths=50, n_steps=2, seed=8)
        fine = simulate(merton, 2.0, n_paths=50, n_steps=4, seed=8)

        assert not np.allclose(coarse.wealth[:, 1], fine.wealth[:, 2])

    def test_jump_wealth_mean(self, two_atom: MarketModel) -> None:
        """Test E[W_T] = exp(φb) for compensated symmetric jumps."""
        rows = simulate_summary(
            two_atom, 1.0, cfg={"n_paths": 20_000, "n_steps": 10, "seed": 3}
        )
        last = rows[-1]

        assert last.mean_wealth == pytest.approx(math.exp(0.1), abs=4 * last.se_wealth)
        assert math.isnan(last.mean_deflator)

    def test_summary_matches_bundle(self, switching: MarketModel) -> None:
        """Test that the streaming summary equals the materialized one."""
        cfg = {"n_paths": 300, "n_steps": 6, "seed": 4, "block_size": 128}
        rows = simulate_summary(switching, 1.5, cfg=cfg)  # type: ignore[arg-type]
        bundle = simulate(
            switching, 1.5, n_paths=300, n_steps=6, seed=4, block_size=128
        )

        assert [r.mean_wealth for r in rows] == [r.mean_wealth for r in bundle.summary]
