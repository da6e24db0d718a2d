"""Tests for the segment solver and the quantities built on φ̃."""

import math

import numpy as np
import pytest

from growth_engine import (
    Characteristics,
    DomainViolationError,
    MarketModel,
    NonAttainmentError,
    SegmentSpec,
    condi11_evaluate,
    eval_L,
    solve,
    solve_segment,
    verify_first_order,
)
from growth_engine.objective import eval_L_delta
from growth_engine.solver import (
    ensure_feasible,
    fraction_to_holdings,
    positive_expressions,
    product_growth_rate,
    smoothed_minimizer,
    v_drift_rate,
    v_drift_split,
)
from growth_engine.types import CertificateMode
from tests.conftest import TWO_ATOM_PHI, constant_model


class TestSolveSegment:
    """Tests for solve_segment."""

    def test_merton_closed_form(self, merton: MarketModel) -> None:
        """Test φ̃ = c⁻¹b = 2 with L(φ̃) = −0.08."""
        solution = solve_segment(merton)

        assert solution.phi[0] == pytest.approx(2.0, abs=1e-8)
        assert solution.value == pytest.approx(-0.08, abs=1e-10)
        assert solution.mode is CertificateMode.GRADIENT
        assert solution.certified is True
        assert solution.delta_ladder == []

    def test_merton_grid_oracle(self, merton: MarketModel) -> None:
        """Test the solution against a grid search over [−10, 10]."""
        grid = np.arange(-10.0, 10.0, 1e-4)
        values = -0.08 * grid + 0.02 * grid**2
        best = grid[np.argmin(values)]

        assert solve_segment(merton).phi[0] == pytest.approx(best, abs=1e-4)

    def test_two_atom_root(self, two_atom: MarketModel) -> None:
        """Test the pure-jump model against the scalar root."""
        solution = solve_segment(two_atom)

        assert solution.phi[0] == pytest.approx(TWO_ATOM_PHI, abs=1e-6)
        assert solution.kkt_residual <= 1e-8
        assert solution.value < 0

    def test_one_atom_optimum_at_origin(self, one_atom: MarketModel) -> None:
        """Test that b = 0 with one compensated atom gives φ̃ = 0."""
        solution = solve_segment(one_atom)

        assert solution.phi[0] == pytest.approx(0.0, abs=1e-10)
        assert solution.value == pytest.approx(0.0, abs=1e-12)

    def test_value_is_not_positive(self, jump_diffusion: MarketModel) -> None:
        """Test that L(φ̃) ≤ L(0) = 0."""
        solution = solve_segment(jump_diffusion)

        assert solution.value <= 0.0
        assert solution.grad_norm <= 1e-10 * jump_diffusion.characteristics.magnitude
        assert solution.min_slack > 0

    @pytest.mark.parametrize("start", [[-1.5], [-0.5], [0.0], [0.9], [1.8]])
    def test_start_points_agree_one_dimension(
        self, two_atom: MarketModel, start: list[float]
    ) -> None:
        """Test that every feasible start reaches the same minimizer."""
        reference = solve_segment(two_atom).phi

        np.testing.assert_allclose(
            solve_segment(two_atom, start=start).phi, reference, atol=1e-8
        )

    @pytest.mark.parametrize(
        "start", [[0.0, 0.0], [1.0, 1.0], [-2.0, 2.0], [3.0, 0.0], [-1.0, -3.0]]
    )
    def test_start_points_agree_two_dimensions(
        self, jump_diffusion: MarketModel, start: list[float]
    ) -> None:
        """Test start-point independence with a diffusion and two atoms."""
        reference = solve_segment(jump_diffusion).phi

        np.testing.assert_allclose(
            solve_segment(jump_diffusion, start=start).phi, reference, atol=1e-8
        )

    def test_infeasible_start_raises(self, two_atom: MarketModel) -> None:
        """Test that a start outside the domain is rejected."""
        with pytest.raises(DomainViolationError):
            solve_segment(two_atom, start=[2.5])

    def test_free_lunch_raises(self, free_lunch: MarketModel) -> None:
        """Test that non-attainment raises with the witness direction."""
        with pytest.raises(NonAttainmentError) as info:
            solve_segment(free_lunch)

        np.testing.assert_allclose(info.value.direction, [1.0])
        assert info.value.recession_value == pytest.approx(-0.5)
        assert info.value.exit_code == 3

    def test_constancy_directions_projected_out(self) -> None:
        """Test that a redundant asset yields the minimum-norm optimum."""
        m = constant_model([0.08, 0.08], [[0.04, 0.04], [0.04, 0.04]], dim=2)
        solution = solve_segment(m)

        np.testing.assert_allclose(solution.phi, [1.0, 1.0], atol=1e-8)
        assert solution.rc_basis.shape == (1, 2)


class TestScaleCovariance:
    """Tests that multiplying (b, c, F) by κ > 0 leaves φ̃ unchanged."""

    @pytest.mark.parametrize("kappa", [1e-10, 1e-9, 1e-8, 1e-6, 1e-4, 1e-2, 1e3])
    def test_two_atom(self, two_atom: MarketModel, kappa: float) -> None:
        """Test φ̃ against the unscaled solve, with value and condi11 scaled by κ."""
        base = solve(two_atom)
        scaled = solve(two_atom.scaled(kappa))

        assert scaled.phi[0][0] == pytest.approx(TWO_ATOM_PHI, abs=1e-8)
        np.testing.assert_allclose(scaled.phi[0], base.phi[0], atol=1e-9)
        assert scaled.value == pytest.approx(kappa * base.value, rel=1e-8)
        assert scaled.condi11_value == pytest.approx(
            kappa * base.condi11_value, rel=1e-6
        )
        assert scaled.certified is True

    @pytest.mark.parametrize("kappa", [1e-10, 1e-5, 1e4])
    def test_jump_diffusion(self, jump_diffusion: MarketModel, kappa: float) -> None:
        """Test scale covariance with a diffusion and two atoms."""
        base = solve_segment(jump_diffusion)
        scaled = solve_segment(jump_diffusion.scaled(kappa))

        np.testing.assert_allclose(scaled.phi, base.phi, atol=1e-8)
        assert scaled.value == pytest.approx(kappa * base.value, rel=1e-8)

    def test_free_lunch_witness_survives_scaling(self, free_lunch: MarketModel) -> None:
        """Test that non-attainment is detected at any scale."""
        with pytest.raises(NonAttainmentError) as info:
            solve_segment(free_lunch.scaled(1e-10))

        np.testing.assert_allclose(info.value.direction, [1.0])
        assert info.value.recession_value == pytest.approx(-0.5e-10)


class TestSolve:
    """Tests for solve over piecewise models."""

    @pytest.fixture
    def switching(self) -> MarketModel:
        """Merton on [0, 0.5) and the two-atom model on [0.5, 1]."""
        return MarketModel(
            dim=1,
            horizon=1.0,
            characteristics=Characteristics(b=0.08, c=0.04),
            segments=(
                SegmentSpec(
                    t=0.5,
                    characteristics=constant_model(
                        0.1, 0.0, ((0.5, 1.0), (-0.5, 1.0))
                    ).characteristics,
                ),
            ),
        )

    def test_merton_report(self, merton: MarketModel) -> None:
        """Test the aggregated report on a constant model."""
        report = solve(merton)

        assert report.optimal_growth == pytest.approx(0.08, abs=1e-10)
        assert report.value == pytest.approx(-0.08, abs=1e-10)
        assert report.condi11_value == pytest.approx(0.08, abs=1e-10)
        assert report.certified is True
        assert report.horizon == 1.0

    def test_segments_in_order(self, switching: MarketModel) -> None:
        """Test one solution per piece with growth summed over durations."""
        report = solve(switching)

        assert [s.segment.index for s in report.segments] == [0, 1]
        assert report.phi[0][0] == pytest.approx(2.0, abs=1e-8)
        assert report.phi[1][0] == pytest.approx(TWO_ATOM_PHI, abs=1e-6)
        expected = -0.5 * (report.segments[0].value + report.segments[1].value)
        assert report.optimal_growth == pytest.approx(expected)

    def test_workers_do_not_change_results(self, switching: MarketModel) -> None:
        """Test that the thread pool collects results in segment order."""
        sequential = solve(switching, {"workers": 1})
        parallel = solve(switching, {"workers": 2})

        for a, b in zip(sequential.phi, parallel.phi):
            np.testing.assert_array_equal(a, b)

    def test_lines(self, merton: MarketModel) -> None:
        """Test the text rendering."""
        lines = solve(merton).lines()

        assert lines[0].startswith("optimal log-growth: ")
        assert any("gradient certificate" in line for line in lines)


class TestFirstOrder:
    """Tests for verify_first_order and product_growth_rate."""

    def test_optimum_has_zero_residual(self, merton: MarketModel) -> None:
        """Test that φ̃ = 2 leaves no first-order violation."""
        assert verify_first_order(merton, [2.0]) <= 1e-12

    def test_suboptimal_point(self, merton: MarketModel) -> None:
        """Test that φ = 1 is caught by the test point φ = 2."""
        assert verify_first_order(merton, [1.0]) >= 0.04 - 1e-12

    def test_two_atom_optimum(self, two_atom: MarketModel) -> None:
        """Test the residual at the pure-jump optimum."""
        phi = solve_segment(two_atom).phi
        assert verify_first_order(two_atom, phi) <= 1e-8

    def test_infeasible_phi(self, one_atom: MarketModel) -> None:
        """Test that an infeasible φ raises."""
        with pytest.raises(DomainViolationError) as info:
            verify_first_order(one_atom, [2.0])
        assert info.value.atom_index == 0

    def test_product_rate_vanishes_at_interior_optimum(
        self, jump_diffusion: MarketModel
    ) -> None:
        """Test κ = 0 when ∇L(φ̃) = 0."""
        phi = solve_segment(jump_diffusion).phi
        assert product_growth_rate(jump_diffusion, phi, [0.3, -0.2]) == pytest.approx(
            0.0, abs=1e-9
        )

    def test_product_rate_off_optimum(self, two_atom: MarketModel) -> None:
        """Test κ = φᵀ(b − Σw(h − x)) when the reference point is the origin."""
        assert product_growth_rate(two_atom, [0.0], [0.5]) == pytest.approx(0.05)
        assert product_growth_rate(two_atom, [0.0], [-0.5]) == pytest.approx(-0.05)


class TestDerivedQuantities:
    """Tests for the drift and integrability quantities."""

    def test_v_drift_zero_for_merton(self, merton: MarketModel) -> None:
        """Test that Ṽ has no drift at the interior optimum."""
        solution = solve_segment(merton)
        assert solution.v_drift == pytest.approx(0.0, abs=1e-12)

    def test_split_matches_direct_form(self) -> None:
        """Test the small/large jump split against the direct expression."""
        chars = constant_model(0.2, 0.01, ((0.5, 1.0), (2.0, 0.3))).characteristics
        for phi in (np.array([0.3]), np.array([-0.2]), np.array([1.1])):
            assert v_drift_split(chars, phi) == pytest.approx(v_drift_rate(chars, phi))

    def test_positive_expressions(self, jump_diffusion: MarketModel) -> None:
        """Test that both expressions are nonnegative at φ̃."""
        first, second = positive_expressions(
            jump_diffusion.characteristics, solve_segment(jump_diffusion).phi
        )
        assert first >= -1e-12
        assert second >= -1e-12

    def test_condi11_merton(self, merton: MarketModel) -> None:
        """Test the integrability value ½·4·0.04 at φ̃ = 2."""
        assert condi11_evaluate(merton, 2.0) == pytest.approx(0.08)

    def test_condi11_equals_optimal_growth(self, two_atom: MarketModel) -> None:
        """Test that the integrability value equals −T·L(φ̃) at the optimum."""
        report = solve(two_atom)
        assert report.condi11_value == pytest.approx(report.optimal_growth, abs=1e-9)

    def test_condi11_infeasible(self, one_atom: MarketModel) -> None:
        """Test that an infeasible φ raises."""
        with pytest.raises(DomainViolationError):
            condi11_evaluate(one_atom, 3.0)

    def test_ensure_feasible_accepts_interior(self, two_atom: MarketModel) -> None:
        """Test that interior points pass."""
        ensure_feasible(two_atom.characteristics, np.array([1.9]))


class TestSmoothing:
    """Tests for the δ continuation."""

    def test_smoothed_minimizers_converge(self, two_atom: MarketModel) -> None:
        """Test that L_δ minimizers approach φ̃ as δ → 1."""
        point = smoothed_minimizer(two_atom, 1.0 - 1e-6)
        assert abs(point[0] - TWO_ATOM_PHI) <= 1e-4

    def test_smoothed_value_below_exact(self, two_atom: MarketModel) -> None:
        """Test that min L_δ lies below min L for small atoms."""
        point = smoothed_minimizer(two_atom, 0.9)

        assert eval_L_delta(two_atom, point, 0.9).value <= eval_L(
            two_atom, [TWO_ATOM_PHI]
        ).value + 1e-12


class TestHoldings:
    """Tests for the fraction/holdings conversion."""

    def test_round_trip(self) -> None:
        """Test that fractions are recovered from holdings."""
        pair = fraction_to_holdings([[2.0]])
        phi_steps = np.array([[2.0], [2.0]])
        wealth_left = np.array([[1.0, 1.3], [1.0, 0.7]])
        holdings = pair.holdings(phi_steps, wealth_left)
        recovered = pair.fractions(holdings, wealth_left - 1.0)

        np.testing.assert_allclose(recovered, np.broadcast_to(phi_steps, (2, 2, 1)))
        assert math.isclose(float(holdings[0, 1, 0]), 2.6)
