"""Tests for the recession analysis."""

import math

import numpy as np
import pytest

from growth_engine import (
    DimensionError,
    MarketModel,
    analyze_recession,
    attainment_certificate,
    eval_L,
    recession_value,
)
from growth_engine.geometry import constancy_basis
from tests.conftest import constant_model


class TestRecessionValue:
    """Tests for recession_value."""

    def test_free_lunch_direction(self, free_lunch: MarketModel) -> None:
        """Test L0⁺(+1) = −1 + 0.5 on the free-lunch model."""
        assert recession_value(free_lunch, [1.0]) == pytest.approx(-0.5)

    def test_atom_on_negative_side(self, free_lunch: MarketModel) -> None:
        """Test that an atom in Γ⁻(y) makes L0⁺ infinite."""
        assert recession_value(free_lunch, [-1.0]) == math.inf

    def test_diffusion_is_infinite(self, merton: MarketModel) -> None:
        """Test that yᵀcy > 0 makes L0⁺ infinite."""
        assert recession_value(merton, [1.0]) == math.inf

    def test_direction_is_normalized(self, free_lunch: MarketModel) -> None:
        """Test that the length of y does not matter."""
        assert recession_value(free_lunch, [7.0]) == pytest.approx(-0.5)

    def test_zero_direction(self, merton: MarketModel) -> None:
        """Test that the zero vector raises."""
        with pytest.raises(ValueError, match="nonzero"):
            recession_value(merton, [0.0])


class TestAttainmentCertificate:
    """Tests for attainment_certificate."""

    @pytest.mark.parametrize("fixture", ["merton", "two_atom", "jump_diffusion"])
    def test_attained(self, fixture: str, request: pytest.FixtureRequest) -> None:
        """Test that well-posed models certify attainment."""
        report = attainment_certificate(request.getfixturevalue(fixture), seed=42)

        assert report.attained is True
        assert report.witness_direction is None
        assert report.n_candidates > 0

    def test_free_lunch_witness(self, free_lunch: MarketModel) -> None:
        """Test the witness y = +1 with value −0.5."""
        report = attainment_certificate(free_lunch, seed=42)

        assert report.attained is False
        assert report.witness_direction is not None
        np.testing.assert_allclose(report.witness_direction, [1.0], atol=1e-12)
        assert report.witness_value == pytest.approx(-0.5, abs=1e-6)

    def test_ray_decreases_linearly(self, free_lunch: MarketModel) -> None:
        """Test that L decreases by about 0.5α along the witness ray."""
        report = attainment_certificate(free_lunch, seed=42)
        assert report.witness_direction is not None

        assert report.ray_verified is True
        y = report.witness_direction
        drop = eval_L(free_lunch, 1e3 * y).value - eval_L(free_lunch, 1e2 * y).value
        assert drop == pytest.approx(-0.5 * 900, rel=0.01)

    def test_ray_values_recorded(self, free_lunch: MarketModel) -> None:
        """Test that ray values are reported at every scale."""
        report = attainment_certificate(free_lunch, seed=42)
        assert [alpha for alpha, _ in report.ray_values] == [1e2, 1e3, 1e4]

    def test_two_dimensional_free_lunch(self) -> None:
        """Test detection of a descent direction off the coordinate axes."""
        m = constant_model(
            [1.0, -1.0],
            [[1.0, 1.0], [1.0, 1.0]],
            (([0.5, -0.5], 1.0),),
            dim=2,
        )
        report = attainment_certificate(m, seed=3)

        assert report.attained is False
        assert report.witness_direction is not None
        assert recession_value(m, report.witness_direction) < 0

    def test_degenerate_constancy(self) -> None:
        """Test that b = c = 0 without atoms is attained with a full constancy space."""
        report = attainment_certificate(constant_model(0.0, 0.0), seed=1)

        assert report.attained is True
        assert report.rc_basis.shape == (1, 1)

    def test_deterministic(self, jump_diffusion: MarketModel) -> None:
        """Test that the result depends only on the seed."""
        first = attainment_certificate(jump_diffusion, seed=9)
        second = attainment_certificate(jump_diffusion, seed=9)

        assert first.n_candidates == second.n_candidates
        assert [d.value for d in first.diagnostics] == [
            d.value for d in second.diagnostics
        ]

    def test_dimension_limit(self) -> None:
        """Test that d > 4 raises."""
        m = constant_model([0.0] * 5, np.eye(5).tolist(), dim=5)
        with pytest.raises(DimensionError):
            attainment_certificate(m)

    def test_lines(self, free_lunch: MarketModel) -> None:
        """Test the human-readable rendering of a witness."""
        lines = attainment_certificate(free_lunch, seed=42).lines()

        assert lines[0] == "attained: False"
        assert any(line.startswith("witness: [1]") for line in lines)


class TestConstancyBasis:
    """Tests for constancy_basis."""

    def test_empty_for_merton(self, merton: MarketModel) -> None:
        """Test that a nonsingular c leaves no constancy direction."""
        assert constancy_basis(merton).shape == (0, 1)

    def test_redundant_asset(self) -> None:
        """Test that a duplicated asset yields one constancy direction."""
        m = constant_model([0.1, 0.1], [[0.04, 0.04], [0.04, 0.04]], dim=2)
        basis = constancy_basis(m)

        assert basis.shape == (1, 2)
        np.testing.assert_allclose(np.abs(basis[0]), [2**-0.5, 2**-0.5], atol=1e-12)


class TestAnalyzeRecession:
    """Tests for analyze_recession."""

    def test_one_report_per_piece(self, merton: MarketModel) -> None:
        """Test that a constant model yields one report."""
        reports = analyze_recession(merton, {"seed": 1})

        assert len(reports) == 1
        assert reports[0].attained is True
