"""Tests for deflator triplets, their validation and the optimal deflator."""

import math

import numpy as np
import pytest

from growth_engine import (
    MarketModel,
    UncertifiedReportError,
    build_deflator,
    naive_deflator,
    perturbed_deflators,
    solve,
    validate_deflator,
)
from growth_engine.deflator import (
    DeflatorParam,
    deflator_drift,
    deflator_log_value,
    support_value,
)
from growth_engine.simulation import wealth_coefficients
from tests.conftest import TWO_ATOM_U


class TestBuildDeflator:
    """Tests for build_deflator."""

    def test_merton_optimal_triplet(self, merton: MarketModel) -> None:
        """Test β = −2, v = 0 and E[−ln Z_T] = 0.08."""
        param, coefficients = build_deflator(merton, solve(merton))

        assert param.valid is True
        np.testing.assert_allclose(param.beta[0], [-2.0], atol=1e-8)
        assert param.v_drift[0] == pytest.approx(0.0, abs=1e-12)
        assert param.log_value == pytest.approx(0.08, abs=1e-10)
        assert coefficients.rate[0] == pytest.approx(-0.08, abs=1e-10)

    def test_inverse_of_wealth_coefficients(self, jump_diffusion: MarketModel) -> None:
        """Test that ln Z̃ = −ln E(φ̃·X) coefficient by coefficient."""
        report = solve(jump_diffusion)
        _, deflator = build_deflator(jump_diffusion, report)
        wealth = wealth_coefficients(jump_diffusion, report.phi)

        np.testing.assert_allclose(deflator.continuous, -wealth.continuous)
        np.testing.assert_allclose(deflator.rate, -wealth.rate, atol=1e-9)
        np.testing.assert_allclose(deflator.factors[0] * wealth.factors[0], 1.0)

    def test_two_atom_f_values(self, two_atom: MarketModel) -> None:
        """Test f = 1/(1 ± φ̃/2) on the atoms ±0.5."""
        param, _ = build_deflator(two_atom, solve(two_atom))

        np.testing.assert_allclose(
            param.f_values[0],
            [1.0 / (1.0 + TWO_ATOM_U), 1.0 / (1.0 - TWO_ATOM_U)],
            rtol=1e-6,
        )
        assert param.valid is True

    def test_log_value_equals_optimal_growth(self, jump_diffusion: MarketModel) -> None:
        """Test E[−ln Z̃_T] = −T·L(φ̃)."""
        report = solve(jump_diffusion)
        param, _ = build_deflator(jump_diffusion, report)
        assert param.log_value == pytest.approx(report.optimal_growth, abs=1e-9)

    def test_uncertified_report(self, merton: MarketModel) -> None:
        """Test that an uncertified report is refused."""
        report = solve(merton)
        report.segments[0].certified = False
        with pytest.raises(UncertifiedReportError):
            build_deflator(merton, report)


class TestValidateDeflator:
    """Tests for validate_deflator."""

    def test_naive_candidate_fails_on_drift(self, merton: MarketModel) -> None:
        """Test that Z ≡ 1 fails with sampled drift 0.16 at θ = 2."""
        p = naive_deflator(merton)
        result = validate_deflator(merton, p, probe_thetas=[[2.0]])

        assert result.valid is False
        assert p.valid is False
        assert result.segments[0].sampled_drift == pytest.approx(0.16)
        assert result.segments[0].support == math.inf
        assert result.log_value == 0.0

    def test_non_positive_f(self, two_atom: MarketModel) -> None:
        """Test that f ≤ 0 raises."""
        p = DeflatorParam(
            beta=[np.zeros(1)], f_values=[np.array([1.0, 0.0])], v_drift=[0.0]
        )
        with pytest.raises(ValueError, match="positive"):
            validate_deflator(two_atom, p)

    def test_wrong_segment_count(self, merton: MarketModel) -> None:
        """Test that a list length mismatch raises."""
        p = DeflatorParam(beta=[], f_values=[], v_drift=[])
        with pytest.raises(ValueError, match="segment entries"):
            validate_deflator(merton, p)

    def test_lines(self, merton: MarketModel) -> None:
        """Test the text rendering."""
        lines = validate_deflator(merton, naive_deflator(merton)).lines()
        assert lines[0] == "valid: False"


class TestSupportValue:
    """Tests for the exact support program."""

    def test_bounded_domain(self, two_atom: MarketModel) -> None:
        """Test sup θg over [−2, 2] for g = 1."""
        value = support_value(two_atom.characteristics, np.array([1.0]))

        assert value == pytest.approx(2.0)

    def test_unbounded_direction(self, one_atom: MarketModel) -> None:
        """Test that an unbounded half-line gives +∞."""
        assert support_value(one_atom.characteristics, np.array([-1.0])) == math.inf

    def test_zero_drift(self, merton: MarketModel) -> None:
        """Test that g = 0 has support 0."""
        assert support_value(merton.characteristics, np.zeros(1)) == 0.0

    def test_optimal_drift_vanishes(self, two_atom: MarketModel) -> None:
        """Test that g ≈ 0 at the optimal triplet."""
        param, _ = build_deflator(two_atom, solve(two_atom))
        g = deflator_drift(two_atom.characteristics, param.beta[0], param.f_values[0])
        assert float(np.linalg.norm(g)) <= 1e-9


class TestPerturbedDeflators:
    """Tests for perturbed_deflators."""

    @pytest.mark.parametrize("fixture", ["merton", "two_atom", "jump_diffusion"])
    def test_valid_and_not_better(
        self, fixture: str, request: pytest.FixtureRequest
    ) -> None:
        """Test that every perturbed deflator is valid with log_value ≥ the optimum."""
        m: MarketModel = request.getfixturevalue(fixture)
        report = solve(m)
        param, _ = build_deflator(m, report)
        candidates = perturbed_deflators(m, param, n=10, seed=3)

        assert candidates
        for candidate in candidates:
            assert candidate.valid is True
            assert candidate.log_value >= report.optimal_growth - 1e-9
            assert deflator_log_value(m, candidate) == candidate.log_value
