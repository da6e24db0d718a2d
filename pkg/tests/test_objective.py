"""Tests for the log-growth objective and its smoothed family."""

import math

import numpy as np
import pytest

from growth_engine import MarketModel, eval_L, eval_L_delta
from growth_engine.model import admissible_domain
from growth_engine.objective import (
    check_convexity_sample,
    f_delta,
    segment_fractions,
)
from tests.conftest import constant_model

FD_STEP = 1e-5


def _interior_points(m: MarketModel, n: int, seed: int) -> list[np.ndarray]:
    domain = admissible_domain(m)
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < n:
        candidate = rng.normal(scale=0.8, size=m.dim)
        slack = domain.slack(candidate)
        if not slack.size or np.min(slack) > 0.05:
            points.append(candidate)
    return points


class TestEvalL:
    """Tests for eval_L."""

    def test_zero_model(self) -> None:
        """Test that b = c = 0 without atoms gives L ≡ 0."""
        evaluation = eval_L(constant_model(0.0, 0.0), [3.0])

        assert evaluation.value == 0.0
        np.testing.assert_array_equal(evaluation.gradient, [0.0])

    def test_merton_minimum(self, merton: MarketModel) -> None:
        """Test L(2) = −0.08 with zero gradient on the Merton model."""
        evaluation = eval_L(merton, [2.0])

        assert evaluation.value == pytest.approx(-0.08, abs=1e-15)
        assert evaluation.gradient is not None
        assert abs(evaluation.gradient[0]) < 1e-15

    def test_boundary_is_infinite(self, one_atom: MarketModel) -> None:
        """Test that 1 + λx = 0 gives +∞ without derivatives."""
        evaluation = eval_L(one_atom, [2.0])

        assert evaluation.value == math.inf
        assert evaluation.finite is False
        assert evaluation.gradient is None
        assert evaluation.hessian is None

    def test_origin_is_zero(self, jump_diffusion: MarketModel) -> None:
        """Test L(0) = 0 for every model."""
        assert eval_L(jump_diffusion, [0.0, 0.0]).value == 0.0

    def test_shape_mismatch(self, merton: MarketModel) -> None:
        """Test that λ of the wrong dimension raises."""
        with pytest.raises(ValueError, match="shape"):
            eval_L(merton, [1.0, 2.0])

    @pytest.mark.parametrize("fixture", ["two_atom", "jump_diffusion", "merton"])
    def test_gradient_matches_finite_differences(
        self, fixture: str, request: pytest.FixtureRequest
    ) -> None:
        """Test the gradient against central differences at interior points."""
        m: MarketModel = request.getfixturevalue(fixture)
        for point in _interior_points(m, 100, seed=1):
            gradient = eval_L(m, point).gradient
            assert gradient is not None
            numeric = np.array(
                [
                    (
                        eval_L(m, point + FD_STEP * e).value
                        - eval_L(m, point - FD_STEP * e).value
                    )
                    / (2 * FD_STEP)
                    for e in np.eye(m.dim)
                ]
            )
            scale = max(1.0, float(np.linalg.norm(gradient)))
            assert np.linalg.norm(numeric - gradient) <= 1e-6 * scale

    @pytest.mark.parametrize("fixture", ["two_atom", "jump_diffusion"])
    def test_hessian_matches_finite_differences(
        self, fixture: str, request: pytest.FixtureRequest
    ) -> None:
        """Test the Hessian against differenced gradients."""
        m: MarketModel = request.getfixturevalue(fixture)
        for point in _interior_points(m, 100, seed=2):
            hessian = eval_L(m, point).hessian
            assert hessian is not None
            columns = []
            for e in np.eye(m.dim):
                up = eval_L(m, point + FD_STEP * e).gradient
                down = eval_L(m, point - FD_STEP * e).gradient
                assert up is not None and down is not None
                columns.append((up - down) / (2 * FD_STEP))
            numeric = np.column_stack(columns)
            scale = max(1.0, float(np.linalg.norm(hessian)))
            assert np.linalg.norm(numeric - hessian) <= 1e-4 * scale

    def test_hessian_is_psd(self, jump_diffusion: MarketModel) -> None:
        """Test that the Hessian is symmetric positive semidefinite."""
        for point in _interior_points(jump_diffusion, 20, seed=3):
            hessian = eval_L(jump_diffusion, point).hessian
            assert hessian is not None
            np.testing.assert_array_equal(hessian, hessian.T)
            assert np.min(np.linalg.eigvalsh(hessian)) >= -1e-12


class TestEvalLDelta:
    """Tests for eval_L_delta and f_delta."""

    def test_origin(self, two_atom: MarketModel) -> None:
        """Test L_δ(0) = 0."""
        assert eval_L_delta(two_atom, [0.0], 0.3).value == 0.0

    def test_value_on_the_kink(self, one_atom: MarketModel) -> None:
        """Test the hand-evaluated value at the boundary point λ = 2."""
        evaluation = eval_L_delta(one_atom, [2.0], 0.5)

        assert evaluation.value == pytest.approx(-0.5 + math.log(2.0), abs=1e-12)
        assert evaluation.value == pytest.approx(0.193147, abs=1e-6)
        assert evaluation.gradient is None

    def test_finite_outside_the_domain(self, one_atom: MarketModel) -> None:
        """Test that L_δ stays finite where L is +∞."""
        assert math.isfinite(eval_L_delta(one_atom, [10.0], 0.9).value)

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.5, 1.5])
    def test_delta_out_of_range(self, merton: MarketModel, delta: float) -> None:
        """Test that δ outside (0, 1) raises."""
        with pytest.raises(ValueError, match="delta"):
            eval_L_delta(merton, [1.0], delta)

    def test_increases_toward_L_for_small_atoms(self, two_atom: MarketModel) -> None:
        """Test monotone convergence of L_δ to L when every |x| ≤ 1."""
        point = [0.5]
        values = [eval_L_delta(two_atom, point, d).value for d in (0.9, 0.99, 0.999)]
        exact = eval_L(two_atom, point).value

        assert values[0] < values[1] < values[2]
        assert abs(values[2] - exact) < abs(values[0] - exact)

    def test_gradient_matches_finite_differences(
        self, jump_diffusion: MarketModel
    ) -> None:
        """Test the smoothed gradient against central differences."""
        rng = np.random.default_rng(4)
        for point in rng.normal(scale=2.0, size=(50, 2)):
            evaluation = eval_L_delta(jump_diffusion, point, 0.7)
            assert evaluation.gradient is not None
            numeric = np.array(
                [
                    (
                        eval_L_delta(jump_diffusion, point + FD_STEP * e, 0.7).value
                        - eval_L_delta(jump_diffusion, point - FD_STEP * e, 0.7).value
                    )
                    / (2 * FD_STEP)
                    for e in np.eye(2)
                ]
            )
            assert np.linalg.norm(numeric - evaluation.gradient) <= 1e-6 * max(
                1.0, float(np.linalg.norm(evaluation.gradient))
            )

    def test_f_delta_vectorized(self) -> None:
        """Test f_δ on a stack of atoms."""
        values = f_delta([2.0], [[-0.5], [0.5]], 0.5)

        assert values[0] == pytest.approx(-0.5 + math.log(2.0))
        assert values[1] == pytest.approx(0.5 - math.log(1.5))


class TestConvexity:
    """Tests for check_convexity_sample."""

    @pytest.mark.parametrize("fixture", ["merton", "two_atom", "jump_diffusion"])
    def test_passes(self, fixture: str, request: pytest.FixtureRequest) -> None:
        """Test that sampled midpoint convexity holds."""
        report = check_convexity_sample(request.getfixturevalue(fixture), 7, 1000)

        assert report.passed is True
        assert report.n_samples == 1000
        assert report.n_finite_pairs > 0

    def test_straddling_pairs_pass(self, one_atom: MarketModel) -> None:
        """Test pairs with one endpoint beyond λ = 2 under extended-real rules."""
        report = check_convexity_sample(one_atom, 3, 500)

        assert report.passed is True
        assert report.n_straddling_pairs > 0
        assert report.n_finite_pairs + report.n_straddling_pairs <= 500

    def test_straddling_midpoint_inside_domain(self, one_atom: MarketModel) -> None:
        """Test that a finite midpoint lies below an infinite endpoint average."""
        inside, outside = np.array([1.0]), np.array([2.5])
        middle = eval_L(one_atom, 0.5 * (inside + outside)).value

        assert math.isfinite(middle)
        assert eval_L(one_atom, outside).value == math.inf
        assert middle <= 0.5 * eval_L(one_atom, inside).value + 0.5 * math.inf

    def test_merton_has_no_straddling_pairs(self, merton: MarketModel) -> None:
        """Test that an unconstrained domain never straddles."""
        report = check_convexity_sample(merton, 7, 200)

        assert report.n_straddling_pairs == 0
        assert report.n_finite_pairs == 200


class TestSegmentFractions:
    """Tests for segment_fractions."""

    def test_broadcast(self, merton: MarketModel) -> None:
        """Test that one vector applies to every segment."""
        fractions = segment_fractions(merton, 2.0)
        assert [f.tolist() for f in fractions] == [[2.0]]

    def test_count_mismatch(self, merton: MarketModel) -> None:
        """Test that a wrong number of per-segment vectors raises."""
        with pytest.raises(ValueError, match="expected 1"):
            segment_fractions(merton, [[1.0], [2.0]])
