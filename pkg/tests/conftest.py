"""Shared models and fixture paths."""

from pathlib import Path

import pytest

from growth_engine import (
    Characteristics,
    JumpAtom,
    JumpMeasure,
    MarketModel,
    load_model,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

TWO_ATOM_U = (-1.0 + 1.04**0.5) / 0.2
TWO_ATOM_PHI = 2.0 * TWO_ATOM_U


def constant_model(
    b: float | list[float],
    c: float | list[list[float]],
    atoms: tuple[tuple[float | list[float], float], ...] = (),
    dim: int = 1,
    horizon: float = 1.0,
) -> MarketModel:
    """Build a constant-characteristics model from plain values."""
    return MarketModel(
        dim=dim,
        horizon=horizon,
        characteristics=Characteristics(
            b=b,
            c=c,
            jumps=JumpMeasure(atoms=tuple(JumpAtom(x=x, w=w) for x, w in atoms)),
        ),
    )


@pytest.fixture
def merton() -> MarketModel:
    """Diffusive model with b = 0.08, c = 0.04."""
    return constant_model(0.08, 0.04)


@pytest.fixture
def one_atom() -> MarketModel:
    """Pure-jump model with a single atom at −0.5."""
    return constant_model(0.0, 0.0, ((-0.5, 1.0),))


@pytest.fixture
def two_atom() -> MarketModel:
    """Pure-jump model with atoms ±0.5 and drift 0.1."""
    return constant_model(0.1, 0.0, ((0.5, 1.0), (-0.5, 1.0)))


@pytest.fixture
def free_lunch() -> MarketModel:
    """Model whose log-growth objective is unbounded below along λ → +∞."""
    return constant_model(1.0, 0.0, ((0.5, 1.0),))


@pytest.fixture
def jump_diffusion() -> MarketModel:
    """Two-asset model with a diffusion and two jump atoms."""
    return constant_model(
        [0.05, 0.03],
        [[0.04, 0.01], [0.01, 0.09]],
        (([-0.3, 0.0], 0.5), ([0.2, -0.2], 0.8)),
        dim=2,
    )


@pytest.fixture
def fixtures_dir() -> Path:
    """Directory of the checked-in model files."""
    return FIXTURES


@pytest.fixture
def regime_switch() -> MarketModel:
    """Two-asset model whose atoms change at t = 0.5."""
    return load_model(FIXTURES / "regime_switch.json")
