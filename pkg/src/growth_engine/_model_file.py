"""Internal module for reading and writing JSON model files.

A model file looks like::

    {
      "dim": 1,
      "horizon": 1.0,
      "b": 0.1,
      "c": 0.0,
      "atoms": [{"x": 0.5, "w": 1.0}, {"x": -0.5, "w": 1.0}],
      "segments": [{"t": 0.5, "b": 0.2, "c": 0.01, "atoms": []}]
    }

Scalars stand for 1-vectors and 1×1 matrices. The top-level (b, c, atoms)
are active on [0, t₁); each segment takes over from its ``t``.
"""

from __future__ import annotations

import re
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field
from pydantic import ValidationError as PydanticValidationError

from growth_engine.exceptions import ModelFileError
from growth_engine.model import (
    Characteristics,
    JumpAtom,
    JumpMeasure,
    MarketModel,
    Matrix,
    SegmentSpec,
    Vector,
)

_POSITION = re.compile(r"line (\d+) column (\d+)")


class AtomEntry(BaseModel):
    """One ``{x, w}`` entry of an ``atoms`` list."""

    model_config = ConfigDict(extra="forbid")

    x: Vector
    w: float


class SegmentEntry(BaseModel):
    """One entry of the ``segments`` list."""

    model_config = ConfigDict(extra="forbid")

    t: float
    b: Vector
    c: Matrix
    atoms: list[AtomEntry] = Field(default_factory=list)


class ModelFile(BaseModel):
    """Schema of a model file."""

    model_config = ConfigDict(extra="forbid")

    dim: int = Field(ge=1)
    horizon: float
    b: Vector
    c: Matrix
    atoms: list[AtomEntry] = Field(default_factory=list)
    segments: list[SegmentEntry] = Field(default_factory=list)

    def to_model(self) -> MarketModel:
        """Build the in-memory model."""
        return MarketModel(
            dim=self.dim,
            horizon=self.horizon,
            characteristics=_characteristics(self.b, self.c, self.atoms),
            segments=tuple(
                SegmentSpec(t=s.t, characteristics=_characteristics(s.b, s.c, s.atoms))
                for s in self.segments
            ),
        )

    @classmethod
    def from_model(cls, m: MarketModel) -> ModelFile:
        """Inverse of ``to_model``."""

        def atoms(chars: Characteristics) -> list[AtomEntry]:
            return [AtomEntry(x=a.x, w=a.w) for a in chars.jumps.atoms]

        top = m.characteristics
        return cls(
            dim=m.dim,
            horizon=m.horizon,
            b=top.b,
            c=top.c,
            atoms=atoms(top),
            segments=[
                SegmentEntry(
                    t=s.t,
                    b=s.characteristics.b,
                    c=s.characteristics.c,
                    atoms=atoms(s.characteristics),
                )
                for s in m.segments
            ],
        )


def _characteristics(
    b: tuple[float, ...], c: tuple[tuple[float, ...], ...], atoms: list[AtomEntry]
) -> Characteristics:
    return Characteristics(
        b=b,
        c=c,
        jumps=JumpMeasure(atoms=tuple(JumpAtom(x=a.x, w=a.w) for a in atoms)),
    )


def parse_model(text: str, path: str = "<string>") -> MarketModel:
    """
    Parse a model document.

    Args:
        text: JSON text.
        path: Name used in error messages.

    Returns:
        The model (not yet semantically validated).

    Raises:
        ModelFileError: On JSON syntax or schema errors, with line and column
            for syntax errors.
    """
    try:
        document = ModelFile.model_validate_json(text)
    except PydanticValidationError as e:
        errors = e.errors()
        line = column = None
        for error in errors:
            if error["type"] == "json_invalid":
                match = _POSITION.search(str(error.get("ctx", {}).get("error", "")))
                if match:
                    line, column = int(match.group(1)), int(match.group(2))
                break
        if line is not None:
            message = "invalid JSON"
        else:
            message = "model file does not match the schema"
        raise ModelFileError(
            message, path, errors=errors, line=line, column=column
        ) from e
    return document.to_model()


def load_model(path: str | Path) -> MarketModel:
    """
    Read and parse a model file.

    Raises:
        ModelFileError: If the file cannot be read or parsed.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ModelFileError(f"cannot read model file: {e.strerror}", str(path)) from e
    return parse_model(text, str(path))


def dump_model(m: MarketModel) -> str:
    """Serialize a model to a model-file document."""
    return ModelFile.from_model(m).model_dump_json(indent=2)
