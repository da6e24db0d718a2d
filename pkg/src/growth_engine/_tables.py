"""Internal module for machine-readable tables and atomic file output."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

FLOAT_FORMAT = "%.17g"


def format_cell(value: Any) -> str:
    """
    Render one table cell.

    Floats use 17 significant digits so they round-trip exactly; booleans
    are ``true``/``false``; non-finite floats are ``inf``, ``-inf`` or ``nan``.
    """
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return FLOAT_FORMAT % value
    if hasattr(value, "dtype"):
        return format_cell(value.item())
    return str(value)


def render_table(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Comma-separated table with a header row and ``\\n`` line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buffer.getvalue()


def atomic_write(path: str | Path, text: str) -> Path:
    """
    Write ``text`` to ``path`` through a temporary file and a rename.

    The temporary file lives in the target directory so the rename never
    crosses file systems.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, temporary = tempfile.mkstemp(
        dir=target.parent, prefix=f".{target.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(temporary, target)
    except BaseException:
        Path(temporary).unlink(missing_ok=True)
        raise
    return target


def write_table(
    path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    """Render and atomically write a table."""
    return atomic_write(path, render_table(header, rows))


def write_text(path: str | Path, lines: Iterable[str]) -> Path:
    """Atomically write a text report, one line per entry."""
    return atomic_write(path, "".join(f"{line}\n" for line in lines))
