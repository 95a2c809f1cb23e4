"""CSV readers for covariates and potential outcomes."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import RctError
from .estimation import PotentialOutcomes


class InputError(RctError, ValueError):
    """Malformed input file; the message names the file and row."""


def _rows(path: str | Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [(reader.line_num, r) for r in reader if any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    if header is None:
        raise InputError(f"{path}: empty file, expected a header row")
    return [h.strip() for h in header], rows


def _floats(path, line: int, cells: list[str], width: int) -> list[float]:
    if len(cells) != width:
        raise InputError(f"{path}: row {line} has {len(cells)} fields, expected {width}")
    out = []
    for c in cells:
        try:
            v = float(c)
        except ValueError:
            raise InputError(f"{path}: row {line}: {c.strip()!r} is not a number") from None
        if not math.isfinite(v):
            raise InputError(f"{path}: row {line}: {c.strip()!r} is not finite")
        out.append(v)
    return out


def read_covariates(path: str | Path) -> np.ndarray:
    """n x d matrix from a CSV with a header row and one unit per row."""
    header, rows = _rows(path)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.array([_floats(path, ln, r, len(header)) for ln, r in rows], dtype=float)


def read_outcomes(path: str | Path) -> PotentialOutcomes:
    """Potential outcomes from a CSV with columns ``a`` and ``b``."""
    header, rows = _rows(path)
    try:
        ia, ib = header.index("a"), header.index("b")
    except ValueError:
        raise InputError(f"{path}: header must contain columns 'a' and 'b', got {header}") from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    vals = np.array([_floats(path, ln, r, len(header)) for ln, r in rows])
    return PotentialOutcomes(vals[:, ia], vals[:, ib])


def write_assignments(z: np.ndarray, path: str | Path | None) -> str:
    text = "".join(",".join(str(int(v)) for v in row) + "\n" for row in np.atleast_2d(z))
    if path is not None:
        Path(path).write_text(text)
    return text
