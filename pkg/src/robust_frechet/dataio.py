"""Dataset file formats and deterministic serialization helpers.

Covariates: one CSV row per observation, numeric columns, optional header.
Matrix responses: one CSV row per observation holding q*q values in
row-major order; symmetry is validated (and small asymmetries repaired) by
the matrix constructor. Distribution responses: the first data row is the
quantile-level grid, each following row one observation; monotonicity is
validated per row.

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly, so ``save_dataset`` followed by ``load_dataset``
reproduces a dataset bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import InvariantError, ParseError, ShapeError
from .metric import QuantileFunction, SymMatrix
from .regression import Dataset

FLOAT_FMT = "%.17g"


def fmt_float(x) -> str:
    return FLOAT_FMT % float(x)


def write_csv(path, header, rows) -> None:
    """Write rows with deterministic float formatting and \\n newlines."""
    def cell(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return fmt_float(v)
        return str(v)

    with open(path, "w", newline="") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(cell(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else fmt_float(v)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    return obj


def write_json(path, payload) -> None:
    """Deterministic JSON: sorted keys, fixed indentation, \\n newline.

    Non-finite floats are serialized as the strings "inf"/"-inf"/"nan"
    to keep the output standard JSON.
    """
    with open(path, "w", newline="") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_rows(path):
    """Parse a CSV into float rows, skipping an optional header line.

    Returns a list of (line_number, values). Raises :class:`ParseError`
    naming the line and column of the first bad cell.
    """
    path = Path(path)
    raw = []
    with open(path, "r", newline="") as fh:
        for lineno, cells in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in cells]
            if not cells or all(c == "" for c in cells):
                continue
            raw.append((lineno, cells))
    if not raw:
        raise ShapeError(f"{path}: file contains no data rows")

    def parse_row(lineno, cells):
        values = []
        for col, cell in enumerate(cells, start=1):
            try:
                values.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}, column {col}: cannot parse {cell!r} as a number"
                ) from None
        return values

    rows = []
    start = 0
    try:
        rows.append((raw[0][0], parse_row(*raw[0])))
        start = 1
    except ParseError:
        start = 1  # header line
        if len(raw) == 1:
            raise ShapeError(f"{path}: file contains a header but no data rows") from None
        rows = []
    for lineno, cells in raw[start:]:
        rows.append((lineno, parse_row(lineno, cells)))
    return rows


def _check_rectangular(path, rows):
    width = len(rows[0][1])
    for lineno, values in rows:
        if len(values) != width:
            raise ShapeError(
                f"{path}: line {lineno} has {len(values)} values, expected {width}"
            )
    return width


def load_covariates(path) -> np.ndarray:
    rows = _read_rows(path)
    _check_rectangular(path, rows)
    return np.array([values for _, values in rows], dtype=float)


def load_dataset(covariate_path, response_path, kind: str) -> Dataset:
    """Load paired covariate and response CSVs into a :class:`Dataset`."""
    covariates = load_covariates(covariate_path)
    rows = _read_rows(response_path)
    if kind == "matrix":
        width = _check_rectangular(response_path, rows)
        q = math.isqrt(width)
        if q * q != width:
            raise ShapeError(
                f"{response_path}: rows have {width} values, which is not a perfect square"
            )
        responses = []
        for lineno, values in rows:
            try:
                responses.append(SymMatrix(np.array(values).reshape(q, q)))
            except InvariantError as exc:
                raise InvariantError(f"{response_path}: line {lineno}: {exc}") from None
    elif kind == "distribution":
        grid_line, grid = rows[0]
        if len(rows) < 2:
            raise ShapeError(f"{response_path}: need a grid row plus observation rows")
        grid_arr = np.array(grid, dtype=float)
        if grid_arr.size < 2 or grid_arr[0] <= 0.0 or grid_arr[-1] >= 1.0 \
                or np.any(np.diff(grid_arr) <= 0.0):
            raise InvariantError(
                f"{response_path}: line {grid_line}: grid must be strictly increasing within (0, 1)"
            )
        responses = []
        for lineno, values in rows[1:]:
            if len(values) != grid_arr.size:
                raise ShapeError(
                    f"{response_path}: line {lineno} has {len(values)} values, "
                    f"grid has {grid_arr.size}"
                )
            try:
                responses.append(QuantileFunction(grid_arr, np.array(values)))
            except InvariantError as exc:
                raise InvariantError(f"{response_path}: line {lineno}: {exc}") from None
    else:
        raise ValueError(f"unknown response kind {kind!r}")
    if len(responses) != covariates.shape[0]:
        raise ShapeError(
            f"{covariate_path} has {covariates.shape[0]} observations but "
            f"{response_path} has {len(responses)}"
        )
    return Dataset(covariates, tuple(responses))


def save_dataset(data: Dataset, covariate_path, response_path) -> None:
    """Write a dataset back to the CSV formats read by :func:`load_dataset`."""
    write_csv(covariate_path, None, data.covariates)
    first = data.responses[0]
    if isinstance(first, SymMatrix):
        write_csv(response_path, None, (obj.values.reshape(-1) for obj in data.responses))
    else:
        rows = [first.grid]
        rows.extend(obj.values for obj in data.responses)
        write_csv(response_path, None, rows)
