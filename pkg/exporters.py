"""Plain-text writers shared by the CLI and the HTTP layer.

Every number goes out with 17 significant digits and a '.' decimal point,
independent of locale, so identical invocations produce identical bytes.
"""
import io
import json
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def _render_json(value: Any) -> str:
    # json.dumps would pick the shortest repr; keep the 17-digit contract instead
    if isinstance(value, dict):
        items = [f"{json.dumps(str(k))}: {_render_json(v)}" for k, v in value.items()]
        return "{" + ", ".join(items) + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_render_json(v) for v in value) + "]"
    if isinstance(value, (bool, np.bool_)) or value is None:
        return json.dumps(bool(value) if value is not None else None)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return json.dumps(value)


def to_json(value: Any) -> str:
    return _render_json(value)


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, (float, np.floating)):
                cells.append(format_float(cell))
            else:
                cells.append(str(cell))
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def matrix_to_csv(matrix: np.ndarray) -> str:
    out = io.StringIO()
    for row in np.atleast_2d(matrix):
        out.write(",".join(format_float(v) for v in row) + "\n")
    return out.getvalue()


def matrix_to_coo(matrix: np.ndarray, threshold: float = 0.0) -> str:
    """Coordinate triples (row, col, value) for the structural nonzeros"""
    rows: List[List[Any]] = []
    matrix = np.atleast_2d(matrix)
    for i, j in zip(*np.nonzero(np.abs(matrix) > threshold)):
        rows.append([int(i), int(j), float(matrix[i, j])])
    return rows_to_csv(["row", "col", "value"], rows)


def table_rows(entries: Dict[tuple, float]) -> List[List[Any]]:
    return [list(index) + [float(value)] for index, value in sorted(entries.items())]
