"""Matrix Market reader (coordinate and array formats) plus plain vectors.

Implements the ASCII grammar directly so malformed input is reported
with the offending line number. Supported: real and integer fields with
general, symmetric, and skew-symmetric storage. Vectors are also
accepted as one-value-per-line text files.
"""

from __future__ import annotations

import numpy as np

__all__ = ["ParseError", "load_matrix_market", "load_vector"]

_FORMATS = {"coordinate", "array"}
_FIELDS = {"real", "integer"}
_SYMMETRIES = {"general", "symmetric", "skew-symmetric"}


class ParseError(ValueError):
    """Malformed input file; carries the path and 1-based line number."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = int(line_no)
        super().__init__(f"{path}:{line_no}: {message}")


def _parse_value(token: str, field: str, path, line_no: int) -> float:
    try:
        if field == "integer":
            return float(int(token))
        value = float(token)
    except ValueError:
        raise ParseError(path, line_no, f"invalid {field} value {token!r}") from None
    if not np.isfinite(value):
        raise ParseError(path, line_no, f"non-finite value {token!r}")
    return value


def _data_lines(lines):
    for idx, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        yield idx, text


def load_matrix_market(path) -> np.ndarray:
    """Read a Matrix Market file into a dense array.

    Symmetric (and skew-symmetric) storage holds the lower triangle
    only and is expanded to the full matrix here.
    """
    with open(path, "r", encoding="ascii") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise ParseError(path, 1, "empty file")
    header = lines[0].split()
    if len(header) != 5 or header[0] != "%%MatrixMarket":
        raise ParseError(path, 1, "expected header '%%MatrixMarket matrix <format> <field> <symmetry>'")
    _, obj, fmt, field, symmetry = (tok.lower() for tok in header)
    if obj != "matrix":
        raise ParseError(path, 1, f"unsupported object {header[1]!r}")
    if fmt not in _FORMATS:
        raise ParseError(path, 1, f"unsupported format {header[2]!r}")
    if field not in _FIELDS:
        raise ParseError(path, 1, f"unsupported field {header[3]!r}")
    if symmetry not in _SYMMETRIES:
        raise ParseError(path, 1, f"unsupported symmetry {header[4]!r}")

    data = _data_lines(lines)
    try:
        size_no, size_line = next(data)
    except StopIteration:
        raise ParseError(path, len(lines), "missing size line") from None

    tokens = size_line.split()
    if fmt == "coordinate":
        if len(tokens) != 3:
            raise ParseError(path, size_no, "coordinate size line must be 'rows cols nnz'")
        try:
            rows, cols, nnz = (int(t) for t in tokens)
        except ValueError:
            raise ParseError(path, size_no, "size line entries must be integers") from None
        if rows < 1 or cols < 1 or nnz < 0:
            raise ParseError(path, size_no, "invalid dimensions")
        if symmetry in ("symmetric", "skew-symmetric") and rows != cols:
            raise ParseError(path, size_no, f"{symmetry} storage requires a square matrix")
        mat = np.zeros((rows, cols))
        seen: set[tuple[int, int]] = set()
        count = 0
        for line_no, text in data:
            if count == nnz:
                raise ParseError(path, line_no, f"more than {nnz} entries")
            parts = text.split()
            if len(parts) != 3:
                raise ParseError(path, line_no, "entry must be 'row col value'")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(path, line_no, "entry indices must be integers") from None
            if not (1 <= i <= rows and 1 <= j <= cols):
                raise ParseError(path, line_no, f"index ({i}, {j}) out of bounds for {rows}x{cols}")
            if symmetry in ("symmetric", "skew-symmetric") and j > i:
                raise ParseError(path, line_no, f"{symmetry} storage requires entries on or below the diagonal")
            if symmetry == "skew-symmetric" and i == j:
                raise ParseError(path, line_no, "skew-symmetric storage has no diagonal entries")
            if (i, j) in seen:
                raise ParseError(path, line_no, f"duplicate entry ({i}, {j})")
            seen.add((i, j))
            value = _parse_value(parts[2], field, path, line_no)
            mat[i - 1, j - 1] = value
            if symmetry == "symmetric" and i != j:
                mat[j - 1, i - 1] = value
            elif symmetry == "skew-symmetric":
                mat[j - 1, i - 1] = -value
            count += 1
        if count != nnz:
            raise ParseError(path, len(lines), f"expected {nnz} entries, found {count}")
        return mat

    if len(tokens) != 2:
        raise ParseError(path, size_no, "array size line must be 'rows cols'")
    try:
        rows, cols = (int(t) for t in tokens)
    except ValueError:
        raise ParseError(path, size_no, "size line entries must be integers") from None
    if rows < 1 or cols < 1:
        raise ParseError(path, size_no, "invalid dimensions")
    if symmetry in ("symmetric", "skew-symmetric") and rows != cols:
        raise ParseError(path, size_no, f"{symmetry} storage requires a square matrix")
    if symmetry == "general":
        expected = rows * cols
        positions = [(i, j) for j in range(cols) for i in range(rows)]
    elif symmetry == "symmetric":
        expected = rows * (rows + 1) // 2
        positions = [(i, j) for j in range(cols) for i in range(j, rows)]
    else:
        expected = rows * (rows - 1) // 2
        positions = [(i, j) for j in range(cols) for i in range(j + 1, rows)]
    mat = np.zeros((rows, cols))
    count = 0
    for line_no, text in data:
        for token in text.split():
            if count == expected:
                raise ParseError(path, line_no, f"more than {expected} values")
            value = _parse_value(token, field, path, line_no)
            i, j = positions[count]
            mat[i, j] = value
            if symmetry == "symmetric" and i != j:
                mat[j, i] = value
            elif symmetry == "skew-symmetric":
                mat[j, i] = -value
            count += 1
    if count != expected:
        raise ParseError(path, len(lines), f"expected {expected} values, found {count}")
    return mat


def load_vector(path) -> np.ndarray:
    """Read a vector: Matrix Market with one unit dimension, or plain text.

    Plain text holds one value per line; blank lines and lines starting
    with '%' or '#' are skipped.
    """
    with open(path, "r", encoding="ascii") as handle:
        first = handle.readline()
    if first.startswith("%%MatrixMarket"):
        mat = load_matrix_market(path)
        if 1 not in mat.shape:
            raise ParseError(path, 1, f"expected a vector, got shape {mat.shape}")
        return mat.reshape(-1)
    values = []
    with open(path, "r", encoding="ascii") as handle:
        for line_no, raw in enumerate(handle, start=1):
            text = raw.strip()
            if not text or text.startswith(("%", "#")):
                continue
            parts = text.split()
            if len(parts) != 1:
                raise ParseError(path, line_no, "expected one value per line")
            values.append(_parse_value(parts[0], "real", path, line_no))
    if not values:
        raise ParseError(path, 1, "no values found")
    return np.asarray(values)
