"""CSV persistence for scalar fields.

Files start with a single header line::

    # minigraph-field v1, mesh=<box|polar>, dims=<n1>x<n2>

followed by a column line and one row per node ``i,j,x1,x2,value``.  Floats
are written with 17 significant digits, so a write/read round trip is exact.
"""

from __future__ import annotations

import io
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .fields import Mesh, ScalarField

__all__ = ["FieldFormatError", "FORMAT_VERSION", "write_field", "read_field", "format_field", "atomic_write"]

FORMAT_VERSION = "v1"
_HEADER = re.compile(r"^# minigraph-field (v\d+), mesh=(\w+), dims=(\d+)x(\d+)\s*$")
_COLUMNS = "i,j,x1,x2,value"


class FieldFormatError(ValueError):
    """A field file does not match the expected layout."""


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to a temporary sibling file, then rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_field(field: ScalarField) -> str:
    mesh = field.mesh
    buf = io.StringIO()
    buf.write(f"# minigraph-field {FORMAT_VERSION}, mesh={mesh.kind}, dims={mesh.header_dims()}\n")
    buf.write(_COLUMNS + "\n")
    x = mesh.coords()
    n1, n2 = mesh.shape
    for i in range(n1):
        for j in range(n2):
            buf.write(f"{i},{j},{x[i, j, 0]:.17g},{x[i, j, 1]:.17g},{field.values[i, j]:.17g}\n")
    return buf.getvalue()


def write_field(path: str | os.PathLike, field: ScalarField) -> None:
    atomic_write(path, format_field(field))


def _parse_header(line: str):
    m = _HEADER.match(line)
    if m is None:
        raise FieldFormatError(f"unrecognized header line: {line.strip()!r}")
    version, kind, n1, n2 = m.group(1), m.group(2), int(m.group(3)), int(m.group(4))
    if version == "v0":
        raise FieldFormatError(
            "field file is format v0; v0 stored values only, one row per node. "
            "Re-export it with this version, or prepend 'i,j,x1,x2' columns and "
            "change the header to 'v1' to migrate."
        )
    if version != FORMAT_VERSION:
        raise FieldFormatError(f"unsupported field format {version}; expected {FORMAT_VERSION}")
    if kind not in ("box", "polar"):
        raise FieldFormatError(f"unknown mesh type {kind!r}")
    return kind, n1, n2


def read_field(path: str | os.PathLike, mesh: Mesh | None = None) -> ScalarField:
    """Read a field; with ``mesh`` given, its type and dims must match the file."""
    with open(path) as fh:
        header = fh.readline()
        kind, n1, n2 = _parse_header(header)
        columns = fh.readline().strip()
        if columns != _COLUMNS:
            raise FieldFormatError(f"expected column line {_COLUMNS!r}, got {columns!r}")
        rows = [line for line in fh if line.strip()]
    if mesh is not None and (mesh.kind != kind or mesh.shape != (n1, n2)):
        raise FieldFormatError(
            f"file holds a {kind} field with dims {n1}x{n2}; expected {mesh.kind} {mesh.header_dims()}"
        )
    if len(rows) != n1 * n2:
        raise FieldFormatError(f"header promises {n1 * n2} rows, found {len(rows)}")
    data = np.loadtxt(rows, delimiter=",", dtype=float, ndmin=2)
    if data.shape[1] != 5:
        raise FieldFormatError("each row needs five columns")
    i, j = data[:, 0].astype(int), data[:, 1].astype(int)
    if np.any(i < 0) or np.any(i >= n1) or np.any(j < 0) or np.any(j >= n2):
        raise FieldFormatError("node index outside the declared dims")
    values = np.full((n1, n2), np.nan)
    x1 = np.full((n1, n2), np.nan)
    x2 = np.full((n1, n2), np.nan)
    values[i, j], x1[i, j], x2[i, j] = data[:, 4], data[:, 2], data[:, 3]
    if np.any(np.isnan(values)):
        raise FieldFormatError("some nodes are missing")
    if mesh is None:
        periodic = (False, kind == "polar")
        mesh = Mesh(kind, (x1[:, 0].copy(), x2[0, :].copy()), periodic)
    return ScalarField(mesh, values)
