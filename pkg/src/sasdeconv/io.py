"""Deterministic CSV/raw-grid readers and writers plus the run manifest.

CSV floats are written with ``repr`` (shortest round-trip form) so reports
from identical configs and seeds are byte-identical.
"""

import json
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "InputFormatError",
    "format_value",
    "write_csv",
    "read_signal",
    "write_signal_csv",
    "write_matrix_csv",
    "read_raw_grid",
    "write_raw_grid",
    "write_manifest",
]

_RAW_MAGIC_BYTES = 8  # two little-endian int32 dimensions


class InputFormatError(ValueError):
    """Unreadable or ill-formed input; the message carries the position."""


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    """Write rows (sequences or dicts keyed by the header) as CSV."""
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        if isinstance(row, dict):
            row = [row[h] for h in header]
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_signal(path):
    """Read a 1D signal or 2D grid: CSV by default, ``.raw`` for binary."""
    path = Path(path)
    if not path.exists():
        raise InputFormatError(f"{path}: no such file")
    if path.suffix.lower() == ".raw":
        return read_raw_grid(path)
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise InputFormatError(
                    f"{path}:{lineno}: expected {width} columns, got {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise InputFormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise InputFormatError(f"{path}: file holds no data")
    data = np.asarray(rows, dtype=float)
    return data[:, 0] if data.shape[1] == 1 else data


def write_signal_csv(path, values):
    values = np.asarray(values, dtype=float).ravel()
    Path(path).write_text("\n".join(repr(float(v)) for v in values) + "\n")


def write_matrix_csv(path, values):
    values = np.asarray(values, dtype=float)
    lines = [",".join(repr(float(v)) for v in row) for row in np.atleast_2d(values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_raw_grid(path):
    """Binary grid: two little-endian int32 dims, then float64 LE row-major."""
    blob = Path(path).read_bytes()
    if len(blob) < _RAW_MAGIC_BYTES:
        raise InputFormatError(
            f"{path}: truncated header at byte {len(blob)} (need 8)")
    r, c = struct.unpack("<ii", blob[:_RAW_MAGIC_BYTES])
    if r <= 0 or c <= 0:
        raise InputFormatError(f"{path}: bad dimensions {r}x{c} in header")
    need = _RAW_MAGIC_BYTES + 8 * r * c
    if len(blob) != need:
        raise InputFormatError(
            f"{path}: expected {need} bytes for {r}x{c} grid, got {len(blob)}"
            f" (mismatch at byte {min(len(blob), need)})")
    data = np.frombuffer(blob, dtype="<f8", offset=_RAW_MAGIC_BYTES)
    return data.reshape(r, c).astype(float)


def write_raw_grid(path, values):
    values = np.ascontiguousarray(np.atleast_2d(values), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<ii", values.shape[0], values.shape[1]))
        fh.write(values.tobytes())


def write_manifest(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
