"""Persistence helpers: compact binary grids and exact-round-trip CSV.

Binary grid layout (all little-endian):

    bytes 0..3    magic  b"KCGB"
    bytes 4..5    uint16 format version (currently 1)
    bytes 6..7    uint16 reserved (zero)
    bytes 8..15   uint32 n_q, uint32 n_p
    bytes 16..47  float64 q_min, q_max, p_min, p_max
    bytes 48..    float64 values, row-major over p rows then q columns

Floats in CSV files are rendered with repr-faithful precision so that a
save/load round-trip is bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import SchemaError

__all__ = ["write_binary_grid", "read_binary_grid", "format_float"]

_MAGIC = b"KCGB"
_VERSION = 1
_HEADER = struct.Struct("<4sHHII4d")


def format_float(x: float) -> str:
    """Shortest decimal form that round-trips to the same float64."""
    return repr(float(x))


def write_binary_grid(path, q_axis, p_axis, values) -> None:
    """Write a rectangular field to the compact binary format."""
    q_axis = np.asarray(q_axis, dtype="<f8")
    p_axis = np.asarray(p_axis, dtype="<f8")
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.shape != (p_axis.size, q_axis.size):
        raise ValueError(
            f"values shape {values.shape} does not match axes "
            f"({p_axis.size}, {q_axis.size})"
        )
    header = _HEADER.pack(
        _MAGIC, _VERSION, 0, q_axis.size, p_axis.size,
        float(q_axis[0]), float(q_axis[-1]), float(p_axis[0]), float(p_axis[-1]),
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(values.tobytes())


def read_binary_grid(path):
    """Read a binary grid; returns (q_axis, p_axis, values).

    Any header inconsistency raises :class:`SchemaError` without returning
    partial data.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SchemaError(f"{path}: file shorter than the grid header")
    magic, version, _, n_q, n_p, q0, q1, p0, p1 = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise SchemaError(f"{path}: bad magic {magic!r}, not a binary grid")
    if version != _VERSION:
        raise SchemaError(
            f"{path}: grid format version {version} is not supported "
            f"(expected {_VERSION}); regenerate or migrate the file"
        )
    if n_q < 2 or n_p < 2 or n_q > 1_000_000 or n_p > 1_000_000:
        raise SchemaError(f"{path}: implausible grid dims ({n_q}, {n_p})")
    if not (q1 > q0 and p1 > p0):
        raise SchemaError(f"{path}: non-increasing grid bounds")
    expected = _HEADER.size + 8 * n_q * n_p
    if len(raw) != expected:
        raise SchemaError(
            f"{path}: payload size {len(raw)} does not match header "
            f"(expected {expected})"
        )
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n_p, n_q)
    return (
        np.linspace(q0, q1, n_q),
        np.linspace(p0, p1, n_p),
        values.copy(),
    )
