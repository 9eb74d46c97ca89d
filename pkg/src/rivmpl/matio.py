"""Matrix file ingestion for user-supplied data.

Two formats are supported:

* a binary format: 8-byte magic ``RVMPLMAT``, two little-endian uint64 values
  (rows, cols), then rows*cols little-endian float64 entries in row-major
  order;
* plain-text CSV, comma separated, one row per line.

``read_matrix`` sniffs the magic bytes and falls back to CSV.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"RVMPLMAT"
_HEADER = struct.Struct("<QQ")


class MatrixFormatError(ValueError):
    """File does not conform to the declared matrix format."""


def write_matrix_binary(path, m: np.ndarray) -> None:
    m = np.ascontiguousarray(np.asarray(m, dtype=float))
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {m.shape}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(m.shape[0], m.shape[1]))
        fh.write(m.astype("<f8").tobytes(order="C"))


def read_matrix_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + _HEADER.size or raw[: len(MAGIC)] != MAGIC:
        raise MatrixFormatError(f"{path}: missing magic header")
    rows, cols = _HEADER.unpack_from(raw, len(MAGIC))
    need = len(MAGIC) + _HEADER.size + rows * cols * 8
    if len(raw) != need:
        raise MatrixFormatError(
            f"{path}: expected {need} bytes for {rows}x{cols}, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f8", offset=len(MAGIC) + _HEADER.size)
    return data.reshape(rows, cols).astype(float)


def read_matrix_csv(path) -> np.ndarray:
    try:
        m = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: not a valid CSV matrix ({exc})") from exc
    return m


def read_matrix(path) -> np.ndarray:
    """Read a matrix, detecting the binary format by its magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        return read_matrix_binary(path)
    return read_matrix_csv(path)
