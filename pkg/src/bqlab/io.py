"""Binary snapshot format for spectral fields.

Layout (little-endian):

    magic   4 bytes  b"BQSF"
    version u32      currently 1
    nx      u32
    ny      u32
    Ly      f64
    time    f64
    data    nx*ny complex128 coefficient pairs (re, im), row-major in the
            sorted-wavenumber layout of :class:`bqlab.grid.SpectralField`
            (rows = ascending k, columns = ascending xi).
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import Grid, SpectralField, make_grid

MAGIC = b"BQSF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")


class SnapshotError(IOError):
    """Malformed or incompatible snapshot file."""


def write_snapshot(path, field: SpectralField, time: float) -> None:
    g = field.grid
    header = _HEADER.pack(MAGIC, VERSION, g.nx, g.ny, g.Ly, float(time))
    data = np.ascontiguousarray(field.coeffs, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_snapshot(path, grid: Grid | None = None) -> tuple[SpectralField, float]:
    """Read a snapshot; returns (field, time).

    If ``grid`` is given, the file's grid parameters must match it; otherwise
    a fresh grid is reconstructed from the header.
    """
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise SnapshotError(f"{path}: truncated header")
        magic, version, nx, ny, Ly, time = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise SnapshotError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise SnapshotError(f"{path}: unsupported version {version}")
        payload = fh.read(nx * ny * 16)
    if len(payload) != nx * ny * 16:
        raise SnapshotError(f"{path}: truncated payload")
    if grid is None:
        grid = make_grid(nx, ny, Ly)
    elif (grid.nx, grid.ny) != (nx, ny) or abs(grid.Ly - Ly) > 1e-12 * max(1.0, Ly):
        raise SnapshotError(
            f"{path}: snapshot grid ({nx},{ny},Ly={Ly}) does not match "
            f"({grid.nx},{grid.ny},Ly={grid.Ly})"
        )
    coeffs = np.frombuffer(payload, dtype="<c16").reshape(nx, ny).astype(np.complex128)
    return SpectralField(grid, coeffs), float(time)
