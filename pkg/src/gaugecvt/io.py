"""Binary and CSV formats for observation matrices and scalar fields.

Binary layout (little-endian)::

    magic     4 bytes  b"CVTP"
    version   u32      1
    nx, ny    u32, u32
    n_time    u32      (1 for a scalar field)
    has_mask  u8       0 or 1
    mask      nx*ny bytes if has_mask, row-major (y outer, x inner), 1 = in-mask
    values    f64, for t in 0..n_time-1 the in-mask cells in mask scan order

CSV long format has the header ``x,y,t,value`` with zero-based integer cell
indices. The mask is the set of ``(x, y)`` pairs present; the grid extent is
``max(x) + 1`` by ``max(y) + 1``.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError, InputError, ValidationError
from .grid import Grid, ObservationMatrix, ScalarField

MAGIC = b"CVTP"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIB")

FORMATS = ("binary", "csv")


def _guess_format(path, fmt):
    if fmt is not None:
        if fmt not in FORMATS:
            raise FormatError(f"unknown format {fmt!r}; expected one of {FORMATS}")
        return fmt
    return "csv" if Path(path).suffix.lower() == ".csv" else "binary"


# -- binary ------------------------------------------------------------------


def _encode(grid: Grid, matrix: np.ndarray) -> bytes:
    """``matrix`` has shape (n_cells, n_time)."""
    n_time = matrix.shape[1]
    full = bool(grid.mask.all())
    parts = [_HEADER.pack(MAGIC, VERSION, grid.nx, grid.ny, n_time, 0 if full else 1)]
    if not full:
        parts.append(grid.mask.astype(np.uint8).tobytes())
    parts.append(np.ascontiguousarray(matrix.T, dtype="<f8").tobytes())
    return b"".join(parts)


def _decode(data: bytes, cell_size_km: float):
    if len(data) < _HEADER.size:
        raise FormatError(f"truncated header: {len(data)} bytes, need {_HEADER.size} (offset 0)")
    magic, version, nx, ny, n_time, has_mask = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at byte offset 0, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version} at byte offset 4")
    if has_mask not in (0, 1):
        raise FormatError(f"mask flag must be 0 or 1, got {has_mask} at byte offset 20")
    if nx < 2 or ny < 2 or n_time < 1:
        raise FormatError(f"invalid dimensions nx={nx} ny={ny} n_time={n_time} at byte offset 8")
    offset = _HEADER.size
    if has_mask:
        end = offset + nx * ny
        if len(data) < end:
            raise DimensionError(f"mask needs {nx * ny} bytes, file has {len(data) - offset} after header")
        raw = np.frombuffer(data, dtype=np.uint8, count=nx * ny, offset=offset)
        if np.any(raw > 1):
            pos = int(np.argmax(raw > 1))
            raise FormatError(f"mask byte must be 0 or 1 at byte offset {offset + pos}")
        mask = raw.reshape(ny, nx).astype(bool)
        offset = end
    else:
        mask = np.ones((ny, nx), dtype=bool)
    grid = Grid(nx, ny, cell_size_km, mask)
    payload = len(data) - offset
    expected = grid.n_cells * n_time * 8
    if payload != expected:
        raise DimensionError(
            f"header declares {grid.n_cells} in-mask cells x {n_time} steps "
            f"({grid.n_cells * n_time} values) but payload carries {payload / 8:g} values"
        )
    values = np.frombuffer(data, dtype="<f8", offset=offset).reshape(n_time, grid.n_cells).T
    values = values.astype(np.float64)
    _check_finite(values)
    return grid, values


def _check_finite(values):
    bad = np.argwhere(~np.isfinite(values))
    if len(bad):
        c, t = bad[0]
        raise ValidationError(f"non-finite value at cell {c}, time {t}")


# -- csv ---------------------------------------------------------------------


def _write_csv(path, grid: Grid, matrix: np.ndarray):
    idx = grid.cell_indices()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "t", "value"])
        for t in range(matrix.shape[1]):
            for (i, j), v in zip(idx, matrix[:, t]):
                w.writerow([int(i), int(j), t, repr(float(v))])


def _read_csv(path, cell_size_km: float):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y", "t", "value"]:
            raise FormatError(f"{path}: line 1: expected header 'x,y,t,value', got {header!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
            try:
                rows.append((int(row[0]), int(row[1]), int(row[2]), float(row[3])))
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
            if min(rows[-1][:3]) < 0:
                raise FormatError(f"{path}: line {lineno}: negative index")
    if not rows:
        raise DimensionError(f"{path}: no data rows")
    arr = np.array([r[:3] for r in rows], dtype=np.int64)
    vals = np.array([r[3] for r in rows], dtype=np.float64)
    nx, ny, n_time = arr[:, 0].max() + 1, arr[:, 1].max() + 1, arr[:, 2].max() + 1
    mask = np.zeros((ny, nx), dtype=bool)
    mask[arr[:, 1], arr[:, 0]] = True
    grid = Grid(nx, ny, cell_size_km, mask)
    cell = grid.index_map()[arr[:, 1], arr[:, 0]]
    values = np.full((grid.n_cells, n_time), np.nan)
    seen = np.zeros((grid.n_cells, n_time), dtype=np.int64)
    np.add.at(seen, (cell, arr[:, 2]), 1)
    if (seen > 1).any():
        c, t = np.argwhere(seen > 1)[0]
        raise DimensionError(f"{path}: duplicate entry for cell {c}, time {t}")
    if (seen == 0).any():
        c, t = np.argwhere(seen == 0)[0]
        raise DimensionError(f"{path}: cell {c} has no value at time {t}")
    values[cell, arr[:, 2]] = vals
    _check_finite(values)
    return grid, values


# -- public API ---------------------------------------------------------------


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def load_observations(path, format=None, cell_size_km=1.0) -> ObservationMatrix:
    fmt = _guess_format(path, format)
    if fmt == "binary":
        grid, values = _decode(_read_bytes(path), cell_size_km)
    else:
        try:
            grid, values = _read_csv(path, cell_size_km)
        except OSError as exc:
            raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return ObservationMatrix(grid, values)


def save_observations(obs: ObservationMatrix, path, format=None):
    fmt = _guess_format(path, format)
    if fmt == "binary":
        Path(path).write_bytes(_encode(obs.grid, obs.values))
    else:
        _write_csv(path, obs.grid, obs.values)


def save_field(f: ScalarField, path, format=None):
    """Write a scalar field; raises ValidationError if any in-mask value is missing."""
    if np.isnan(f.values).any():
        raise ValidationError(f"field has NaN at in-mask cell {int(np.argmax(np.isnan(f.values)))}")
    fmt = _guess_format(path, format)
    matrix = f.values[:, None]
    if fmt == "binary":
        Path(path).write_bytes(_encode(f.grid, matrix))
    else:
        _write_csv(path, f.grid, matrix)


def load_field(path, format=None, cell_size_km=1.0) -> ScalarField:
    fmt = _guess_format(path, format)
    if fmt == "binary":
        grid, values = _decode(_read_bytes(path), cell_size_km)
    else:
        grid, values = _read_csv(path, cell_size_km)
    if values.shape[1] != 1:
        raise DimensionError(f"{path}: scalar field must have n_time=1, got {values.shape[1]}")
    return ScalarField(grid, values[:, 0])
