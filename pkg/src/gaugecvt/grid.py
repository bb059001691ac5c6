"""Grid geometry, masked domains and the two core data containers.

Cells are addressed by integer indices ``(i, j)`` with ``i`` along x and ``j``
along y. The mask is stored with shape ``(ny, nx)`` so that a row-major
flattening scans y in the outer loop and x in the inner loop; this "mask scan
order" is the ordering used for every per-cell array in the package.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ValidationError


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Regular 2-D lattice of square cells with a validity mask.

    Cell ``(i, j)`` has its center at grid coordinate ``(i + 0.5, j + 0.5)``;
    physical coordinates are grid coordinates times ``cell_size_km``.
    """

    nx: int
    ny: int
    cell_size_km: float = 1.0
    mask: np.ndarray | None = None

    def __post_init__(self):
        nx, ny = int(self.nx), int(self.ny)
        if nx < 2 or ny < 2:
            raise ConfigurationError(f"grid must be at least 2x2, got {nx}x{ny}")
        if not (np.isfinite(self.cell_size_km) and self.cell_size_km > 0):
            raise ConfigurationError(f"cell_size_km must be positive, got {self.cell_size_km}")
        if self.mask is None:
            mask = np.ones((ny, nx), dtype=bool)
        else:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != (ny, nx):
                raise ConfigurationError(f"mask shape {mask.shape} does not match (ny, nx)=({ny}, {nx})")
        if not mask.any():
            raise ConfigurationError("mask has no in-region cells")
        object.__setattr__(self, "nx", nx)
        object.__setattr__(self, "ny", ny)
        object.__setattr__(self, "cell_size_km", float(self.cell_size_km))
        object.__setattr__(self, "mask", _frozen(mask))

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and self.cell_size_km == other.cell_size_km
            and np.array_equal(self.mask, other.mask)
        )

    __hash__ = None

    @property
    def n_cells(self) -> int:
        """Number of in-mask cells."""
        return int(self.mask.sum())

    @property
    def diagonal(self) -> float:
        """Length of the bounding-box diagonal in grid units."""
        return float(np.hypot(self.nx, self.ny))

    def cell_indices(self):
        """Integer ``(i, j)`` of in-mask cells, shape (n_cells, 2), mask scan order."""
        jj, ii = np.nonzero(self.mask)
        return np.column_stack([ii, jj])

    def cell_centers(self):
        """Grid coordinates of in-mask cell centers, shape (n_cells, 2)."""
        return self.cell_indices() + 0.5

    def index_map(self):
        """(ny, nx) array mapping each lattice cell to its in-mask index, -1 outside."""
        out = np.full(self.mask.shape, -1, dtype=np.int64)
        out[self.mask] = np.arange(self.n_cells)
        return out

    def to_physical(self, xy):
        return np.asarray(xy, dtype=float) * self.cell_size_km

    def to_grid(self, xy_km):
        return np.asarray(xy_km, dtype=float) / self.cell_size_km

    def snap(self, xy):
        """In-mask cell index nearest to each continuous grid coordinate."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        centers = self.cell_centers()
        d2 = ((xy[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
        return np.argmin(d2, axis=1)

    def refine(self, factor: int) -> "Grid":
        """Grid with ``factor`` times the resolution; a fine cell is in-mask iff its parent is."""
        factor = int(factor)
        if factor < 1:
            raise ConfigurationError(f"refinement factor must be >= 1, got {factor}")
        mask = np.repeat(np.repeat(self.mask, factor, axis=0), factor, axis=1)
        return Grid(self.nx * factor, self.ny * factor, self.cell_size_km / factor, mask)


@dataclass(frozen=True, eq=False)
class ObservationMatrix:
    """Observations at every in-mask cell for ``n_time`` time steps.

    ``values`` has shape ``(n_cells, n_time)``: one row per cell in mask scan
    order.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != self.grid.n_cells:
            raise ValidationError(
                f"values shape {values.shape} incompatible with {self.grid.n_cells} in-mask cells"
            )
        if values.shape[1] < 3:
            raise ValidationError(f"need at least 3 time steps, got {values.shape[1]}")
        bad = np.argwhere(~np.isfinite(values))
        if len(bad):
            c, t = bad[0]
            raise ValidationError(f"non-finite value at cell {c}, time {t}")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def n_time(self) -> int:
        return self.values.shape[1]

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ObservationMatrix):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One value per in-mask cell. NaN marks a missing value."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.shape[0] != self.grid.n_cells:
            raise ValidationError(
                f"field has {values.shape[0]} values for {self.grid.n_cells} in-mask cells"
            )
        if np.isinf(values).any():
            raise ValidationError("field contains infinite values")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def missing(self):
        return np.isnan(self.values)

    def to_array(self, fill=np.nan):
        """Dense (ny, nx) array with ``fill`` outside the mask."""
        out = np.full(self.grid.mask.shape, fill, dtype=np.float64)
        out[self.grid.mask] = self.values
        return out

    @classmethod
    def from_array(cls, grid: Grid, array):
        array = np.asarray(array, dtype=np.float64)
        if array.shape != grid.mask.shape:
            raise ValidationError(f"array shape {array.shape} does not match grid {grid.mask.shape}")
        return cls(grid, array[grid.mask])

    def __eq__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values, equal_nan=True)

    __hash__ = None
