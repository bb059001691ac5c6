"""Synthetic Gaussian random fields with an exponential-nugget correlogram.

Used as ground truth for the correlation statistics: the generated field has
unit variance and inter-cell correlation ``c0 * exp(-(d / d0) ** s0)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, eigvalsh
from scipy.spatial.distance import pdist, squareform

from .errors import CapacityError, ConfigurationError, NumericalError
from .grid import Grid, ObservationMatrix

MAX_CELLS = 10_000


@dataclass(frozen=True)
class FieldSpec:
    grid: Grid
    n_time: int
    c0: float = 1.0
    d0: float = 9.0
    s0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.c0 <= 1:
            raise ConfigurationError(f"c0 must be in (0, 1], got {self.c0}")
        if not self.d0 > 0:
            raise ConfigurationError(f"d0 must be positive, got {self.d0}")
        if not 0 < self.s0 <= 2:
            raise ConfigurationError(f"s0 must be in (0, 2], got {self.s0}")
        if int(self.n_time) < 3:
            raise ConfigurationError(f"n_time must be >= 3, got {self.n_time}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def exponential_nugget(d, c0, d0, s0):
    """Correlogram model ``c0 * exp(-(d/d0)**s0)``."""
    d = np.asarray(d, dtype=float)
    return c0 * np.exp(-((d / d0) ** s0))


def covariance_matrix(grid: Grid, c0, d0, s0):
    """Dense covariance between in-mask cells (grid-unit distances), unit diagonal."""
    dist = squareform(pdist(grid.cell_centers()))
    cov = exponential_nugget(dist, c0, d0, s0)
    np.fill_diagonal(cov, 1.0)
    return cov


def _factor(cov):
    jitter = 0.0
    for attempt in range(4):
        try:
            return cholesky(cov + jitter * np.eye(len(cov)), lower=True)
        except LinAlgError:
            jitter = 1e-10 if attempt == 0 else jitter * 10
    lam = eigvalsh(cov, subset_by_index=[0, 0])[0]
    raise NumericalError(
        f"covariance not positive definite after jitter {jitter:g}; smallest eigenvalue ~ {lam:.3e}"
    )


def generate_grf(spec: FieldSpec) -> ObservationMatrix:
    """Draw ``spec.n_time`` independent zero-mean field realisations."""
    n = spec.grid.n_cells
    if n > MAX_CELLS:
        raise CapacityError(f"{n} in-mask cells exceeds the dense-factorization cap of {MAX_CELLS}")
    chol = _factor(covariance_matrix(spec.grid, spec.c0, spec.d0, spec.s0))
    rng = np.random.default_rng(int(spec.seed))
    xi = rng.standard_normal((n, int(spec.n_time)))
    return ObservationMatrix(spec.grid, chol @ xi)
