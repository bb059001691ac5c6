"""Correlation statistics of gridded time series.

Effective correlation of a cell is the mean Pearson correlation between its
series and the series of cells at a fixed separation ``d``, estimated by Monte
Carlo sampling over the annulus ``d - h <= |y - x| <= d + h``. Sweeping ``d``
and averaging over the domain gives the correlogram, whose first drop below
``1/e`` is the decorrelation distance.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage, optimize

from . import kernels
from .errors import (
    ConfigurationError,
    DegenerateFitError,
    DegenerateSeriesError,
    EmptyAnnulusError,
    ValidationError,
)
from .grf import exponential_nugget
from .grid import ObservationMatrix, ScalarField

log = logging.getLogger(__name__)

INV_E = math.exp(-1.0)


def pearson(a, b) -> float:
    """Product-moment correlation of two equal-length series, clamped to [-1, 1].

    Raises DegenerateSeriesError when either series is constant.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"series shapes differ or are not 1-D: {a.shape} vs {b.shape}")
    if len(a) < 3:
        raise ValidationError(f"need at least 3 samples, got {len(a)}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValidationError("series contain non-finite values")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateSeriesError("zero-variance series")
    am = a - a.mean()
    bm = b - b.mean()
    # one square root keeps r exactly +-1 for proportional series
    r = np.dot(am, bm) / math.sqrt(np.dot(am, am) * np.dot(bm, bm))
    return float(min(1.0, max(-1.0, r)))


def standardize(values):
    """Centre each row and scale it to unit Euclidean norm.

    Returns ``(z, degenerate)``; rows of constant series are left at zero and
    flagged.
    """
    values = np.asarray(values, dtype=np.float64)
    degenerate = np.ptp(values, axis=1) == 0
    z = values - values.mean(axis=1, keepdims=True)
    norm = np.sqrt(np.einsum("ij,ij->i", z, z))
    norm[degenerate] = 1.0
    z /= norm[:, None]
    z[degenerate] = 0.0
    return z, degenerate


def annulus_offsets(d: float, halfwidth: float = 1.0):
    """Integer offsets with ``d - halfwidth <= |offset| <= d + halfwidth``, origin excluded."""
    reach = int(math.floor(d + halfwidth))
    ax = np.arange(-reach, reach + 1)
    dx, dy = np.meshgrid(ax, ax, indexing="xy")
    r = np.hypot(dx, dy)
    keep = (r >= d - halfwidth) & (r <= d + halfwidth) & (r > 0)
    return np.column_stack([dx[keep], dy[keep]])


def annulus_candidates(grid, d, halfwidth):
    """(n_cells, n_offsets) matrix of in-mask neighbour indices in the annulus; -1 if absent."""
    off = annulus_offsets(d, halfwidth)
    ij = grid.cell_indices()
    ci = ij[:, 0:1] + off[None, :, 0]
    cj = ij[:, 1:2] + off[None, :, 1]
    inside = (ci >= 0) & (ci < grid.nx) & (cj >= 0) & (cj < grid.ny)
    index = grid.index_map()
    out = np.full(ci.shape, -1, dtype=np.int64)
    out[inside] = index[cj[inside], ci[inside]]
    return out


def _check_map_args(d, n_samples, halfwidth):
    if d < 1:
        raise ConfigurationError(f"radius d must be >= 1, got {d}")
    if n_samples < 1:
        raise ConfigurationError(f"n_samples must be >= 1, got {n_samples}")
    if halfwidth < 0.5:
        raise ConfigurationError(f"annulus halfwidth must be >= 0.5, got {halfwidth}")


def _sample_pairs(cand, degenerate, cells, n_samples, seed):
    """Draw neighbour indices per cell. Returns (owner, partner, counts)."""
    owners, partners = [], []
    counts = np.zeros(len(cells), dtype=np.int64)
    max_attempts = 10 * n_samples
    for pos, c in enumerate(cells):
        if degenerate[c]:
            continue
        pool = cand[c]
        pool = pool[pool >= 0]
        if len(pool) == 0:
            continue
        rng = np.random.default_rng([seed, int(c)])
        picked = pool[rng.integers(0, len(pool), size=n_samples)]
        picked = picked[~degenerate[picked]]
        attempts = n_samples
        while len(picked) < n_samples and attempts < max_attempts:
            extra = min(n_samples - len(picked), max_attempts - attempts)
            more = pool[rng.integers(0, len(pool), size=extra)]
            picked = np.concatenate([picked, more[~degenerate[more]]])
            attempts += extra
        counts[pos] = len(picked)
        owners.append(np.full(len(picked), c, dtype=np.int64))
        partners.append(picked)
    if owners:
        return np.concatenate(owners), np.concatenate(partners), counts
    empty = np.empty(0, dtype=np.int64)
    return empty, empty, counts


def effective_correlation_samples(obs: ObservationMatrix, d, n_samples=100, annulus_halfwidth=1.0,
                                  seed=0, cells=None, z=None):
    """Monte Carlo effective correlation for selected cells.

    Returns ``(values, counts)`` aligned with ``cells`` (all cells by default).
    A cell with no usable neighbours, or with a constant series of its own,
    gets NaN and a zero count.
    """
    _check_map_args(d, n_samples, annulus_halfwidth)
    if z is None:
        z = standardize(obs.values)
    z, degenerate = z
    cells = np.arange(obs.n_cells) if cells is None else np.asarray(cells, dtype=np.int64)
    cand = annulus_candidates(obs.grid, d, annulus_halfwidth)
    owner, partner, counts = _sample_pairs(cand, degenerate, cells, int(n_samples), int(seed))
    r = np.clip(kernels.pair_correlations(z, owner, partner), -1.0, 1.0)
    values = np.full(len(cells), np.nan)
    ok = counts > 0
    # pairs are laid out cell by cell, in the order of ``cells``
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    if ok.any():
        sums = np.add.reduceat(r, starts[ok]) if len(r) else np.zeros(ok.sum())
        values[ok] = np.clip(sums / counts[ok], -1.0, 1.0)
    return values, counts


def effective_correlation_map(obs: ObservationMatrix, d, n_samples=100, annulus_halfwidth=1.0,
                              seed=0) -> ScalarField:
    """Per-cell mean correlation with cells at distance ``d`` (grid units).

    Each cell draws its own neighbours from a generator seeded by
    ``(seed, cell index)``, so the map does not depend on evaluation order.
    Cells without usable neighbours are NaN; fill them with
    :func:`interpolate_field`.
    """
    values, _ = effective_correlation_samples(obs, d, n_samples, annulus_halfwidth, seed)
    if np.isnan(values).all():
        raise EmptyAnnulusError(f"no cell has a usable neighbour at d={d}")
    return ScalarField(obs.grid, values)


def exhaustive_annulus_correlation(obs: ObservationMatrix, d, annulus_halfwidth=1.0) -> ScalarField:
    """Mean correlation over every usable annulus cell, without sampling.

    Reference for the Monte Carlo estimator; uses one dense correlation matrix,
    so keep it to a few thousand cells.
    """
    values = obs.values
    degenerate = np.ptp(values, axis=1) == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.clip(np.corrcoef(values), -1.0, 1.0)
    cand = annulus_candidates(obs.grid, d, annulus_halfwidth)
    out = np.full(obs.n_cells, np.nan)
    for c in range(obs.n_cells):
        if degenerate[c]:
            continue
        pool = cand[c]
        pool = pool[(pool >= 0)]
        pool = pool[~degenerate[pool]]
        if len(pool):
            out[c] = corr[c, pool].mean()
    return ScalarField(obs.grid, out)


@dataclass(frozen=True)
class Correlogram:
    lags: np.ndarray
    mean_corr: np.ndarray
    sample_counts: np.ndarray

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=np.float64)
        mc = np.asarray(self.mean_corr, dtype=np.float64)
        cnt = np.asarray(self.sample_counts, dtype=np.int64)
        if not (len(lags) == len(mc) == len(cnt) >= 1):
            raise ValidationError("correlogram arrays must be non-empty and of equal length")
        if np.any(np.diff(lags) <= 0):
            raise ValidationError("correlogram lags must be strictly increasing")
        if np.any(cnt <= 0):
            raise ValidationError("correlogram sample counts must be positive")
        object.__setattr__(self, "lags", lags)
        object.__setattr__(self, "mean_corr", mc)
        object.__setattr__(self, "sample_counts", cnt)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lag", "mean_corr", "samples"])
            for lag, mc, n in zip(self.lags, self.mean_corr, self.sample_counts):
                w.writerow([f"{lag:g}", repr(float(mc)), int(n)])

    @classmethod
    def from_csv(cls, path):
        data = np.genfromtxt(path, delimiter=",", names=True, ndmin=1)
        return cls(data["lag"], data["mean_corr"], data["samples"].astype(np.int64))


def correlogram(obs: ObservationMatrix, max_lag, n_samples=100, seed=0,
                annulus_halfwidth=1.0) -> Correlogram:
    """Domain-mean effective correlation at integer lags ``1..max_lag``.

    Every lag uses the same ``seed``, so ``mean_corr`` at lag ``l`` equals the
    spatial mean of ``effective_correlation_map(obs, l, ..., seed)``.
    """
    max_lag = int(max_lag)
    if not 1 <= max_lag <= max(obs.grid.nx, obs.grid.ny):
        raise ConfigurationError(f"max_lag must be in [1, {max(obs.grid.nx, obs.grid.ny)}], got {max_lag}")
    z = standardize(obs.values)
    lags, means, counts = [], [], []
    for lag in range(1, max_lag + 1):
        values, cnt = effective_correlation_samples(obs, lag, n_samples, annulus_halfwidth, seed, z=z)
        if np.isnan(values).all():
            log.warning("lag %d has no usable samples; dropped", lag)
            continue
        lags.append(lag)
        means.append(float(np.nanmean(values)))
        counts.append(int(cnt.sum()))
    if not lags:
        raise EmptyAnnulusError("no lag has usable samples")
    return Correlogram(np.array(lags), np.array(means), np.array(counts))


class Decorrelation(NamedTuple):
    distance: int
    decorrelated: bool


def decorrelation_distance(c: Correlogram) -> Decorrelation:
    """Smallest lag with mean correlation strictly below 1/e.

    If the curve never drops below 1/e the largest lag is returned with
    ``decorrelated=False``.
    """
    below = np.nonzero(c.mean_corr < INV_E)[0]
    if len(below) == 0:
        return Decorrelation(int(round(c.lags[-1])), False)
    return Decorrelation(int(round(c.lags[below[0]])), True)


@dataclass(frozen=True)
class VariogramFit:
    c0: float
    d0: float
    s0: float
    rmse: float

    def __call__(self, d):
        return exponential_nugget(d, self.c0, self.d0, self.s0)


_C0_BOUNDS = (1e-6, 1.0)
_S0_BOUNDS = (1e-3, 2.0)


def fit_exponential_nugget(c: Correlogram, rtol=1e-8, max_sweeps=500) -> VariogramFit:
    """Weighted least-squares fit of ``c0 * exp(-(d/d0)**s0)`` to a correlogram.

    A coarse grid search picks the starting point; coordinate descent with a
    bounded scalar minimiser per parameter refines it until no parameter
    moves by more than ``rtol`` (relative) over a full sweep.
    """
    if len(c.lags) < 3:
        raise ConfigurationError(f"need at least 3 lags to fit, got {len(c.lags)}")
    if np.ptp(c.mean_corr) == 0:
        raise DegenerateFitError("correlogram is constant; exponential model is not identifiable")
    x, y = c.lags, c.mean_corr
    w = c.sample_counts / c.sample_counts.sum()
    max_lag = float(x.max())

    def loss(c0, d0, s0):
        res = exponential_nugget(x, c0, d0, s0) - y
        return float(np.dot(w, res * res))

    c0_grid = np.round(np.arange(0.5, 1.0 + 1e-9, 0.05), 10)
    d0_grid = np.geomspace(1.0, max(max_lag, 1.0 + 1e-9), 32)
    s0_grid = np.arange(0.25, 2.0 + 1e-9, 0.25)
    C, D, S = np.meshgrid(c0_grid, d0_grid, s0_grid, indexing="ij")
    pred = C[..., None] * np.exp(-((x / D[..., None]) ** S[..., None]))
    sse = ((pred - y) ** 2 * w).sum(axis=-1)
    ic, id_, is_ = np.unravel_index(np.argmin(sse), sse.shape)
    p = np.array([c0_grid[ic], math.log(d0_grid[id_]), s0_grid[is_]])

    bounds = [_C0_BOUNDS, (math.log(1e-3), math.log(100.0 * max_lag)), _S0_BOUNDS]

    def f1(idx):
        def g(v):
            q = p.copy()
            q[idx] = v
            return loss(q[0], math.exp(q[1]), q[2])
        return g

    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def along(start, step):
        def g(t):
            q = np.clip(start + t * step, lo, hi)
            return loss(q[0], math.exp(q[1]), q[2])
        return g

    for _ in range(max_sweeps):
        start = p.copy()
        old = np.array([p[0], math.exp(p[1]), p[2]])
        for idx in range(3):
            res = optimize.minimize_scalar(f1(idx), bounds=bounds[idx], method="bounded",
                                           options={"xatol": 1e-12})
            if res.fun <= f1(idx)(p[idx]):
                p[idx] = res.x
        # pattern move along the sweep's net displacement; plain coordinate
        # descent crawls along the curved valley between c0, d0 and s0
        step = p - start
        if np.any(step != 0):
            g = along(p, step)
            res = optimize.minimize_scalar(g, bounds=(0.0, 50.0), method="bounded",
                                           options={"xatol": 1e-10})
            if res.fun < g(0.0):
                p = np.clip(p + res.x * step, lo, hi)
        new = np.array([p[0], math.exp(p[1]), p[2]])
        if np.all(np.abs(new - old) <= rtol * np.abs(old)):
            break
    c0, d0, s0 = float(p[0]), float(math.exp(p[1])), float(p[2])
    return VariogramFit(c0, d0, s0, math.sqrt(loss(c0, d0, s0)))


def fill_missing(f: ScalarField):
    """Dense (ny, nx) array: missing and out-of-mask cells take the nearest valid value."""
    arr = f.to_array(np.nan)
    invalid = np.isnan(arr)
    if invalid.all():
        raise ValidationError("field has no valid values to interpolate from")
    _, (iy, ix) = ndimage.distance_transform_edt(invalid, return_indices=True)
    return arr[iy, ix]


def _lerp(a, b, t):
    # exact at both ends and monotone in t
    return np.where(t < 0.5, a + t * (b - a), b - (1.0 - t) * (b - a))


def interpolate_field(f: ScalarField, factor: int = 1) -> ScalarField:
    """Fill missing cells by nearest neighbour, then bilinearly refine by ``factor``.

    Coarse values sit at cell centers; fine cells beyond the outermost centers
    take the edge value. Output never leaves the input's [min, max].
    """
    factor = int(factor)
    if factor < 1:
        raise ConfigurationError(f"interpolation factor must be >= 1, got {factor}")
    dense = fill_missing(f)
    fine_grid = f.grid.refine(factor)
    ny, nx = dense.shape

    def axis_weights(n):
        u = (np.arange(n * factor) + 0.5) / factor - 0.5
        u = np.clip(u, 0.0, n - 1)
        i0 = np.minimum(np.floor(u).astype(np.int64), n - 2)
        return i0, u - i0

    ix, tx = axis_weights(nx)
    iy, ty = axis_weights(ny)
    a = dense[np.ix_(iy, ix)]
    b = dense[np.ix_(iy, ix + 1)]
    c = dense[np.ix_(iy + 1, ix)]
    d = dense[np.ix_(iy + 1, ix + 1)]
    top = _lerp(a, b, tx[None, :])
    bot = _lerp(c, d, tx[None, :])
    fine = _lerp(top, bot, ty[:, None])
    valid = f.values[~np.isnan(f.values)]
    fine = np.clip(fine, valid.min(), valid.max())
    return ScalarField(fine_grid, fine[fine_grid.mask])
