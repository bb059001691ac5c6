"""End-to-end gauge placement and comparison against an existing network.

:func:`gauge_optim` runs the whole chain: correlogram, decorrelation
distance, effective-correlation map at that distance, interpolation, exponent
selection, density, and the CVT solve. Every intermediate product is kept on
the returned :class:`PlacementReport`.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import __version__, kernels
from .correlation import (
    Correlogram,
    correlogram,
    decorrelation_distance,
    effective_correlation_map,
    interpolate_field,
)
from .cvt import CvtResult, DiscreteProblem, GeneratorSet, energy, initial_generators, solve
from .density import AlphaSelection, build_density, count_below_threshold, select_alpha
from .errors import ConfigurationError, GaugeCVTError, InputError, ValidationError
from .grid import ObservationMatrix, ScalarField
from .io import save_field

log = logging.getLogger(__name__)

REPORT_FILES = (
    "config.json",
    "correlogram.csv",
    "corrmap.bin",
    "density.bin",
    "generators.csv",
    "trace.csv",
    "report.json",
)


@dataclass(frozen=True)
class PipelineConfig:
    k_g: int
    c_tol: float = 0.1
    r: float = 1e-6
    R: float = 1.0
    mc_samples: int = 100
    annulus_halfwidth: float = 1.0
    interpolation_factor: int = 4
    max_lag: int | None = None
    seed: int = 0
    solver: str = "tn"
    solver_options: dict = field(default_factory=dict)
    init: str = "weighted"
    alpha_override: int | None = None
    alpha_max: int = 32

    def __post_init__(self):
        if not 0 < self.c_tol < 1:
            raise ConfigurationError(f"c_tol must be in (0, 1), got {self.c_tol}")
        for name in ("k_g", "mc_samples", "interpolation_factor", "alpha_max"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.max_lag is not None and int(self.max_lag) < 1:
            raise ConfigurationError(f"max_lag must be positive, got {self.max_lag}")
        if self.alpha_override is not None and int(self.alpha_override) < 1:
            raise ConfigurationError(f"alpha_override must be a positive integer, got {self.alpha_override}")
        if self.solver not in ("tn", "lloyd"):
            raise ConfigurationError(f"solver must be 'tn' or 'lloyd', got {self.solver!r}")
        if self.init not in ("weighted", "uniform"):
            raise ConfigurationError(f"init must be 'weighted' or 'uniform', got {self.init!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def resolved_max_lag(self, obs: ObservationMatrix) -> int:
        if self.max_lag is not None:
            return int(self.max_lag)
        return max(1, max(obs.grid.nx, obs.grid.ny) // 2)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class PlacementReport:
    config: PipelineConfig
    correlogram: Correlogram
    decorrelation_d: int
    decorrelated: bool
    cell_size_km: float
    corr_map: ScalarField
    corr_fine: ScalarField
    alpha: AlphaSelection
    density: ScalarField
    initial: GeneratorSet
    result: CvtResult
    provenance: dict

    @property
    def decorrelation_km(self) -> float:
        return self.decorrelation_d * self.cell_size_km

    @property
    def generators_km(self):
        return self.density.grid.to_physical(self.result.generators.positions)

    def summary(self) -> dict:
        r = self.result
        return {
            "decorrelation_d_grid": self.decorrelation_d,
            "decorrelation_d_km": self.decorrelation_km,
            "decorrelated": self.decorrelated,
            "alpha": self.alpha.alpha,
            "k_at_alpha": self.alpha.k_at_alpha,
            "alpha_over_threshold": self.alpha.over_threshold,
            "alpha_trace": [list(t) for t in self.alpha.trace],
            "solver": r.solver,
            "status": r.status,
            "iterations": r.iterations,
            "initial_energy": r.initial_energy,
            "final_energy": r.final_energy,
            "final_grad_norm": r.final_grad_norm,
            "fine_grid": {
                "nx": self.density.grid.nx,
                "ny": self.density.grid.ny,
                "cell_size_km": self.density.grid.cell_size_km,
            },
            "energy_frame": "interpolated grid, fine-grid coordinates",
            "initial_generators": self.initial.positions.tolist(),
            "provenance": self.provenance,
        }


def input_digest(obs: ObservationMatrix) -> str:
    h = hashlib.sha256()
    g = obs.grid
    h.update(np.array([g.nx, g.ny, obs.n_time], dtype="<u4").tobytes())
    h.update(np.packbits(g.mask).tobytes())
    h.update(np.ascontiguousarray(obs.values, dtype="<f8").tobytes())
    return h.hexdigest()


class _stage:
    """Re-raise package errors labelled with the failing stage."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage: %s", self.name)

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, GaugeCVTError) and exc.stage is None:
            raise exc.with_stage(self.name) from exc
        return False


def gauge_optim(obs: ObservationMatrix, config: PipelineConfig) -> PlacementReport:
    cfg = config
    if cfg.k_g > obs.grid.n_cells:
        raise ConfigurationError(f"k_g={cfg.k_g} exceeds the {obs.grid.n_cells} in-mask cells", stage="config")
    seed = int(cfg.seed)
    max_lag = min(cfg.resolved_max_lag(obs), max(obs.grid.nx, obs.grid.ny))

    with _stage("correlogram"):
        cg = correlogram(obs, max_lag, cfg.mc_samples, seed, cfg.annulus_halfwidth)
        d0, decorrelated = decorrelation_distance(cg)
        if not decorrelated:
            log.warning("correlogram never drops below 1/e up to lag %d", d0)
    with _stage("corr-map"):
        cmap = effective_correlation_map(obs, d0, cfg.mc_samples, cfg.annulus_halfwidth, seed)
    with _stage("interpolate"):
        fine = interpolate_field(cmap, cfg.interpolation_factor)
    if cfg.alpha_override is None:
        with _stage("alpha"):
            sel = select_alpha(fine, cfg.c_tol, cfg.k_g, cfg.alpha_max)
        with _stage("density"):
            dens = build_density(fine, cfg.r, cfg.R, sel.alpha)
    else:
        with _stage("density"):
            a = int(cfg.alpha_override)
            dens = build_density(fine, cfg.r, cfg.R, a)
            k = count_below_threshold(fine, a, cfg.c_tol)
            sel = AlphaSelection(a, k, [(a, k)], over_threshold=k > cfg.k_g)
    with _stage("cvt"):
        problem = DiscreteProblem.from_field(dens)
        init = initial_generators(problem, cfg.k_g, seed=seed, mode=cfg.init)
        result = solve(problem, init, cfg.solver, seed=seed, **cfg.solver_options)
    provenance = {
        "input_digest": input_digest(obs),
        "seed": seed,
        "max_lag": max_lag,
        "version": __version__,
        "kernel_backend": kernels.backend(),
    }
    return PlacementReport(cfg, cg, d0, decorrelated, obs.grid.cell_size_km, cmap, fine, sel, dens,
                           init, result, provenance)


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_generators_csv(path, positions, cell_size_km):
    positions = np.asarray(positions, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x_grid", "y_grid", "x_km", "y_km"])
        for i, (x, y) in enumerate(positions):
            w.writerow([i, repr(float(x)), repr(float(y)), repr(float(x * cell_size_km)),
                        repr(float(y * cell_size_km))])


def read_points_csv(path, cell_size_km=None):
    """Read a point set; returns ``(grid_xy, km_xy)``, either may be None.

    Accepts ``x_grid,y_grid`` and/or ``x_km,y_km`` columns. When only one
    frame is present and ``cell_size_km`` is given, the other is derived.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise ValidationError(f"{path}: no points")
    cols = set(rows[0])

    def take(a, b):
        if {a, b} <= cols:
            try:
                return np.array([[float(r[a]), float(r[b])] for r in rows])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}: bad coordinate: {exc}") from None
        return None

    grid_xy, km_xy = take("x_grid", "y_grid"), take("x_km", "y_km")
    if grid_xy is None and km_xy is None:
        raise ValidationError(f"{path}: need x_grid,y_grid or x_km,y_km columns, got {sorted(cols)}")
    if cell_size_km is not None:
        if km_xy is None:
            km_xy = grid_xy * cell_size_km
        if grid_xy is None:
            grid_xy = km_xy / cell_size_km
    return grid_xy, km_xy


def write_report(report: PlacementReport, outdir) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(report.config.to_dict(), out / "config.json")
    report.correlogram.to_csv(out / "correlogram.csv")
    save_field(interpolate_field(report.corr_map, 1), out / "corrmap.bin", "binary")
    save_field(report.density, out / "density.bin", "binary")
    write_generators_csv(out / "generators.csv", report.result.generators.positions,
                         report.density.grid.cell_size_km)
    (out / "trace.csv").write_text(report.result.trace_csv())
    _dump_json(report.summary(), out / "report.json")
    return out


@dataclass(frozen=True)
class ComparisonReport:
    radii_km: list
    counts_within: list
    counts_outside: list
    per_gauge_nearest_km: np.ndarray
    per_gauge_nearest_id: np.ndarray

    def to_csv(self) -> str:
        rows = ["radius_km,within,outside"]
        rows += [f"{r:g},{a},{b}" for r, a, b in zip(self.radii_km, self.counts_within, self.counts_outside)]
        return "\n".join(rows) + "\n"

    def per_gauge_csv(self) -> str:
        rows = ["gauge_id,nearest_optimal_id,distance_km"]
        rows += [f"{i},{j},{d!r}" for i, (j, d) in
                 enumerate(zip(self.per_gauge_nearest_id.tolist(), self.per_gauge_nearest_km.tolist()))]
        return "\n".join(rows) + "\n"

    def write(self, outdir):
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.csv").write_text(self.to_csv())
        (out / "per_gauge.csv").write_text(self.per_gauge_csv())
        return out


def compare_km(real_km, optimal_km, radii_km) -> ComparisonReport:
    real_km = np.atleast_2d(np.asarray(real_km, dtype=float))
    optimal_km = np.atleast_2d(np.asarray(optimal_km, dtype=float))
    if len(real_km) == 0 or len(optimal_km) == 0:
        raise ValidationError("both point sets must be non-empty")
    radii = [float(r) for r in radii_km]
    if any(r <= 0 for r in radii) or radii != sorted(radii):
        raise ConfigurationError(f"radii must be positive and sorted, got {radii}")
    dist, idx = cKDTree(optimal_km).query(real_km)
    within = [int(np.count_nonzero(dist <= r)) for r in radii]
    outside = [len(real_km) - n for n in within]
    return ComparisonReport(radii, within, outside, dist, idx)


def compare_placements(real: GeneratorSet, optimal: GeneratorSet, radii_km, cell_size_km) -> ComparisonReport:
    """Count real gauges whose nearest optimal location lies within each radius.

    Both sets are in grid coordinates of the same grid.
    """
    return compare_km(real.positions * cell_size_km, optimal.positions * cell_size_km, radii_km)


def energy_of_placement(problem_or_density, gens) -> float:
    """CVT energy of an arbitrary generator set against a density or problem."""
    if isinstance(problem_or_density, ScalarField):
        problem_or_density = DiscreteProblem.from_field(problem_or_density)
    if isinstance(problem_or_density, PlacementReport):
        problem_or_density = DiscreteProblem.from_field(problem_or_density.density)
    if not isinstance(gens, GeneratorSet):
        gens = GeneratorSet(gens)
    return energy(problem_or_density, gens)
