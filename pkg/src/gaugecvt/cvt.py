"""Discrete centroidal Voronoi tessellations.

The data sites are fixed points ``y_j`` with weights ``rho_j > 0`` and the
energy of a generator set is

    G(x) = sum_j rho_j * |x_{a(j)} - y_j|^2,   a(j) = nearest generator to y_j.

Two minimisers are provided: Lloyd's fixed-point iteration and a truncated
Newton method (conjugate-gradient inner solve, finite-difference Hessian-vector
products, Armijo backtracking).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .correlation import standardize
from .errors import CapacityError, ConfigurationError, DegenerateSeriesError, ValidationError
from .grid import ObservationMatrix, ScalarField, _frozen

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERATIONS = "max-iterations"
STALLED = "stalled"


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2 or len(pos) < 1:
            raise ValidationError(f"generator positions must have shape (k, 2), k >= 1; got {pos.shape}")
        if not np.isfinite(pos).all():
            raise ValidationError("generator positions must be finite")
        object.__setattr__(self, "positions", _frozen(pos))

    @property
    def k(self) -> int:
        return len(self.positions)

    def __len__(self):
        return self.k

    def __eq__(self, other):
        if not isinstance(other, GeneratorSet):
            return NotImplemented
        return np.array_equal(self.positions, other.positions)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) != len(w) or len(w) == 0:
            raise ValidationError(f"points {pts.shape} and weights {w.shape} are inconsistent")
        if not (np.isfinite(pts).all() and np.isfinite(w).all()):
            raise ValidationError("points and weights must be finite")
        if np.any(w <= 0):
            raise ValidationError("weights must be strictly positive")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def from_field(cls, density: ScalarField) -> "DiscreteProblem":
        """Data sites at in-mask cell centers (grid coordinates of ``density.grid``)."""
        return cls(density.grid.cell_centers(), density.values)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def bbox(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    @property
    def diagonal(self) -> float:
        lo, hi = self.bbox
        return float(np.hypot(*(hi - lo)))


class Evaluation(NamedTuple):
    labels: np.ndarray
    energy: float
    gradient: np.ndarray
    mass: np.ndarray
    centroids: np.ndarray
    empty: np.ndarray


def _positions(gens):
    return gens.positions if isinstance(gens, GeneratorSet) else np.asarray(gens, dtype=np.float64)


def evaluate(problem: DiscreteProblem, gens) -> Evaluation:
    """Assignment, energy, gradient and centroids in one pass over the points."""
    x = _positions(gens)
    labels, mass, moment, cell_energy = kernels.assign_accumulate(problem.points, problem.weights, x)
    empty = mass == 0
    centroids = x.copy()
    centroids[~empty] = moment[~empty] / mass[~empty, None]
    grad = 2.0 * mass[:, None] * (x - centroids)
    return Evaluation(labels, float(np.sum(cell_energy)), grad, mass, centroids, empty)


def assign(problem: DiscreteProblem, gens) -> np.ndarray:
    """Index of the nearest generator for every point; ties go to the lowest index."""
    return evaluate(problem, gens).labels


def energy(problem: DiscreteProblem, gens) -> float:
    return evaluate(problem, gens).energy


def gradient(problem: DiscreteProblem, gens) -> np.ndarray:
    """Gradient with the Voronoi assignment frozen; empty generators get zero."""
    return evaluate(problem, gens).gradient


def _relocate_empty(problem, x, empty, rng):
    """Move generators that own no points onto weight-sampled data points."""
    n = int(empty.sum())
    if n == 0:
        return x
    p = problem.weights / problem.weights.sum()
    idx = rng.choice(problem.size, size=min(n, problem.size), replace=False, p=p)
    x = x.copy()
    x[np.nonzero(empty)[0][:len(idx)]] = problem.points[idx]
    log.debug("relocated %d empty generator(s)", n)
    return x


def lloyd_step(problem: DiscreteProblem, gens, rng=None) -> GeneratorSet:
    """Move every generator to the weighted centroid of its Voronoi cell."""
    rng = np.random.default_rng(0) if rng is None else rng
    ev = evaluate(problem, gens)
    return GeneratorSet(_relocate_empty(problem, ev.centroids, ev.empty, rng))


def initial_generators(problem: DiscreteProblem, k: int, seed=0, mode="weighted") -> GeneratorSet:
    """Seeded starting generators.

    ``weighted`` draws ``k`` distinct data points with probability proportional
    to weight; ``uniform`` draws ``k`` points uniformly in the bounding box.
    """
    k = int(k)
    if not 1 <= k <= problem.size:
        raise ConfigurationError(f"k must be in [1, {problem.size}], got {k}")
    rng = np.random.default_rng(seed)
    if mode == "weighted":
        idx = rng.choice(problem.size, size=k, replace=False, p=problem.weights / problem.weights.sum())
        return GeneratorSet(problem.points[idx])
    if mode == "uniform":
        lo, hi = problem.bbox
        return GeneratorSet(lo + rng.random((k, 2)) * (hi - lo))
    raise ConfigurationError(f"unknown init mode {mode!r}")


@dataclass(frozen=True)
class CvtResult:
    generators: GeneratorSet
    energy_trace: list = field(repr=False)
    status: str
    solver: str = ""

    @property
    def iterations(self) -> int:
        return len(self.energy_trace) - 1

    @property
    def initial_energy(self) -> float:
        return self.energy_trace[0][1]

    @property
    def final_energy(self) -> float:
        return self.energy_trace[-1][1]

    @property
    def final_grad_norm(self) -> float:
        return self.energy_trace[-1][2]

    def trace_csv(self) -> str:
        rows = ["iter,energy,grad_norm"]
        rows += [f"{i},{e!r},{g!r}" for i, e, g in self.energy_trace]
        return "\n".join(rows) + "\n"


def _gnorm(grad):
    return float(np.max(np.abs(grad))) if grad.size else 0.0


def lloyd_solve(problem: DiscreteProblem, init: GeneratorSet, tol=1e-7, max_iter=1000,
                grad_tol=None, seed=0) -> CvtResult:
    """Iterate Lloyd steps until the largest move is below ``tol``.

    With ``grad_tol`` set, also stop once the gradient max-norm drops below
    ``grad_tol * (1 + |energy|)`` (the truncated-Newton criterion).
    """
    if not tol > 0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    rng = np.random.default_rng(seed)
    x = _relocate_empty(problem, init.positions, evaluate(problem, init).empty, rng)
    ev = evaluate(problem, x)
    trace = [(0, ev.energy, _gnorm(ev.gradient))]
    status = MAX_ITERATIONS
    for it in range(1, int(max_iter) + 1):
        if grad_tol is not None and trace[-1][2] < grad_tol * (1.0 + abs(ev.energy)):
            status = CONVERGED
            break
        new = _relocate_empty(problem, ev.centroids, ev.empty, rng)
        move = float(np.max(np.hypot(*(new - x).T)))
        x = new
        ev = evaluate(problem, x)
        trace.append((it, ev.energy, _gnorm(ev.gradient)))
        if move < tol:
            status = CONVERGED
            break
    return CvtResult(GeneratorSet(x), trace, status, "lloyd")


@dataclass(frozen=True)
class TnConfig:
    max_outer: int = 200
    grad_tol: float = 1e-8
    cg_max: int = 30
    cg_rtol: float = 1e-2
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 30
    stall_rtol: float = 1e-12
    stall_window: int = 3
    fd_rule: str = "secant"
    fd_spacings: float = 2.0

    def __post_init__(self):
        for name in ("max_outer", "grad_tol", "cg_max", "cg_rtol", "max_backtracks", "stall_window"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"TnConfig.{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ConfigurationError("TnConfig.backtrack must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            raise ConfigurationError("TnConfig.armijo_c must lie in (0, 1)")
        if self.fd_rule not in ("secant", "relative"):
            raise ConfigurationError(f"TnConfig.fd_rule must be 'secant' or 'relative', got {self.fd_rule!r}")
        if not self.fd_spacings > 0:
            raise ConfigurationError("TnConfig.fd_spacings must be positive")


_SQRT_EPS = math.sqrt(np.finfo(np.float64).eps)


def _point_spacing(problem):
    lo, hi = problem.bbox
    ext = hi - lo
    area = ext[0] * ext[1]
    if area > 0:
        return math.sqrt(area / problem.size)
    return max(float(np.hypot(*ext)), 1.0) / problem.size


def _newton_direction(problem, ev, x, cfg):
    """Approximate solution of H p = -g by truncated CG starting from p = 0.

    Hessian-vector products are forward differences of the gradient. With the
    ``relative`` rule the step is ``sqrt(eps) * (1 + |x|) / |v|``. With the
    default ``secant`` rule the largest generator displacement of the probe
    is ``min(fd_spacings * point spacing, Lloyd displacement)``: the discrete
    energy is piecewise quadratic with one block ``2 * mass`` per generator,
    so an infinitesimal probe never sees the coupling between neighbouring
    cells and reduces the Newton step to a Lloyd step. Probing at the scale of
    the step recovers that coupling while converging to the exact local
    Hessian as the iterate settles.
    """
    shape = x.shape
    xf = x.ravel()
    g = ev.gradient.ravel()
    if cfg.fd_rule == "secant":
        lloyd_move = float(np.max(np.abs(ev.centroids - x)))
        disp = min(cfg.fd_spacings * _point_spacing(problem), lloyd_move)
    else:
        disp = 0.0
    relative = _SQRT_EPS * (1.0 + np.linalg.norm(xf))

    def hessvec(v):
        h = disp / np.max(np.abs(v))
        if not h * np.linalg.norm(v) > relative:
            h = relative / np.linalg.norm(v)
        return (evaluate(problem, (xf + h * v).reshape(shape)).gradient.ravel() - g) / h

    r = -g
    v = r.copy()
    p = np.zeros_like(g)
    rr = float(r @ r)
    stop = cfg.cg_rtol * math.sqrt(rr)
    for i in range(cfg.cg_max):
        hv = hessvec(v)
        curv = float(v @ hv)
        if curv <= 0:
            if i == 0:
                p = -g
            break
        a = rr / curv
        p = p + a * v
        r = r - a * hv
        rr_new = float(r @ r)
        if math.sqrt(rr_new) <= stop:
            break
        v = r + (rr_new / rr) * v
        rr = rr_new
    return p


def _line_search(problem, x, e0, g, p, cfg, max_move):
    """Armijo backtracking from a unit step; returns the accepted point or None.

    The direction is first shortened so that no generator moves further than
    ``max_move``.
    """
    longest = float(np.max(np.hypot(*p.reshape(-1, 2).T)))
    if longest > max_move:
        p = p * (max_move / longest)
    slope = float(g @ p)
    p = p.reshape(x.shape)
    t = 1.0
    for _ in range(cfg.max_backtracks):
        trial = x + t * p
        if energy(problem, trial) <= e0 + cfg.armijo_c * t * slope:
            return trial
        t *= cfg.backtrack
    return None


def tn_solve(problem: DiscreteProblem, init: GeneratorSet, config: TnConfig | None = None,
             seed=0) -> CvtResult:
    """Truncated-Newton minimisation of the discrete CVT energy.

    Stops when the gradient max-norm is below ``grad_tol * (1 + |energy|)``
    (converged), when the relative energy decrease stays below
    ``stall_rtol`` for ``stall_window`` consecutive steps (stalled), when the
    line search fails (stalled), or after ``max_outer`` steps.
    """
    cfg = config or TnConfig()
    rng = np.random.default_rng(seed)
    x = _relocate_empty(problem, init.positions, evaluate(problem, init).empty, rng)
    ev = evaluate(problem, x)
    trace = [(0, ev.energy, _gnorm(ev.gradient))]
    status = MAX_ITERATIONS
    flat = 0
    diag = max(problem.diagonal, _point_spacing(problem))
    for it in range(1, cfg.max_outer + 1):
        if trace[-1][2] < cfg.grad_tol * (1.0 + abs(ev.energy)):
            status = CONVERGED
            break
        g = ev.gradient.ravel()
        p = _newton_direction(problem, ev, x, cfg)
        slope = float(g @ p)
        if not slope < 0:
            p = -g
        trial = _line_search(problem, x, ev.energy, g, p, cfg, diag)
        if trial is None and slope < 0:
            trial = _line_search(problem, x, ev.energy, g, -g, cfg, diag)
        if trial is None:
            log.info("line search exhausted after %d backtracks", cfg.max_backtracks)
            status = STALLED
            break
        e_old = ev.energy
        ev = evaluate(problem, trial)
        x = trial
        if ev.empty.any():
            x = _relocate_empty(problem, x, ev.empty, rng)
            ev = evaluate(problem, x)
        trace.append((it, ev.energy, _gnorm(ev.gradient)))
        flat = flat + 1 if (e_old - ev.energy) <= cfg.stall_rtol * abs(e_old) else 0
        if flat >= cfg.stall_window:
            status = STALLED
            break
    return CvtResult(GeneratorSet(x), trace, status, "tn")


def solve(problem, init, solver="tn", seed=0, **options) -> CvtResult:
    if solver == "tn":
        return tn_solve(problem, init, TnConfig(**options), seed=seed)
    if solver == "lloyd":
        return lloyd_solve(problem, init, seed=seed, **options)
    raise ConfigurationError(f"unknown solver {solver!r}; expected 'lloyd' or 'tn'")


MAX_CORRELATION_CELLS = 2500


def correlation_energy(obs: ObservationMatrix, gens, epsilon=1.0) -> float:
    """Sum over cells of ``2 eps^2 (1 - corr(cell, generator cell))``.

    Generators are snapped to the nearest in-mask cell center and every cell
    is assigned to the nearest snapped generator. A cell whose own series is
    constant contributes as if uncorrelated.
    """
    grid = obs.grid
    if grid.n_cells > MAX_CORRELATION_CELLS:
        raise CapacityError(f"{grid.n_cells} cells exceeds the pairwise cap of {MAX_CORRELATION_CELLS}")
    host = grid.snap(_positions(gens))
    z, degenerate = standardize(obs.values)
    for i, c in enumerate(host):
        if degenerate[c]:
            raise DegenerateSeriesError(f"generator {i} sits on cell {c}, whose series is constant")
    centers = grid.cell_centers()
    labels = kernels.assign_accumulate(centers, np.ones(grid.n_cells), centers[host])[0]
    partner = host[labels]
    corr = np.clip(kernels.pair_correlations(z, np.arange(grid.n_cells), partner), -1.0, 1.0)
    corr[partner == np.arange(grid.n_cells)] = 1.0
    return float(np.sum(2.0 * epsilon**2 * (1.0 - corr)))
