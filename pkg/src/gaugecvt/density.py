"""CVT density from an effective-correlation map, and automatic exponent choice.

Density is ``r + R * ((c_max - corr) / (c_max - c_min)) ** alpha``: weakly
correlated cells get up to ``r + R``, the most correlated cell gets ``r``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateFieldError, ValidationError
from .grid import ScalarField

log = logging.getLogger(__name__)

DEFAULT_R_FLOOR = 1e-6
DEFAULT_R_SCALE = 1.0
DEGENERATE_SPAN = 1e-9


@dataclass(frozen=True)
class DensityParams:
    r: float = DEFAULT_R_FLOOR
    R: float = DEFAULT_R_SCALE
    alpha: int = 1
    c_min: float = -1.0
    c_max: float = 1.0

    def __post_init__(self):
        if not self.r > 0 or not self.R > 0:
            raise ConfigurationError(f"r and R must be positive, got r={self.r}, R={self.R}")
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ConfigurationError(f"alpha must be a positive integer, got {self.alpha}")
        if not self.c_min < self.c_max:
            raise DegenerateFieldError(f"c_min={self.c_min} is not below c_max={self.c_max}")


@dataclass(frozen=True)
class AlphaSelection:
    alpha: int
    k_at_alpha: int
    trace: list = field(default_factory=list)
    over_threshold: bool = False

    def trace_csv(self) -> str:
        lines = ["alpha,k"] + [f"{a},{k}" for a, k in self.trace]
        return "\n".join(lines) + "\n"


def _extrema(corr: ScalarField):
    v = corr.values
    if np.isnan(v).any():
        raise ValidationError("correlation field has missing cells; interpolate it first")
    c_min, c_max = float(v.min()), float(v.max())
    if c_max - c_min <= DEGENERATE_SPAN:
        raise DegenerateFieldError(
            f"correlation field is constant (span {c_max - c_min:.3g}); density is undefined"
        )
    return c_min, c_max


def density_params(corr: ScalarField, r=DEFAULT_R_FLOOR, R=DEFAULT_R_SCALE, alpha=1) -> DensityParams:
    c_min, c_max = _extrema(corr)
    return DensityParams(r, R, int(alpha), c_min, c_max)


def build_density(corr: ScalarField, r=DEFAULT_R_FLOOR, R=DEFAULT_R_SCALE, alpha=1) -> ScalarField:
    p = density_params(corr, r, R, alpha)
    v = corr.values
    if v.min() < -1.0 or v.max() > 1.0:
        raise ValidationError("correlation values must lie in [-1, 1]")
    rel = (p.c_max - v) / (p.c_max - p.c_min)
    return ScalarField(corr.grid, p.r + p.R * rel ** p.alpha)


def relative_correlation(corr: ScalarField):
    """``(corr - c_min) / (c_max - c_min)`` in [0, 1]."""
    c_min, c_max = _extrema(corr)
    return (corr.values - c_min) / (c_max - c_min)


def count_below_threshold(corr: ScalarField, alpha, c_tol) -> int:
    """Number of cells whose relative correlation raised to ``alpha`` is below ``c_tol``."""
    if not 0 < c_tol < 1:
        raise ConfigurationError(f"c_tol must be in (0, 1), got {c_tol}")
    rel = relative_correlation(corr)
    return int(np.count_nonzero(rel ** int(alpha) < c_tol))


def select_alpha(corr: ScalarField, c_tol=0.1, k_g=1, alpha_max=32) -> AlphaSelection:
    """Largest integer exponent whose below-threshold count stays within ``k_g``.

    The count is nondecreasing in ``alpha``, so the scan stops at the first
    exponent that overshoots. If even ``alpha = 1`` overshoots, 1 is returned
    with ``over_threshold=True``.
    """
    if k_g < 1:
        raise ConfigurationError(f"k_g must be >= 1, got {k_g}")
    if alpha_max < 1:
        raise ConfigurationError(f"alpha_max must be >= 1, got {alpha_max}")
    if not 0 < c_tol < 1:
        raise ConfigurationError(f"c_tol must be in (0, 1), got {c_tol}")
    rel = relative_correlation(corr)
    trace = []
    best = None
    for alpha in range(1, int(alpha_max) + 1):
        k = int(np.count_nonzero(rel ** alpha < c_tol))
        trace.append((alpha, k))
        if k > k_g:
            break
        best = (alpha, k)
    if best is None:
        log.warning("alpha=1 already marks %d cells, above k_g=%d", trace[0][1], k_g)
        return AlphaSelection(1, trace[0][1], trace, over_threshold=True)
    return AlphaSelection(best[0], best[1], trace)
