"""Kernel dispatch: the compiled extension when importable, numpy otherwise.

Call sites go through :func:`assign_accumulate` and :func:`pair_correlations`
here so that :func:`set_backend` takes effect everywhere.
"""
from __future__ import annotations

import logging

import numpy as np

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

BACKENDS = ("cython", "python") if _ckernels is not None else ("python",)
_active = _ckernels if _ckernels is not None else _pykernels


def backend() -> str:
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


def set_backend(name: str) -> None:
    global _active
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; reinstall with Cython available")
        _active = _ckernels
    elif name == "python":
        _active = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")


def assign_accumulate(points, weights, gens):
    """Return ``(labels, mass, moment, cell_energy)`` for a weighted point set."""
    return _active.assign_accumulate(
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(gens, dtype=np.float64),
    )


def pair_correlations(z, rows, cols):
    """Row dot products of a standardized series matrix for index pairs."""
    return _active.pair_correlations(
        np.ascontiguousarray(z, dtype=np.float64),
        np.ascontiguousarray(rows, dtype=np.int64),
        np.ascontiguousarray(cols, dtype=np.int64),
    )
