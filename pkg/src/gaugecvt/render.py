"""SVG drawing of a density map, its Voronoi partition and generator markers."""
from __future__ import annotations

from xml.sax.saxutils import quoteattr

import numpy as np

from .cvt import DiscreteProblem, assign
from .grid import ScalarField

# light yellow -> dark red
_RAMP = np.array([[255, 255, 204], [254, 217, 118], [253, 141, 60], [227, 26, 28], [128, 0, 38]], float)
N_BINS = 16


def _color(t):
    x = t * (len(_RAMP) - 1)
    i = min(int(x), len(_RAMP) - 2)
    c = _RAMP[i] + (x - i) * (_RAMP[i + 1] - _RAMP[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def _fmt(v):
    return f"{v:.4f}".rstrip("0").rstrip(".")


def render_svg(density: ScalarField, generators, overlay=None, pixels=720) -> str:
    """Return an SVG document in grid coordinates, north up.

    ``generators`` and ``overlay`` are (k, 2) arrays of grid coordinates on
    ``density.grid``.
    """
    grid = density.grid
    nx, ny = grid.nx, grid.ny
    gens = np.atleast_2d(np.asarray(generators, dtype=float))
    scale = pixels / max(nx, ny)
    lo, hi = float(np.nanmin(density.values)), float(np.nanmax(density.values))
    span = hi - lo if hi > lo else 1.0
    dense = density.to_array(np.nan)
    missing = np.isnan(dense)
    scaled = np.where(missing, 0.0, (dense - lo) / span * N_BINS)
    bins = np.where(missing, -1, np.minimum(scaled.astype(int), N_BINS - 1))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(nx * scale)}" height="{_fmt(ny * scale)}" '
        f'viewBox="0 0 {nx} {ny}">',
        f"<title>{grid.n_cells} cells, {len(gens)} generators</title>",
        '<g class="density" shape-rendering="crispEdges">',
    ]
    for j in range(ny):
        row = bins[j]
        y = ny - j - 1
        i = 0
        while i < nx:
            b = row[i]
            start = i
            while i < nx and row[i] == b:
                i += 1
            if b >= 0:
                out.append(f'<rect x="{start}" y="{y}" width="{i - start}" height="1" '
                           f'fill="{_color((b + 0.5) / N_BINS)}"/>')
    out.append("</g>")

    labels = np.full((ny, nx), -1, dtype=np.int64)
    labels[grid.mask] = assign(DiscreteProblem(grid.cell_centers(), np.ones(grid.n_cells)), gens)
    segs = []
    diff_x = (labels[:, 1:] != labels[:, :-1]) & (labels[:, 1:] >= 0) & (labels[:, :-1] >= 0)
    for j, i in zip(*np.nonzero(diff_x)):
        segs.append(f"M{i + 1} {ny - j}v-1")
    diff_y = (labels[1:, :] != labels[:-1, :]) & (labels[1:, :] >= 0) & (labels[:-1, :] >= 0)
    for j, i in zip(*np.nonzero(diff_y)):
        segs.append(f"M{i} {ny - j - 1}h1")
    if segs:
        out.append(f'<path class="voronoi" fill="none" stroke="#333" stroke-width="{_fmt(1.5 / scale)}" '
                   f'd={quoteattr("".join(segs))}/>')

    r = max(0.3, 4.0 / scale)
    out.append('<g class="generators" fill="#1f4e99" stroke="white" stroke-width="%s">' % _fmt(r / 3))
    for x, y in gens:
        out.append(f'<circle class="generator" cx="{_fmt(x)}" cy="{_fmt(ny - y)}" r="{_fmt(r)}"/>')
    out.append("</g>")
    if overlay is not None and len(overlay):
        out.append('<g class="gauges" fill="none" stroke="#000" stroke-width="%s">' % _fmt(r / 2))
        for x, y in np.atleast_2d(np.asarray(overlay, dtype=float)):
            out.append(f'<path class="gauge" d="M{_fmt(x - r)} {_fmt(ny - y - r)}l{_fmt(2 * r)} {_fmt(2 * r)}'
                       f'm0 {_fmt(-2 * r)}l{_fmt(-2 * r)} {_fmt(2 * r)}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
