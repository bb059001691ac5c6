import xml.etree.ElementTree as ET

import numpy as np

from gaugecvt.grid import Grid, ScalarField
from gaugecvt.render import render_svg

NS = "{http://www.w3.org/2000/svg}"


def _classes(svg):
    root = ET.fromstring(svg)
    return root, [el.get("class") for el in root.iter()]


def test_single_generator_at_centroid():
    dens = ScalarField(Grid(6, 4), np.ones(24))
    root, classes = _classes(render_svg(dens, [[3.0, 2.0]]))
    circles = [el for el in root.iter(NS + "circle")]
    assert len(circles) == 1
    assert (float(circles[0].get("cx")), float(circles[0].get("cy"))) == (3.0, 2.0)


def test_one_marker_per_generator_and_layers():
    rng = np.random.default_rng(0)
    dens = ScalarField(Grid(12, 9), rng.random(108))
    gens = rng.random((7, 2)) * [12, 9]
    root, classes = _classes(render_svg(dens, gens))
    assert classes.count("generator") == 7
    assert "density" in classes and "voronoi" in classes
    assert "gauge" not in classes


def test_overlay_uses_distinct_glyph():
    dens = ScalarField(Grid(5, 5), np.linspace(0, 1, 25))
    svg = render_svg(dens, [[1, 1], [4, 4]], overlay=[[2, 2], [3, 1], [0.5, 4]])
    root, classes = _classes(svg)
    assert classes.count("generator") == 2 and classes.count("gauge") == 3


def test_masked_cells_not_painted():
    mask = np.ones((3, 3), bool)
    mask[1, 1] = False
    dens = ScalarField(Grid(3, 3, mask=mask), np.ones(8))
    root, _ = _classes(render_svg(dens, [[0.5, 0.5]]))
    painted = sum(int(r.get("width")) for r in root.iter(NS + "rect"))
    assert painted == 8
