import xml.etree.ElementTree as ET

import numpy as np
import pytest

from momfit import plot
from momfit.basis import Polynomial

DISK = Polynomial.from_terms(2, 2, {(0, 0): 1.0, (2, 0): -1.0, (0, 2): -1.0})
NS = "{http://www.w3.org/2000/svg}"


def test_circle_contour_within_one_cell():
    lo, hi = np.array([-1.5, -1.5]), np.array([1.5, 1.5])
    lines = plot.zero_contours(DISK, lo, hi, grid=200)
    assert len(lines) == 1
    c = lines[0]
    # closed polyline on the unit circle, to within a grid cell
    assert np.allclose(c[0], c[-1])
    cell = 3.0 / 199
    assert np.abs(np.linalg.norm(c, axis=1) - 1.0).max() <= cell


def test_svg_structure(rng):
    a = rng.uniform(-0.5, 0.5, (20, 2))
    b = rng.uniform(1.5, 2.0, (5, 2))
    root = ET.fromstring(plot.render_svg([(a, 1), (b, 2)], DISK, title="t <1>"))
    assert root.tag == NS + "svg"
    groups = {g.get("class"): g for g in root.iter(NS + "g")}
    assert len(groups["class-1"]) == 20 and len(groups["class-2"]) == 5
    assert len(groups["level-set"].findall(NS + "polyline")) == 1
    assert root.find(NS + "title").text == "t <1>"


def test_svg_without_model_or_points():
    root = ET.fromstring(plot.render_svg([(np.zeros((0, 2)), 1)]))
    assert root.find(NS + "g") is None


def test_three_dimensional_input_rejected(rng):
    with pytest.raises(plot.UnsupportedDimension):
        plot.render_svg([(rng.standard_normal((5, 3)), 1)])
    cube = Polynomial.from_terms(3, 2, {(0, 0, 0): 1.0})
    with pytest.raises(plot.UnsupportedDimension):
        plot.zero_contours(cube, np.zeros(3), np.ones(3))


def test_save_svg(tmp_path):
    path = tmp_path / "fig.svg"
    plot.save_svg(path, [(np.array([[0.0, 0.0], [0.5, 0.5]]), 1)], DISK)
    assert path.read_text().startswith("<svg")
