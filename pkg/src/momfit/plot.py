"""SVG rendering of 2-D point clouds and the zero level set of a polynomial."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np
from skimage import measure

from .basis import Polynomial
from .data import bounding_box

GRID = 512
COLORS = {1: "#1f77b4", 2: "#d62728"}


class UnsupportedDimension(ValueError):
    pass


def zero_contours(theta: Polynomial, lo, hi, grid: int = GRID):
    """Polylines of ``theta = 0`` over the box ``[lo, hi]`` by marching squares.

    Returns a list of ``(k, 2)`` arrays in data coordinates.
    """
    if theta.n != 2:
        raise UnsupportedDimension(f"contours need n = 2, got n = {theta.n}")
    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    V = theta(np.column_stack([X.ravel(), Y.ravel()])).reshape(grid, grid)
    out = []
    for c in measure.find_contours(V, 0.0):
        # contour coordinates are fractional grid indices (i along x, j along y)
        px = lo[0] + c[:, 0] * (hi[0] - lo[0]) / (grid - 1)
        py = lo[1] + c[:, 1] * (hi[1] - lo[1]) / (grid - 1)
        out.append(np.column_stack([px, py]))
    return out


def render_svg(classes, theta: Polynomial | None = None, size: int = 600, title: str = "", pad: float = 0.1) -> str:
    """SVG text with one scatter layer per class and the zero level set of ``theta``.

    ``classes`` is a list of ``(points, label)`` pairs with 2-D points.
    """
    for raw, _ in classes:
        if np.size(raw) and np.asarray(raw).shape[-1] != 2:
            raise UnsupportedDimension(f"plotting is 2-D only, got n = {np.asarray(raw).shape[-1]}")
    pts = [np.asarray(p, dtype=np.float64).reshape(-1, 2) if np.size(p) else np.zeros((0, 2)) for p, _ in classes]
    allp = np.vstack(pts) if any(len(p) for p in pts) else np.array([[-1.0, -1.0], [1.0, 1.0]])
    lo, hi = bounding_box(allp, pad)
    span = float(max(hi - lo))

    def tx(p):
        # y axis points up in data space
        return (p[:, 0] - lo[0]) / span * size, size - (p[:, 1] - lo[1]) / span * size

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if title:
        lines.append(f'<title>{escape(title)}</title>')
    r = max(0.6, size / 400)
    for p, (_, label) in zip(pts, classes):
        if not len(p):
            continue
        color = COLORS.get(label, "#555555")
        lines.append(f'<g class="class-{label}" fill="{color}" fill-opacity="0.6">')
        x, y = tx(p)
        lines += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{r:.2f}"/>' for a, b in zip(x, y)]
        lines.append("</g>")
    if theta is not None:
        lines.append('<g class="level-set" fill="none" stroke="black" stroke-width="1.5">')
        for c in zero_contours(theta, lo, hi):
            x, y = tx(c)
            d = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
            lines.append(f'<polyline points="{d}"/>')
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def save_svg(path, classes, theta=None, **kw):
    with open(path, "w") as fh:
        fh.write(render_svg(classes, theta, **kw))
