"""Deterministic SVG contour plots.

Output is plain text with fixed number formatting, so identical inputs
give byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np
from skimage import measure

from .grid import ScalarField
from .levelset import contour_extract

PANEL_WIDTH = 320.0
PAD = 24.0
LEGEND_WIDTH = 90.0
TITLE_HEIGHT = 22.0

# endpoints of a blue-to-yellow ramp
_C0 = np.array([48, 18, 140])
_C1 = np.array([245, 200, 30])


def _color(t):
    c = np.rint(_C0 + (_C1 - _C0) * float(t)).astype(int)
    return f"#{c[0]:02x}{c[1]:02x}{c[2]:02x}"


def contour_levels(f: ScalarField, n: int):
    """``n`` equally spaced levels strictly between 0 and max f."""
    M = f.max()
    return [M * (k + 1) / (n + 1) for k in range(n)]


@dataclass
class Panel:
    label: str
    field: ScalarField
    n_levels: int = 10
    note: str = ""


def _path(points, tx, ty):
    parts = [f"M{tx(points[0, 0]):.2f},{ty(points[0, 1]):.2f}"]
    parts += [f"L{tx(x):.2f},{ty(y):.2f}" for x, y in points[1:]]
    return "".join(parts) + "Z"


def _panel_svg(panel: Panel, ox, oy):
    f = panel.field
    g = f.grid
    x0, x1, y0, y1 = g.x[0], g.x[-1], g.y[0], g.y[-1]
    s = PANEL_WIDTH / (x1 - x0)
    height = (y1 - y0) * s

    def tx(x):
        return ox + (x - x0) * s

    def ty(y):
        return oy + TITLE_HEIGHT + (y1 - y) * s

    out = [f'<text x="{ox:.2f}" y="{oy + 15:.2f}" font-size="14" font-family="sans-serif">{escape(panel.label)}</text>']
    for c in measure.find_contours(g.g, 0.0):
        pts = np.column_stack([x0 + c[:, 0] * g.hx, y0 + c[:, 1] * g.hy])
        out.append(f'<path d="{_path(pts, tx, ty)}" fill="none" stroke="#000000" stroke-width="1.5"/>')
    levels = contour_levels(f, panel.n_levels)
    legend = []
    for k, h in enumerate(levels):
        col = _color(k / max(len(levels) - 1, 1))
        for curve in contour_extract(f, h).curves:
            out.append(f'<path d="{_path(curve, tx, ty)}" fill="none" stroke="{col}" stroke-width="1"/>')
        legend.append((h, col))
    lx = ox + PANEL_WIDTH + 10
    for k, (h, col) in enumerate(legend):
        yy = oy + TITLE_HEIGHT + 12 + 14 * k
        out.append(f'<rect x="{lx:.2f}" y="{yy - 9:.2f}" width="10" height="10" fill="{col}"/>')
        out.append(f'<text x="{lx + 14:.2f}" y="{yy:.2f}" font-size="10" font-family="monospace">{h:.4f}</text>')
    if panel.note:
        out.append(
            f'<text x="{ox:.2f}" y="{oy + TITLE_HEIGHT + height + 14:.2f}" font-size="11" '
            f'font-family="sans-serif">{escape(panel.note)}</text>'
        )
    return out, height


def render_svg(rows, path=None, title=""):
    """Grid of panels; ``rows`` is a list of lists of Panel.  Returns the SVG text."""
    body = []
    y = PAD + (TITLE_HEIGHT if title else 0.0)
    width = 0.0
    for row in rows:
        x = PAD
        row_h = 0.0
        for panel in row:
            items, h = _panel_svg(panel, x, y)
            body += items
            x += PANEL_WIDTH + LEGEND_WIDTH + PAD
            row_h = max(row_h, h)
        width = max(width, x)
        y += TITLE_HEIGHT + row_h + 20 + PAD
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{y:.0f}" '
        f'viewBox="0 0 {width:.0f} {y:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{y:.0f}" fill="#ffffff"/>',
    ]
    if title:
        head.append(f'<text x="{PAD:.2f}" y="{PAD + 8:.2f}" font-size="16" font-family="sans-serif">{escape(title)}</text>')
    text = "\n".join(head + body + ["</svg>"]) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def plot_contours(field: ScalarField, out_svg, n_levels=10, label="", note=""):
    return render_svg([[Panel(label, field, n_levels, note)]], out_svg)
