import re

import numpy as np

from exitflow.critpoint import hessian_at_max
from exitflow.plotting import Panel, contour_levels, plot_contours, render_svg


def _paths(svg):
    return re.findall(r'<path d="([^"]+)" fill="none" stroke="(#[0-9a-f]{6})"', svg)


def test_disc_gives_ten_concentric_circles(tmp_path, tau_disc):
    svg = plot_contours(tau_disc, tmp_path / "d.svg", 10, "disc")
    coloured = [(d, c) for d, c in _paths(svg) if c != "#000000"]
    assert len(coloured) == 10
    assert svg.count('font-family="monospace"') == 10  # one legend entry per level
    assert (tmp_path / "d.svg").read_text() == svg


def test_ellipse_contours_are_nested_ellipses(tau_ellipse):
    levels = contour_levels(tau_ellipse, 5)
    assert np.allclose(levels, [0.4 * k / 6 for k in range(1, 6)], rtol=1e-9)
    svg = render_svg([[Panel("e", tau_ellipse, 5)]])
    assert len([c for _, c in _paths(svg) if c != "#000000"]) == 5


def test_output_is_deterministic(tau_ellipse):
    a = render_svg([[Panel("e", tau_ellipse, 6, "note")]], title="t")
    b = render_svg([[Panel("e", tau_ellipse, 6, "note")]], title="t")
    assert a == b
    assert "note" in a and a.startswith("<svg")


def test_annotation_text(tau_ellipse):
    note = f"Hessian axis ratio {hessian_at_max(tau_ellipse).ratio:.3f}"
    svg = render_svg([[Panel("e", tau_ellipse, 3, note)]])
    assert "Hessian axis ratio 0.500" in svg
