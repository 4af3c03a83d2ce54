"""Per-cell marching-squares polygons.

Each grid cell is mapped to the unit square with corners ordered
counter-clockwise: c0=(0,0), c1=(1,0), c2=(1,1), c3=(0,1).  Edge k joins
corner k to corner k+1 (mod 4) and a crossing on it is stored as the
fraction of the way from corner k.
"""

from __future__ import annotations

import numpy as np

_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def _edge_point(k, t):
    p = _CORNERS[k]
    q = _CORNERS[(k + 1) % 4]
    return p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t


def _shoelace(xs, ys):
    """Signed area and first moments of closed polygons (rows)."""
    xn = np.roll(xs, -1, axis=1)
    yn = np.roll(ys, -1, axis=1)
    cross = xs * yn - xn * ys
    area = 0.5 * cross.sum(axis=1)
    mx = ((xs + xn) * cross).sum(axis=1) / 6.0
    my = ((ys + yn) * cross).sum(axis=1) / 6.0
    return area, mx, my


def cell_polygons(inside, cross, center_inside=None):
    """Area fraction and centroid of the inside part of each unit cell.

    Parameters
    ----------
    inside : (m, 4) bool
        Corner membership.
    cross : (m, 4) float
        Crossing fraction on each edge; only read where membership changes.
    center_inside : (m,) bool, optional
        Resolves the two saddle configurations; ``True`` joins the two
        inside corners through the cell centre.

    Returns
    -------
    frac, cx, cy : (m,) arrays
        Inside area in units of the cell area and its centroid in local
        coordinates (centroid is 0.5, 0.5 for empty cells).
    """
    inside = np.asarray(inside, dtype=bool)
    m = inside.shape[0]
    xs = np.full((m, 8), np.nan)
    ys = np.full((m, 8), np.nan)
    for k in range(4):
        xs[inside[:, k], 2 * k] = _CORNERS[k, 0]
        ys[inside[:, k], 2 * k] = _CORNERS[k, 1]
        change = inside[:, k] != inside[:, (k + 1) % 4]
        ex, ey = _edge_point(k, cross[change, k])
        xs[change, 2 * k + 1] = ex
        ys[change, 2 * k + 1] = ey

    valid = ~np.isnan(xs)
    # forward fill with wrap-around: repeated vertices add nothing to the shoelace sum
    for _ in range(2):
        for k in range(8):
            prev = (k - 1) % 8
            gap = np.isnan(xs[:, k])
            xs[gap, k] = xs[gap, prev]
            ys[gap, k] = ys[gap, prev]
    empty = ~valid.any(axis=1)
    xs[empty] = 0.0
    ys[empty] = 0.0

    area, mx, my = _shoelace(xs, ys)

    # saddle cells: the walk above always joins the diagonal corners; split
    # them when the centre is outside by removing the central quadrilateral
    saddle = (inside[:, 0] == inside[:, 2]) & (inside[:, 1] == inside[:, 3]) & (
        inside[:, 0] != inside[:, 1]
    )
    if center_inside is None:
        center_inside = np.ones(m, dtype=bool)
    split = saddle & ~np.asarray(center_inside, dtype=bool)
    if split.any():
        qx = np.empty((int(split.sum()), 4))
        qy = np.empty_like(qx)
        for k in range(4):
            qx[:, k], qy[:, k] = _edge_point(k, cross[split, k])
        qa, qmx, qmy = _shoelace(qx, qy)
        # quad orientation follows the polygon walk, so subtract signed quantities
        sign = np.sign(area[split]) * np.sign(qa)
        area[split] -= sign * qa
        mx[split] -= sign * qmx
        my[split] -= sign * qmy

    frac = np.abs(area)
    with np.errstate(invalid="ignore", divide="ignore"):
        cx = np.where(frac > 1e-14, mx / area, 0.5)
        cy = np.where(frac > 1e-14, my / area, 0.5)
    return frac, cx, cy


def corner_stack(values):
    """Stack the four corner values of every cell of a node array.

    ``values`` has shape (nx+1, ny+1); the result has shape (nx*ny, 4) in
    cell order ``c = i*ny + j``.
    """
    v = np.asarray(values)
    return np.stack(
        [v[:-1, :-1].ravel(), v[1:, :-1].ravel(), v[1:, 1:].ravel(), v[:-1, 1:].ravel()],
        axis=1,
    )


def level_crossings(corners, level):
    """Linear-interpolation crossing fractions for ``corners`` at ``level``."""
    a = corners
    b = np.roll(corners, -1, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = (level - a) / (b - a)
    return np.clip(np.nan_to_num(t, nan=0.5), 0.0, 1.0)
