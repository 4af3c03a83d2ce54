"""Level-set geometry of grid fields.

Two independent routes are offered for the coefficients of the averaged
problem on streamlines: a volume route (areas and integrals of -lap psi
over super-level sets, computed cell by cell with marching squares) and a
contour route (quadrature along extracted iso-lines).  The volume route is
the one used downstream; the contour route is a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression
from skimage import measure

from ._cells import cell_polygons, corner_stack, level_crossings
from .grid import ScalarField, bilinear, gradient, laplacian

DEFAULT_LEVELS = 200
TOP_FRACTION = 0.02
GRAD_EPS = 1e-3


class LevelSetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AreaProfile:
    """Super-level-set areas and averaged-problem coefficients on a level grid.

    ``areas`` are the raw cut-cell areas, ``areas_mono`` their non-increasing
    isotonic fit, ``T = -d(areas_mono)/dh`` and ``p = -int_{psi>h} lap psi``.
    """

    levels: np.ndarray
    areas: np.ndarray
    areas_mono: np.ndarray
    T: np.ndarray
    p: np.ndarray
    top: float
    domain_area: float
    monotone_defect: float

    @property
    def K(self):
        return self.levels.size - 1

    def area_at(self, h):
        return np.interp(h, self.levels, self.areas_mono)

    def T_at(self, h):
        return np.interp(h, self.levels, self.T)

    def p_at(self, h):
        return np.interp(h, self.levels, self.p)

    @property
    def regular(self):
        """Mask of levels away from both the boundary value and the maximum."""
        h = self.levels
        return (h > 0) & (h < (1.0 - TOP_FRACTION) * self.top)


def _cell_data(field: ScalarField, weight: ScalarField | None):
    corners = corner_stack(field.extended())
    wc = corner_stack(weight.extended()) if weight is not None else None
    return corners, wc


def superlevel_measure(corners, levels, cell_area, weights=None):
    """Area of {f > h} (and integral of the weight over it) for each level."""
    cmin = corners.min(axis=1)
    cmax = corners.max(axis=1)
    order = np.argsort(cmin)
    smin = cmin[order]
    full_area = np.concatenate([np.cumsum(np.ones(smin.size)[::-1])[::-1], [0.0]])
    if weights is not None:
        wmean = weights.mean(axis=1)[order]
        full_w = np.concatenate([np.cumsum(wmean[::-1])[::-1], [0.0]])
    areas = np.zeros(len(levels))
    integrals = np.zeros(len(levels))
    for k, h in enumerate(levels):
        first = np.searchsorted(smin, h, side="right")
        a = full_area[first]
        w = full_w[first] if weights is not None else 0.0
        part = (cmin <= h) & (cmax > h)
        if part.any():
            c = corners[part]
            frac, cx, cy = cell_polygons(c > h, level_crossings(c, h), c.mean(axis=1) > h)
            a += frac.sum()
            if weights is not None:
                wc = weights[part]
                val = (
                    wc[:, 0] * (1 - cx) * (1 - cy)
                    + wc[:, 1] * cx * (1 - cy)
                    + wc[:, 2] * cx * cy
                    + wc[:, 3] * (1 - cx) * cy
                )
                w += np.sum(frac * val)
        areas[k] = a * cell_area
        integrals[k] = w * cell_area
    return areas, integrals


def area_profile(psi: ScalarField, K: int = DEFAULT_LEVELS, strict=False, defect_tol=1e-3) -> AreaProfile:
    """Areas |{psi > h}|, T(h) and p(h) on K+1 uniform levels in [0, max psi].

    With ``strict`` a raw area sequence that increases by more than
    ``defect_tol * |Omega|`` raises; otherwise the defect is reported.
    """
    if not psi.dirichlet:
        raise LevelSetError("area profiles need a field vanishing on the boundary")
    if psi.min() < -1e-8 * max(abs(psi.max()), 1.0):
        raise LevelSetError("area profiles need a non-negative field")
    grid = psi.grid
    M = psi.max()
    if M <= 0:
        raise LevelSetError("field has no positive values")
    levels = np.linspace(0.0, M, K + 1)
    neg_lap = laplacian(psi) * -1.0
    corners, wc = _cell_data(psi, neg_lap)
    areas, pint = superlevel_measure(corners, levels, grid.hx * grid.hy, wc)
    areas[-1] = 0.0
    pint[-1] = 0.0
    defect = float(np.max(np.diff(areas), initial=0.0)) / grid.area
    if strict and defect > defect_tol:
        raise LevelSetError(f"super-level areas not monotone (defect {defect:.2e} of |Omega|)")
    mono = isotonic_regression(areas, increasing=False).x
    T = -np.gradient(mono, levels)
    T = np.maximum(T, 0.0)
    return AreaProfile(levels, areas, mono, T, pint, M, grid.area, defect)


@dataclass(frozen=True)
class ContourSet:
    level: float
    curves: list  # closed (n, 2) arrays, last vertex == first, interior on the left
    grad_mid: list  # |grad psi| at segment midpoints, one array per curve

    def enclosed_area(self):
        return float(sum(polygon_area(c) for c in self.curves))

    def length(self):
        return float(sum(np.sum(np.hypot(*np.diff(c, axis=0).T)) for c in self.curves))


def polygon_area(c):
    x, y = c[:, 0], c[:, 1]
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


def _grad_extended(psi):
    d = gradient(psi)
    gx = ScalarField(psi.grid, d.ux, dirichlet=False).extended()
    gy = ScalarField(psi.grid, d.uy, dirichlet=False).extended()
    return gx, gy


def contour_extract(psi: ScalarField, h: float, _grad=None) -> ContourSet:
    """Closed iso-lines of ``psi`` at level ``h`` (marching squares)."""
    M = psi.max()
    if not (0.0 < h < M):
        raise LevelSetError(f"level {h} outside the open range (0, {M})")
    grid = psi.grid
    ext = psi.extended()
    raw = measure.find_contours(ext, h)
    gx, gy = _grad if _grad is not None else _grad_extended(psi)
    curves, grads = [], []
    for c in raw:
        xy = np.column_stack([grid.x[0] + c[:, 0] * grid.hx, grid.y[0] + c[:, 1] * grid.hy])
        if not np.allclose(xy[0], xy[-1]):
            xy = np.vstack([xy, xy[:1]])
        if polygon_area(xy) < 0:
            xy = xy[::-1]
        mid = 0.5 * (xy[1:] + xy[:-1])
        gm = np.hypot(bilinear(grid, gx, mid[:, 0], mid[:, 1]), bilinear(grid, gy, mid[:, 0], mid[:, 1]))
        curves.append(xy)
        grads.append(gm)
    return ContourSet(float(h), curves, grads)


@dataclass(frozen=True)
class BoundaryIntegral:
    value: float
    flagged: bool
    min_grad: float


def boundary_integral(psi: ScalarField, h: float, mode: str = "grad", _grad=None) -> BoundaryIntegral:
    """Midpoint quadrature of |grad psi| ("grad") or 1/|grad psi| ("inv_grad") on {psi = h}.

    The value is flagged when the level is near-critical: |grad psi| drops
    below 1e-3 of its maximum on the curve, or the level lies in the top
    2% of the range where the contour is not resolved by the grid.
    """
    if mode not in ("grad", "inv_grad"):
        raise ValueError(f"unknown mode {mode!r}")
    grad = _grad if _grad is not None else _grad_extended(psi)
    cs = contour_extract(psi, h, grad)
    gmax = float(np.hypot(grad[0], grad[1])[psi.grid.inside].max())
    total = 0.0
    gmin = np.inf
    for c, gm in zip(cs.curves, cs.grad_mid):
        ds = np.hypot(*np.diff(c, axis=0).T)
        gmin = min(gmin, float(gm.min()))
        if mode == "grad":
            total += float(np.sum(gm * ds))
        else:
            total += float(np.sum(ds / np.maximum(gm, 1e-300)))
    flagged = gmin < GRAD_EPS * gmax or h > (1.0 - TOP_FRACTION) * psi.max()
    return BoundaryIntegral(total, bool(flagged), gmin)


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple
    kind: str  # "max" | "saddle" | "min"
    value: float


_RING = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


def critical_points(psi: ScalarField) -> list:
    """Interior critical points from 8-neighbour comparison, refined by a quadratic fit."""
    grid = psi.grid
    v = psi.values
    ok = grid.interior.copy()
    # the full ring must be inside
    ins = grid.inside
    ring_in = np.ones_like(ins)
    ring_in[1:-1, 1:-1] = np.all([ins[1 + di : ins.shape[0] - 1 + di, 1 + dj : ins.shape[1] - 1 + dj] for di, dj in _RING], axis=0)
    ok &= ring_in
    ok[[0, -1], :] = False
    ok[:, [0, -1]] = False
    I, J = np.nonzero(ok)
    c = v[I, J]
    ring = np.stack([v[I + di, J + dj] for di, dj in _RING], axis=1)
    diff = ring - c[:, None]
    is_max = np.all(diff < 0, axis=1)
    is_min = np.all(diff > 0, axis=1)
    sgn = diff >= 0
    changes = np.sum(sgn != np.roll(sgn, -1, axis=1), axis=1)
    is_saddle = (changes >= 4) & ~is_max & ~is_min

    found = []
    for mask, kind in ((is_max, "max"), (is_saddle, "saddle"), (is_min, "min")):
        for i, j in zip(I[mask], J[mask]):
            x, y = _refine(grid, v, i, j)
            found.append(CriticalPoint((x, y), kind, float(v[i, j])))
    # merge detections of the same point on neighbouring nodes
    merged = []
    tol = 2.5 * max(grid.hx, grid.hy)
    for cp in sorted(found, key=lambda c: (c.kind, -c.value)):
        if not any(m.kind == cp.kind and np.hypot(m.location[0] - cp.location[0], m.location[1] - cp.location[1]) < tol for m in merged):
            merged.append(cp)
    return merged


def _refine(grid, v, i, j):
    """Stationary point of the 3x3 quadratic fit, clipped to the cell neighbourhood."""
    hx, hy = grid.hx, grid.hy
    fx = (v[i + 1, j] - v[i - 1, j]) / (2 * hx)
    fy = (v[i, j + 1] - v[i, j - 1]) / (2 * hy)
    fxx = (v[i + 1, j] - 2 * v[i, j] + v[i - 1, j]) / hx**2
    fyy = (v[i, j + 1] - 2 * v[i, j] + v[i, j - 1]) / hy**2
    fxy = (v[i + 1, j + 1] - v[i + 1, j - 1] - v[i - 1, j + 1] + v[i - 1, j - 1]) / (4 * hx * hy)
    H = np.array([[fxx, fxy], [fxy, fyy]])
    try:
        d = -np.linalg.solve(H, [fx, fy])
    except np.linalg.LinAlgError:
        d = np.zeros(2)
    d = np.clip(d, [-hx, -hy], [hx, hy])
    return float(grid.x[i] + d[0]), float(grid.y[j] + d[1])


def write_contours_csv(sets, path):
    """``level,curve_id,x,y`` rows for a sequence of ContourSets."""
    with open(path, "w") as fh:
        fh.write("level,curve_id,x,y\n")
        for cs in sets:
            for cid, c in enumerate(cs.curves):
                for x, y in c:
                    fh.write(f"{cs.level!r},{cid},{x:.10g},{y:.10g}\n")
