"""Stream functions for test flows.

Every stream function vanishes on the boundary, so its discrete
perpendicular gradient is divergence-free and tangent to the boundary.
On curved domains the boundary factor is the torsion function scaled to
unit maximum.
"""

from __future__ import annotations

import numpy as np

from .elliptic import solve_poisson
from .grid import DomainGrid, ScalarField, VectorField, perp_gradient

FLOWS = ("zero", "cellular", "shear", "perp_tau0")


def _box(grid: DomainGrid):
    x0, x1, y0, y1 = grid.spec.shape_box()
    return x0, x1, y0, y1


def _envelope(grid, tau0):
    if grid.spec.kind == "rectangle":
        X, Y = grid.mesh
        x0, x1, y0, y1 = _box(grid)
        return np.sin(np.pi * (X - x0) / (x1 - x0)) * np.sin(np.pi * (Y - y0) / (y1 - y0))
    return tau0.values / tau0.max()


def stream_function(grid: DomainGrid, kind: str, cells: int = 2, scale: float = 0.1, tau0=None) -> ScalarField:
    """Stream function of the named flow.

    ``cellular``: envelope times sin(cells pi xi) sin(cells pi eta) over the
    shape box (the envelope is dropped on rectangles, where the product
    already vanishes on the boundary).  ``shear``: envelope times the
    centred, normalised y coordinate.  ``perp_tau0``: the torsion function.
    """
    if kind not in FLOWS:
        raise ValueError(f"unknown flow {kind!r}; expected one of {FLOWS}")
    if kind == "zero":
        return ScalarField(grid, np.zeros(grid.shape))
    if tau0 is None:
        tau0 = solve_poisson(grid)
    if kind == "perp_tau0":
        return tau0
    X, Y = grid.mesh
    x0, x1, y0, y1 = _box(grid)
    xi = (X - x0) / (x1 - x0)
    eta = (Y - y0) / (y1 - y0)
    if kind == "cellular":
        cell = np.sin(cells * np.pi * xi) * np.sin(cells * np.pi * eta)
        env = 1.0 if grid.spec.kind == "rectangle" else _envelope(grid, tau0)
        vals = scale * cell * env
    else:
        vals = scale * (2 * eta - 1) * _envelope(grid, tau0)
    return ScalarField(grid, np.where(grid.inside, vals, 0.0))


def flow(grid: DomainGrid, kind: str, tau0=None, **kw) -> VectorField:
    if kind == "zero":
        return VectorField.zero(grid)
    return perp_gradient(stream_function(grid, kind, tau0=tau0, **kw))
