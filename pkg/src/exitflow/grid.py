"""Cut-cell Cartesian grids, grid fields and discrete operators.

Fields live on the nodes of a uniform grid covering a bounding box.  A node
is *inside* when the domain level function is negative there; only inside
nodes carry unknowns.  Where a grid line leaves the domain between two
nodes, the crossing point is located by bisection on the level function and
stored as a cut fraction ``theta`` in (0, 1] of the spacing.  Dirichlet data
enter through these fractions (Shortley-Weller), so every stored value of a
Dirichlet field is an interior value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage, sparse

from . import shapes
from ._cells import cell_polygons, corner_stack

MIN_RESOLUTION = 16
THETA_MIN = 1e-3


class DomainError(ValueError):
    """Raised for invalid or unsupported domains."""


@dataclass(frozen=True)
class DomainSpec:
    """Shape description plus grid resolution (cell counts)."""

    kind: str
    params: dict = field(default_factory=dict)
    nx: int = 256
    ny: int = 256
    bbox: tuple | None = None
    margin: float = 0.03

    @classmethod
    def disc(cls, r=1.0, n=256, cx=0.0, cy=0.0, **kw):
        return cls("disc", {"r": r, "cx": cx, "cy": cy}, n, n, **kw)

    @classmethod
    def ellipse(cls, a=2.0, b=1.0, n=256, cx=0.0, cy=0.0, **kw):
        return cls("ellipse", {"a": a, "b": b, "cx": cx, "cy": cy}, n, n, **kw)

    @classmethod
    def rectangle(cls, lx=1.0, ly=1.0, n=256, cx=None, cy=None, **kw):
        cx = 0.5 * lx if cx is None else cx
        cy = 0.5 * ly if cy is None else cy
        return cls("rectangle", {"lx": lx, "ly": ly, "cx": cx, "cy": cy}, n, n, **kw)

    @classmethod
    def implicit(cls, expr, bbox, n=256, **kw):
        return cls("implicit", {"expr": expr}, n, n, bbox=tuple(bbox), **kw)

    def level_function(self):
        p = self.params
        if self.kind == "disc":
            return lambda x, y: shapes.disc(x, y, p.get("cx", 0.0), p.get("cy", 0.0), p["r"])
        if self.kind == "ellipse":
            return lambda x, y: shapes.ellipse(
                x, y, p.get("cx", 0.0), p.get("cy", 0.0), p["a"], p["b"]
            )
        if self.kind == "rectangle":
            return lambda x, y: shapes.rect(x, y, p["cx"], p["cy"], p["lx"], p["ly"])
        if self.kind == "implicit":
            return shapes.parse_expression(p["expr"])
        raise DomainError(f"unknown shape kind {self.kind!r}")

    def shape_box(self):
        p = self.params
        if self.kind == "disc":
            cx, cy, r = p.get("cx", 0.0), p.get("cy", 0.0), p["r"]
            return (cx - r, cx + r, cy - r, cy + r)
        if self.kind == "ellipse":
            cx, cy = p.get("cx", 0.0), p.get("cy", 0.0)
            return (cx - p["a"], cx + p["a"], cy - p["b"], cy + p["b"])
        if self.kind == "rectangle":
            return (
                p["cx"] - 0.5 * p["lx"],
                p["cx"] + 0.5 * p["lx"],
                p["cy"] - 0.5 * p["ly"],
                p["cy"] + 0.5 * p["ly"],
            )
        if self.bbox is None:
            raise DomainError("implicit domains need an explicit bounding box")
        return tuple(self.bbox)

    def bounding_box(self):
        if self.bbox is not None:
            return tuple(float(v) for v in self.bbox)
        x0, x1, y0, y1 = self.shape_box()
        px = self.margin * (x1 - x0)
        py = self.margin * (y1 - y0)
        return (x0 - px, x1 + px, y0 - py, y1 + py)

    def exact_area(self):
        """Analytic area for the named shapes, ``None`` for implicit ones."""
        p = self.params
        if self.kind == "disc":
            return np.pi * p["r"] ** 2
        if self.kind == "ellipse":
            return np.pi * p["a"] * p["b"]
        if self.kind == "rectangle":
            return p["lx"] * p["ly"]
        return None


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Rasterised domain.  Arrays are indexed ``[i, j]`` with i along x."""

    spec: DomainSpec
    x: np.ndarray
    y: np.ndarray
    g: np.ndarray
    inside: np.ndarray
    # neighbour-inside flags and cut fractions, keyed "xp", "xm", "yp", "ym"
    nbr: dict
    theta: dict
    # crossing fractions on horizontal (nx, ny+1) and vertical (nx+1, ny) edges
    cross_h: np.ndarray
    cross_v: np.ndarray

    @property
    def nx(self):
        return self.x.size - 1

    @property
    def ny(self):
        return self.y.size - 1

    @property
    def hx(self):
        return float(self.x[1] - self.x[0])

    @property
    def hy(self):
        return float(self.y[1] - self.y[0])

    @property
    def shape(self):
        return self.inside.shape

    @cached_property
    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def index(self):
        idx = np.full(self.shape, -1, dtype=np.int64)
        idx[self.inside] = np.arange(int(self.inside.sum()))
        return idx

    @property
    def n_unknowns(self):
        return int(self.inside.sum())

    @cached_property
    def nodes(self):
        """(I, J) integer coordinates of the unknowns in storage order."""
        return np.nonzero(self.inside)

    @cached_property
    def boundary_adjacent(self):
        allin = self.nbr["xp"] & self.nbr["xm"] & self.nbr["yp"] & self.nbr["ym"]
        return self.inside & ~allin

    @cached_property
    def interior(self):
        """Inside nodes whose four neighbours are inside."""
        return self.inside & ~self.boundary_adjacent

    @cached_property
    def deep_interior(self):
        """Interior nodes whose four neighbours are interior as well."""
        it = self.interior
        out = it.copy()
        out[1:-1, 1:-1] &= it[2:, 1:-1] & it[:-2, 1:-1] & it[1:-1, 2:] & it[1:-1, :-2]
        return out

    @cached_property
    def cell_geometry(self):
        """Inside-area fraction and local centroid of every cell."""
        ins = corner_stack(self.inside)
        cross = self._cell_crossings(self.cross_h, self.cross_v)
        center = corner_stack(-self.g).mean(axis=1) > 0
        return cell_polygons(ins, cross, center)

    @staticmethod
    def _cell_crossings(ch, cv):
        return np.stack(
            [ch[:, :-1].ravel(), cv[1:, :].ravel(), 1.0 - ch[:, 1:].ravel(), 1.0 - cv[:-1, :].ravel()],
            axis=1,
        )

    @property
    def area(self):
        return float(self.cell_geometry[0].sum() * self.hx * self.hy)

    @property
    def origin(self):
        return float(self.x[0]), float(self.y[0])

    def contains(self, px, py):
        g = self.spec.level_function()
        return np.asarray(g(np.asarray(px, float), np.asarray(py, float))) <= 0.0

    # operator matrices act on the vector of unknowns
    @cached_property
    def _ops(self):
        return _build_operators(self)

    @property
    def laplacian_matrix(self):
        """Shortley-Weller Laplacian with homogeneous Dirichlet data."""
        return self._ops["lap_dir"]

    def derivative_matrix(self, axis, dirichlet=True):
        key = ("dx" if axis == 0 else "dy") + ("_dir" if dirichlet else "_gen")
        return self._ops[key]

    def upwind_matrices(self, axis):
        """One-sided (backward, forward) first differences with Dirichlet data."""
        key = "dx" if axis == 0 else "dy"
        return self._ops[key + "_bwd"], self._ops[key + "_fwd"]


def _bisect_edges(g, xa, ya, xb, yb, iters=52):
    """Crossing fraction t in [0, 1] of g along segments a->b (sign change assumed)."""
    lo = np.zeros_like(xa)
    hi = np.ones_like(xa)
    ina = g(xa, ya) < 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        same = (g(xa + mid * (xb - xa), ya + mid * (yb - ya)) < 0) == ina
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def build_domain(spec: DomainSpec) -> DomainGrid:
    """Rasterise ``spec``: classify nodes, locate boundary crossings, measure |Omega|."""
    if spec.nx < MIN_RESOLUTION or spec.ny < MIN_RESOLUTION:
        raise DomainError(f"resolution must be at least {MIN_RESOLUTION} cells per direction")
    gfun = spec.level_function()
    x0, x1, y0, y1 = spec.bounding_box()
    if not (x1 > x0 and y1 > y0):
        raise DomainError("degenerate bounding box")
    x = np.linspace(x0, x1, spec.nx + 1)
    y = np.linspace(y0, y1, spec.ny + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    g = np.asarray(gfun(X, Y), dtype=float)
    if not np.all(np.isfinite(g)):
        raise DomainError("level function is not finite on the grid")
    inside = g < 0
    if not inside.any():
        raise DomainError("empty interior")
    frame = np.concatenate([inside[0], inside[-1], inside[:, 0], inside[:, -1]])
    if frame.any():
        raise DomainError("domain boundary must lie strictly inside the bounding box")
    _, ncomp = ndimage.label(inside)
    if ncomp != 1:
        raise DomainError(f"disconnected interior ({ncomp} components); simply connected domains only")
    _, nholes = ndimage.label(~inside, structure=np.ones((3, 3)))
    if nholes != 1:
        raise DomainError("multiply connected domain; simply connected domains only")

    # crossing fractions on edges with a sign change
    cross_h = np.full((spec.nx, spec.ny + 1), 0.5)
    sel = inside[:-1, :] != inside[1:, :]
    ii, jj = np.nonzero(sel)
    cross_h[sel] = _bisect_edges(gfun, x[ii], y[jj], x[ii + 1], y[jj])
    cross_v = np.full((spec.nx + 1, spec.ny), 0.5)
    sel = inside[:, :-1] != inside[:, 1:]
    ii, jj = np.nonzero(sel)
    cross_v[sel] = _bisect_edges(gfun, x[ii], y[jj], x[ii], y[jj + 1])

    nbr = {k: np.zeros_like(inside) for k in ("xp", "xm", "yp", "ym")}
    theta = {k: np.ones(inside.shape) for k in ("xp", "xm", "yp", "ym")}
    nbr["xp"][:-1] = inside[1:]
    nbr["xm"][1:] = inside[:-1]
    nbr["yp"][:, :-1] = inside[:, 1:]
    nbr["ym"][:, 1:] = inside[:, :-1]
    theta["xp"][:-1] = np.where(inside[:-1] & ~inside[1:], cross_h, 1.0)
    theta["xm"][1:] = np.where(inside[1:] & ~inside[:-1], 1.0 - cross_h, 1.0)
    theta["yp"][:, :-1] = np.where(inside[:, :-1] & ~inside[:, 1:], cross_v, 1.0)
    theta["ym"][:, 1:] = np.where(inside[:, 1:] & ~inside[:, :-1], 1.0 - cross_v, 1.0)
    for k in theta:
        theta[k] = np.clip(theta[k], THETA_MIN, 1.0)

    return DomainGrid(spec, x, y, g, inside, nbr, theta, cross_h, cross_v)


def _build_operators(grid: DomainGrid):
    I, J = grid.nodes
    n = I.size
    pad = np.pad(grid.index, 2, constant_values=-1)

    def nb(di, dj):
        return pad[I + 2 + di, J + 2 + dj]

    rows = np.arange(n)
    ops = {}
    lap = []
    for axis, h, p, m in ((0, grid.hx, "xp", "xm"), (1, grid.hy, "yp", "ym")):
        step = (1, 0) if axis == 0 else (0, 1)
        ip = nb(*step)
        im = nb(-step[0], -step[1])
        ipp = nb(2 * step[0], 2 * step[1])
        imm = nb(-2 * step[0], -2 * step[1])
        a = grid.theta[m][I, J] * h
        b = grid.theta[p][I, J] * h
        hasp = ip >= 0
        hasm = im >= 0

        # Dirichlet first derivative: quadratic through (-a, fm), (0, f0), (b, fp)
        wm = -b / (a * (a + b))
        w0 = (b - a) / (a * b)
        wp = a / (b * (a + b))
        ops[("dx" if axis == 0 else "dy") + "_dir"] = _coo(
            n, [(rows, rows, w0), (rows[hasm], im[hasm], wm[hasm]), (rows[hasp], ip[hasp], wp[hasp])]
        )
        # Shortley-Weller second derivative
        cm = 2.0 / (a * (a + b))
        cp = 2.0 / (b * (a + b))
        lap += [(rows, rows, -2.0 / (a * b)), (rows[hasm], im[hasm], cm[hasm]), (rows[hasp], ip[hasp], cp[hasp])]

        # one-sided first differences honouring the cut (for upwinding)
        ops[("dx" if axis == 0 else "dy") + "_bwd"] = _coo(
            n, [(rows, rows, 1.0 / a), (rows[hasm], im[hasm], -1.0 / a[hasm])]
        )
        ops[("dx" if axis == 0 else "dy") + "_fwd"] = _coo(
            n, [(rows, rows, -1.0 / b), (rows[hasp], ip[hasp], 1.0 / b[hasp])]
        )

        # general (no boundary data) derivative from inside values only
        both = hasp & hasm
        onlym = hasm & ~hasp
        onlyp = hasp & ~hasm
        mm2 = onlym & (imm >= 0)
        mm1 = onlym & (imm < 0)
        pp2 = onlyp & (ipp >= 0)
        pp1 = onlyp & (ipp < 0)
        ent = [
            (rows[both], ip[both], np.full(both.sum(), 0.5 / h)),
            (rows[both], im[both], np.full(both.sum(), -0.5 / h)),
            (rows[mm2], rows[mm2], np.full(mm2.sum(), 1.5 / h)),
            (rows[mm2], im[mm2], np.full(mm2.sum(), -2.0 / h)),
            (rows[mm2], imm[mm2], np.full(mm2.sum(), 0.5 / h)),
            (rows[mm1], rows[mm1], np.full(mm1.sum(), 1.0 / h)),
            (rows[mm1], im[mm1], np.full(mm1.sum(), -1.0 / h)),
            (rows[pp2], rows[pp2], np.full(pp2.sum(), -1.5 / h)),
            (rows[pp2], ip[pp2], np.full(pp2.sum(), 2.0 / h)),
            (rows[pp2], ipp[pp2], np.full(pp2.sum(), -0.5 / h)),
            (rows[pp1], rows[pp1], np.full(pp1.sum(), -1.0 / h)),
            (rows[pp1], ip[pp1], np.full(pp1.sum(), 1.0 / h)),
        ]
        ops[("dx" if axis == 0 else "dy") + "_gen"] = _coo(n, ent)
        h2 = h * h
        ent2 = [
            (rows[both], rows[both], np.full(both.sum(), -2.0 / h2)),
            (rows[both], ip[both], np.full(both.sum(), 1.0 / h2)),
            (rows[both], im[both], np.full(both.sum(), 1.0 / h2)),
            (rows[mm2], rows[mm2], np.full(mm2.sum(), 1.0 / h2)),
            (rows[mm2], im[mm2], np.full(mm2.sum(), -2.0 / h2)),
            (rows[mm2], imm[mm2], np.full(mm2.sum(), 1.0 / h2)),
            (rows[pp2], rows[pp2], np.full(pp2.sum(), 1.0 / h2)),
            (rows[pp2], ip[pp2], np.full(pp2.sum(), -2.0 / h2)),
            (rows[pp2], ipp[pp2], np.full(pp2.sum(), 1.0 / h2)),
        ]
        ops[("dxx" if axis == 0 else "dyy") + "_gen"] = _coo(n, ent2)
    ops["lap_dir"] = _coo(n, lap)
    ops["lap_gen"] = (ops["dxx_gen"] + ops["dyy_gen"]).tocsr()
    return ops


def _coo(n, entries):
    r = np.concatenate([e[0] for e in entries])
    c = np.concatenate([e[1] for e in entries])
    v = np.concatenate([np.broadcast_to(e[2], e[0].shape) for e in entries])
    return sparse.csr_matrix((v, (r, c)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node values on a grid; zero at exterior nodes.

    ``dirichlet`` marks fields that vanish on the domain boundary; their
    derivatives near the boundary use the cut points as data.
    """

    grid: DomainGrid
    values: np.ndarray
    dirichlet: bool = True

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        v[~self.grid.inside] = 0.0
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_vector(cls, grid, vec, dirichlet=True):
        v = np.zeros(grid.shape)
        v[grid.inside] = vec
        return cls(grid, v, dirichlet)

    @classmethod
    def from_function(cls, grid, fn, dirichlet=True):
        X, Y = grid.mesh
        return cls(grid, np.asarray(fn(X, Y), dtype=float) * np.ones(grid.shape), dirichlet)

    @property
    def vector(self):
        return self.values[self.grid.inside]

    def max(self):
        return float(self.vector.max())

    def min(self):
        return float(self.vector.min())

    def argmax(self):
        """Integer node coordinates (i, j) of the largest value."""
        v = np.where(self.grid.inside, self.values, -np.inf)
        return np.unravel_index(int(np.argmax(v)), v.shape)

    def map(self, fn, dirichlet=None):
        d = self.dirichlet if dirichlet is None else dirichlet
        return ScalarField.from_vector(self.grid, fn(self.vector), d)

    def __add__(self, other):
        return ScalarField.from_vector(self.grid, self.vector + _vec(other), self.dirichlet)

    def __sub__(self, other):
        return ScalarField.from_vector(self.grid, self.vector - _vec(other), self.dirichlet)

    def __mul__(self, c):
        return ScalarField.from_vector(self.grid, self.vector * _vec(c), self.dirichlet)

    __rmul__ = __mul__

    def extended(self):
        """Node array with ghost values at exterior nodes.

        Dirichlet fields are extrapolated linearly through the zero at the cut
        point, so marching squares and bilinear interpolation reproduce the
        boundary; other fields take the value of the nearest inside node.
        """
        return _extend(self.grid, self.values, self.dirichlet)


def _vec(other):
    return other.vector if isinstance(other, ScalarField) else other


def _extend(grid, values, dirichlet):
    ins = grid.inside
    if not dirichlet:
        _, (ni, nj) = ndimage.distance_transform_edt(~ins, return_indices=True)
        return values[ni, nj]
    out = np.array(values, dtype=float)
    acc = np.zeros(grid.shape)
    cnt = np.zeros(grid.shape)
    # outside node q reached from inside node p along +x: theta = theta_xp[p]
    for key, sl_p, sl_q in (
        ("xp", (slice(0, -1), slice(None)), (slice(1, None), slice(None))),
        ("xm", (slice(1, None), slice(None)), (slice(0, -1), slice(None))),
        ("yp", (slice(None), slice(0, -1)), (slice(None), slice(1, None))),
        ("ym", (slice(None), slice(1, None)), (slice(None), slice(0, -1))),
    ):
        src = ins[sl_p] & ~ins[sl_q]
        th = grid.theta[key][sl_p]
        ghost = -values[sl_p] * (1.0 - th) / th
        acc[sl_q] += np.where(src, ghost, 0.0)
        cnt[sl_q] += src
    near = ~ins & (cnt > 0)
    out[near] = acc[near] / cnt[near]
    far = ~ins & (cnt == 0)
    scale = max(float(np.abs(values[ins]).max()), 1e-300)
    floor = min(float(out[near].min()) if near.any() else 0.0, 0.0)
    out[far] = floor - scale
    return out


@dataclass(frozen=True, eq=False)
class VectorField:
    """Two node arrays (x and y components) on a grid.

    ``tangential`` is set when the field was built as the perpendicular
    gradient of a stream function vanishing on the boundary.
    """

    grid: DomainGrid
    ux: np.ndarray
    uy: np.ndarray
    tangential: bool = False

    def __post_init__(self):
        for name in ("ux", "uy"):
            v = np.array(getattr(self, name), dtype=float) * np.ones(self.grid.shape)
            v[~self.grid.inside] = 0.0
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape), tangential=True)

    def sup_norm(self):
        ins = self.grid.inside
        return float(np.sqrt(self.ux[ins] ** 2 + self.uy[ins] ** 2).max())

    def scaled(self, c):
        return VectorField(self.grid, self.ux * c, self.uy * c, self.tangential)


def gradient(f: ScalarField) -> VectorField:
    g = f.grid
    vec = f.vector
    gx = g.derivative_matrix(0, f.dirichlet) @ vec
    gy = g.derivative_matrix(1, f.dirichlet) @ vec
    ux = np.zeros(g.shape)
    uy = np.zeros(g.shape)
    ux[g.inside] = gx
    uy[g.inside] = gy
    return VectorField(g, ux, uy)


def perp_gradient(f: ScalarField) -> VectorField:
    """(-d_y f, d_x f); tangential to the boundary when f vanishes there."""
    d = gradient(f)
    return VectorField(f.grid, -d.uy, d.ux, tangential=f.dirichlet)


def laplacian(f: ScalarField) -> ScalarField:
    g = f.grid
    mat = g.laplacian_matrix if f.dirichlet else g._ops["lap_gen"]
    return ScalarField.from_vector(g, mat @ f.vector, dirichlet=False)


def divergence(v: VectorField) -> ScalarField:
    g = v.grid
    ins = g.inside
    out = g.derivative_matrix(0, False) @ v.ux[ins] + g.derivative_matrix(1, False) @ v.uy[ins]
    return ScalarField.from_vector(g, out, dirichlet=False)


def bilinear(grid, values, px, py):
    """Bilinear interpolation of a full node array at arbitrary points (no checks)."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    fx = (px - grid.x[0]) / grid.hx
    fy = (py - grid.y[0]) / grid.hy
    i = np.clip(np.floor(fx).astype(int), 0, grid.nx - 1)
    j = np.clip(np.floor(fy).astype(int), 0, grid.ny - 1)
    s = fx - i
    t = fy - j
    v = values
    return (
        v[i, j] * (1 - s) * (1 - t)
        + v[i + 1, j] * s * (1 - t)
        + v[i + 1, j + 1] * s * t
        + v[i, j + 1] * (1 - s) * t
    )


def interpolate(f: ScalarField, point) -> float:
    """Bilinear value of ``f`` at a point of the closed domain."""
    px, py = float(point[0]), float(point[1])
    if not bool(f.grid.contains(px, py)):
        raise ValueError(f"point ({px}, {py}) lies outside the domain")
    return float(bilinear(f.grid, f.extended(), px, py))


def write_field_csv(f: ScalarField, path):
    """Header ``nx,ny,hx,hy,x0,y0`` and its values, then ``i,j,value`` rows."""
    g = f.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["nx", "ny", "hx", "hy", "x0", "y0"])
        w.writerow([g.nx, g.ny] + [repr(float(v)) for v in (g.hx, g.hy, g.x[0], g.y[0])])
        w.writerow(["i", "j", "value"])
        I, J = g.nodes
        vals = f.values[I, J]
        for i, j, v in zip(I.tolist(), J.tolist(), vals.tolist()):
            w.writerow([i, j, repr(v)])


def read_field_csv(path, grid: DomainGrid, dirichlet=True) -> ScalarField:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        try:
            names = next(r)
            head = next(r)
            cols = next(r)
        except StopIteration:
            raise ValueError(f"{path}: truncated field file") from None
        if names != ["nx", "ny", "hx", "hy", "x0", "y0"] or cols != ["i", "j", "value"]:
            raise ValueError(f"{path}: malformed field header")
        nx, ny = int(head[0]), int(head[1])
        hx, hy, x0, y0 = (float(v) for v in head[2:])
        if (nx, ny) != (grid.nx, grid.ny) or not np.allclose(
            [hx, hy, x0, y0], [grid.hx, grid.hy, grid.x[0], grid.y[0]], rtol=1e-9, atol=1e-12
        ):
            raise ValueError(f"{path}: field grid does not match the configured domain")
        vals = np.zeros(grid.shape)
        seen = np.zeros(grid.shape, dtype=bool)
        for row in r:
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: malformed row {row!r}")
            i, j = int(row[0]), int(row[1])
            if not grid.inside[i, j]:
                raise ValueError(f"{path}: node ({i}, {j}) is not inside the domain")
            vals[i, j] = float(row[2])
            seen[i, j] = True
    if not np.array_equal(seen, grid.inside):
        raise ValueError(f"{path}: field does not cover every inside node")
    return ScalarField(grid, vals, dirichlet)
