"""Exit-time solver for -lap(tau) + A u.grad(tau) = f, tau = 0 on the boundary."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .grid import DomainGrid, ScalarField, VectorField, divergence

log = logging.getLogger(__name__)

DIV_TOL = 1e-8
TANGENT_TOL = 1e-6


class SolverError(RuntimeError):
    """Linear solve failed; ``diagnostics`` carries what was measured."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class FlowPreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    amplitude: float = 0.0
    scheme: str = "auto"
    tol: float = 1e-10
    max_iter: int = 1000
    method: str = "direct"
    allow_nonconforming: bool = False
    # "auto" retries with upwinding when the centered solution dips below -floor
    positivity_floor: float = 1e-10

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if not (0 < self.tol <= 1e-4):
            raise ValueError("tolerance must lie in (0, 1e-4]")
        if self.scheme not in ("centered", "upwind", "auto"):
            raise ValueError(f"unknown advection scheme {self.scheme!r}")
        if self.method not in ("direct", "gmres"):
            raise ValueError(f"unknown linear method {self.method!r}")


@dataclass(frozen=True)
class FlowCheck:
    max_divergence: float
    max_normal: float
    sup_norm: float
    tangential_by_construction: bool

    @property
    def ok(self):
        if self.sup_norm == 0.0:
            return True
        div_ok = self.max_divergence <= DIV_TOL * max(self.sup_norm, 1.0)
        tan_ok = self.tangential_by_construction or self.max_normal <= TANGENT_TOL * self.sup_norm
        return div_ok and tan_ok


@dataclass(frozen=True, eq=False)
class ExitTimeSolution:
    tau: ScalarField
    residual: float
    iterations: int
    scheme: str
    peclet: float
    flow_check: FlowCheck
    nonconforming: bool = False

    @property
    def upwinded(self):
        return self.scheme == "upwind"


def check_flow(grid: DomainGrid, u: VectorField) -> FlowCheck:
    """Discrete divergence on deep-interior nodes and normal flow at the boundary."""
    div = divergence(u).values
    deep = grid.deep_interior
    maxdiv = float(np.abs(div[deep]).max()) if deep.any() else 0.0
    # outward normal from the level function at boundary-adjacent nodes
    gx, gy = np.gradient(grid.g, grid.hx, grid.hy)
    ba = grid.boundary_adjacent
    nrm = np.hypot(gx[ba], gy[ba])
    nrm[nrm == 0] = 1.0
    normal = np.abs(u.ux[ba] * gx[ba] + u.uy[ba] * gy[ba]) / nrm
    return FlowCheck(maxdiv, float(normal.max()) if normal.size else 0.0, u.sup_norm(), u.tangential)


def grid_peclet(grid: DomainGrid, u: VectorField, amplitude: float) -> float:
    ins = grid.inside
    return float(
        amplitude * max(np.abs(u.ux[ins]).max() * grid.hx, np.abs(u.uy[ins]).max() * grid.hy) / 2.0
    )


def advection_matrix(grid: DomainGrid, u: VectorField, scheme: str):
    """Discrete u.grad acting on Dirichlet unknowns."""
    ins = grid.inside
    ux = u.ux[ins]
    uy = u.uy[ins]
    if scheme == "centered":
        return sparse.diags(ux) @ grid.derivative_matrix(0) + sparse.diags(uy) @ grid.derivative_matrix(1)
    bx, fx = grid.upwind_matrices(0)
    by, fy = grid.upwind_matrices(1)
    return (
        sparse.diags(np.maximum(ux, 0)) @ bx
        + sparse.diags(np.minimum(ux, 0)) @ fx
        + sparse.diags(np.maximum(uy, 0)) @ by
        + sparse.diags(np.minimum(uy, 0)) @ fy
    )


def solve_exit_time(
    grid: DomainGrid,
    u: VectorField | None = None,
    opts: SolveOptions | None = None,
    source=1.0,
) -> ExitTimeSolution:
    """Solve -lap(tau) + A u.grad(tau) = source with tau = 0 on the boundary.

    ``source`` is a scalar or a vector over the unknowns.  The relative
    residual of the returned solution is at most ``opts.tol``.
    """
    opts = opts or SolveOptions()
    if u is None:
        u = VectorField.zero(grid)
    A = float(opts.amplitude)
    fc = check_flow(grid, u)
    nonconforming = False
    if A > 0 and not fc.ok:
        if not opts.allow_nonconforming:
            raise FlowPreconditionError(
                f"flow is not discretely divergence-free and tangential "
                f"(div {fc.max_divergence:.2e}, normal {fc.max_normal:.2e}, |u| {fc.sup_norm:.2e})"
            )
        warnings.warn("proceeding with a non-conforming flow", RuntimeWarning, stacklevel=2)
        nonconforming = True

    pe = grid_peclet(grid, u, A)
    if opts.scheme == "auto":
        sol = _solve(grid, u, A, "centered", opts, source, pe, fc, nonconforming)
        if sol.tau.vector.min(initial=0.0) >= -opts.positivity_floor * max(sol.tau.max(), 1.0):
            return sol
        log.info("centered solution violates the maximum principle at Pe=%.3g; upwinding", pe)
        return _solve(grid, u, A, "upwind", opts, source, pe, fc, nonconforming)
    return _solve(grid, u, A, opts.scheme, opts, source, pe, fc, nonconforming)


def _solve(grid, u, A, scheme, opts, source, pe, fc, nonconforming):
    mat = -grid.laplacian_matrix
    if A > 0 and fc.sup_norm > 0:
        mat = mat + A * advection_matrix(grid, u, scheme)
    mat = mat.tocsc()
    rhs = np.broadcast_to(np.asarray(source, dtype=float), (grid.n_unknowns,)).copy()
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        sol = np.zeros_like(rhs)
        return ExitTimeSolution(ScalarField.from_vector(grid, sol), 0.0, 0, scheme, pe, fc, nonconforming)

    iters = 1
    if opts.method == "direct":
        sol = spla.spsolve(mat, rhs)
    else:
        ilu = spla.spilu(mat, drop_tol=1e-5, fill_factor=20)
        prec = spla.LinearOperator(mat.shape, ilu.solve)
        count = [0]

        def cb(_):
            count[0] += 1

        sol, info = spla.gmres(
            mat, rhs, rtol=opts.tol, restart=100, maxiter=opts.max_iter, M=prec,
            callback=cb, callback_type="pr_norm",
        )
        iters = count[0]
        if info != 0:
            res = np.linalg.norm(mat @ sol - rhs) / bnorm
            raise SolverError("GMRES did not converge", {"residual": res, "iterations": iters})
    if not np.all(np.isfinite(sol)):
        raise SolverError("solution contains NaN/inf", {"peclet": pe})
    res = float(np.linalg.norm(mat @ sol - rhs) / bnorm)
    if res > opts.tol:
        # one step of iterative refinement usually recovers round-off losses
        corr = spla.spsolve(mat, rhs - mat @ sol) if opts.method == "direct" else 0.0
        sol = sol + corr
        res = float(np.linalg.norm(mat @ sol - rhs) / bnorm)
        if res > opts.tol:
            raise SolverError(f"relative residual {res:.2e} above tolerance", {"residual": res})
    log.debug("solve: A=%g scheme=%s Pe=%.3g residual=%.2e", A, scheme, pe, res)
    return ExitTimeSolution(ScalarField.from_vector(grid, sol), res, iters, scheme, pe, fc, nonconforming)


def solve_poisson(grid: DomainGrid, source=1.0, tol=1e-10) -> ScalarField:
    """-lap(phi) = source, phi = 0 on the boundary."""
    return solve_exit_time(grid, None, SolveOptions(tol=tol), source).tau


def lp_norm(f: ScalarField, p) -> float:
    """L^p norm over the domain; cut cells weighted by their inside area."""
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    if np.isinf(p):
        return float(np.abs(f.vector).max())
    return float(integrate(f.map(lambda v: np.abs(v)), power=p) ** (1.0 / p))


def integrate(f: ScalarField, power=1.0) -> float:
    """Integral of f**power over the domain.

    Each cell contributes its inside area times the bilinear value of the
    (ghost-extended) field at the centroid of its inside polygon.
    """
    g = f.grid
    frac, cx, cy = g.cell_geometry
    ext = f.extended()
    v00 = ext[:-1, :-1].ravel()
    v10 = ext[1:, :-1].ravel()
    v11 = ext[1:, 1:].ravel()
    v01 = ext[:-1, 1:].ravel()
    val = v00 * (1 - cx) * (1 - cy) + v10 * cx * (1 - cy) + v11 * cx * cy + v01 * (1 - cx) * cy
    if power != 1.0:
        val = np.abs(val) ** power
    return float(np.sum(frac * val) * g.hx * g.hy)
