"""Monte Carlo exit times for dX = -A u(X) dt + sqrt(2) dB.

Paths are advanced in vectorised blocks by Euler-Maruyama.  A step that
lands outside the domain is an exit, with the crossing time found by
linear interpolation of the level function.  A step that stays inside
may still have crossed the boundary in between; this is tested with the
Brownian-bridge probability exp(-d0 d1 / dt) (diffusion coefficient 2),
d being distances to the boundary.  Without that test the mean exit
time carries a bias of order sqrt(dt).

Each block of paths draws from its own Philox stream spawned from the
seed, and block results are combined in block order, so the estimate
does not depend on how blocks are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import SolveOptions, solve_exit_time
from .grid import DomainGrid, VectorField, interpolate
from .report import VerificationReport, make_check

BLOCK = 16384
TRUNCATION_LIMIT = 1e-3


@dataclass(frozen=True)
class McConfig:
    start: tuple
    dt: float = 1e-4
    n_paths: int = 100_000
    max_steps: int | None = None
    seed: int = 0
    amplitude: float = 0.0
    bridge: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        if self.n_paths < 1000:
            raise ValueError("at least 1000 paths are required")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_paths: int
    truncated: int
    dt: float

    @property
    def truncated_fraction(self):
        return self.truncated / self.n_paths

    @property
    def flagged(self):
        return self.truncated_fraction >= TRUNCATION_LIMIT

    def csv_row(self):
        return f"{self.mean:.10g},{self.stderr:.10g},{self.n_paths},{self.truncated},{self.dt:.10g}"


class _Velocity:
    """Bilinear velocity; zero in cells with a corner outside the domain."""

    def __init__(self, grid: DomainGrid, u: VectorField | None, A: float):
        self.active = u is not None and A > 0 and u.sup_norm() > 0
        if not self.active:
            return
        self.x0, self.y0 = grid.origin
        self.hx, self.hy = grid.hx, grid.hy
        self.ux = A * u.ux
        self.uy = A * u.uy
        ins = grid.inside
        self.full = ins[:-1, :-1] & ins[1:, :-1] & ins[1:, 1:] & ins[:-1, 1:]

    def __call__(self, px, py):
        fx = (px - self.x0) / self.hx
        fy = (py - self.y0) / self.hy
        i = np.clip(np.floor(fx).astype(np.int64), 0, self.full.shape[0] - 1)
        j = np.clip(np.floor(fy).astype(np.int64), 0, self.full.shape[1] - 1)
        tx = np.clip(fx - i, 0.0, 1.0)
        ty = np.clip(fy - j, 0.0, 1.0)
        w00 = (1 - tx) * (1 - ty)
        w10 = tx * (1 - ty)
        w11 = tx * ty
        w01 = (1 - tx) * ty
        on = self.full[i, j]
        vx = w00 * self.ux[i, j] + w10 * self.ux[i + 1, j] + w11 * self.ux[i + 1, j + 1] + w01 * self.ux[i, j + 1]
        vy = w00 * self.uy[i, j] + w10 * self.uy[i + 1, j] + w11 * self.uy[i + 1, j + 1] + w01 * self.uy[i, j + 1]
        return np.where(on, vx, 0.0), np.where(on, vy, 0.0)


def _distance(g, px, py, gv, step):
    """First-order distance to {g = 0}: -g / |grad g| (central differences)."""
    gx = (g(px + step, py) - g(px - step, py)) / (2 * step)
    gy = (g(px, py + step) - g(px, py - step)) / (2 * step)
    return np.maximum(-gv, 0.0) / np.maximum(np.hypot(gx, gy), 1e-12)


def _run_block(g, vel, start, n, dt, max_steps, rng, bridge, fd_step):
    # live paths are kept compacted: x, y, gv, ids hold only unexited paths
    x = np.full(n, float(start[0]))
    y = np.full(n, float(start[1]))
    gv = g(x, y)
    ids = np.arange(n)
    times = np.zeros(n)
    sig = np.sqrt(2.0 * dt)
    # bridge test only matters within a few diffusion lengths of the boundary
    near = 6.0 * sig
    for step in range(max_steps):
        m = ids.size
        if m == 0:
            break
        xi = rng.standard_normal((2, m))
        if vel.active:
            vx, vy = vel(x, y)
            xn = x - vx * dt + sig * xi[0]
            yn = y - vy * dt + sig * xi[1]
        else:
            xn = x + sig * xi[0]
            yn = y + sig * xi[1]
        gn = g(xn, yn)
        out = gn >= 0.0
        t0 = step * dt
        if out.any():
            frac = -gv[out] / np.maximum(gn[out] - gv[out], 1e-300)
            times[ids[out]] = t0 + np.clip(frac, 0.0, 1.0) * dt
        if bridge:
            cand = np.nonzero(~out & (gn > -near))[0]
            if cand.size:
                d0 = _distance(g, x[cand], y[cand], gv[cand], fd_step)
                d1 = _distance(g, xn[cand], yn[cand], gn[cand], fd_step)
                hit = cand[rng.random(cand.size) < np.exp(-d0 * d1 / dt)]
                if hit.size:
                    times[ids[hit]] = t0 + 0.5 * dt
                    out[hit] = True
        if out.any():
            keep = ~out
            x, y, gv, ids = xn[keep], yn[keep], gn[keep], ids[keep]
        else:
            x, y, gv = xn, yn, gn
    times[ids] = max_steps * dt
    return times, ids.size


def default_max_steps(grid: DomainGrid, dt: float) -> int:
    # exit-time tails decay at least like exp(-t / (|Omega|/(4 pi) * const))
    horizon = 40.0 * grid.area / (4 * np.pi)
    return int(np.ceil(horizon / dt))


def sample_exit_time(grid: DomainGrid, u: VectorField | None, cfg: McConfig) -> McEstimate:
    """Mean exit time from ``cfg.start`` over ``cfg.n_paths`` paths."""
    g = grid.spec.level_function()
    sx, sy = cfg.start
    if not (g(np.float64(sx), np.float64(sy)) < 0):
        raise ValueError(f"start point {cfg.start} is not inside the domain")
    vel = _Velocity(grid, u, cfg.amplitude)
    max_steps = cfg.max_steps or default_max_steps(grid, cfg.dt)
    fd_step = 1e-3 * min(grid.hx, grid.hy)
    n_blocks = -(-cfg.n_paths // BLOCK)
    seqs = np.random.SeedSequence(cfg.seed).spawn(n_blocks)
    parts = []
    trunc = 0
    for b, ss in enumerate(seqs):
        n = min(BLOCK, cfg.n_paths - b * BLOCK)
        rng = np.random.Generator(np.random.Philox(ss))
        t, k = _run_block(g, vel, (sx, sy), n, cfg.dt, max_steps, rng, cfg.bridge, fd_step)
        parts.append(t)
        trunc += k
    times = np.concatenate(parts)
    mean = float(np.mean(times))
    se = float(np.std(times, ddof=1) / np.sqrt(times.size))
    return McEstimate(mean, se, int(times.size), int(trunc), cfg.dt)


def allowance(grid: DomainGrid, dt: float) -> float:
    """Boundary-discretisation allowance 2 sqrt(dt) times the equal-area radius."""
    return 2.0 * np.sqrt(dt) * np.sqrt(grid.area / np.pi)


@dataclass(frozen=True)
class CrossCheckRow:
    point: tuple
    mc: McEstimate
    pde: float
    tolerance: float

    @property
    def passed(self):
        return abs(self.mc.mean - self.pde) <= self.tolerance and not self.mc.flagged


def field_crosscheck(grid: DomainGrid, u: VectorField | None, A: float, points, cfg: McConfig, tau=None):
    """MC estimates at ``points`` against the PDE exit time.

    Returns (rows, report).  A point passes when |MC - PDE| <= 3 stderr +
    ``allowance``.  Per-point seeds are ``cfg.seed + k``.
    """
    if tau is None:
        tau = solve_exit_time(grid, u, SolveOptions(amplitude=A)).tau
    rows = []
    rep = VerificationReport("Monte Carlo cross-check")
    extra = allowance(grid, cfg.dt)
    for k, pt in enumerate(points):
        c = McConfig(tuple(pt), cfg.dt, cfg.n_paths, cfg.max_steps, cfg.seed + k, A, cfg.bridge)
        est = sample_exit_time(grid, u, c)
        pde = interpolate(tau, pt)
        tol = 3 * est.stderr + extra
        row = CrossCheckRow(tuple(float(v) for v in pt), est, pde, tol)
        rows.append(row)
        rep.add(make_check(f"MC at ({pt[0]:.4g}, {pt[1]:.4g})", abs(est.mean - pde), 0.0, "<=", tol, "montecarlo.field_crosscheck"))
    return rows, rep
