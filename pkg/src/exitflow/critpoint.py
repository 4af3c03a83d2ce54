"""Critical points of the maximal-exit-time functional.

A stream function phi with a single maximum is critical when

    -2 lap phi = 1 + |grad phi|^2 T(phi) / a(phi),

where a(h) = |{phi > h}| and T = -a'.  The last term is
-grad phi . grad ln a(phi(x)) written through the chain rule on the 1D area
profile.  Its average over a level set is p/a, which is what the top 2% of
levels use (there the pointwise term depends on direction unless the level
sets are circles).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .elliptic import SolveOptions, integrate, solve_exit_time, solve_poisson
from .freidlin import FreidlinError, _ratio, effective_profile
from .grid import DomainGrid, ScalarField, VectorField, gradient, laplacian, perp_gradient
from .levelset import TOP_FRACTION, area_profile, boundary_integral, contour_extract, critical_points, _grad_extended

log = logging.getLogger(__name__)

STEP_TOL = 1e-6
DIVERGENCE_FACTOR = 3.0
TARGET_PECLET = 50.0


class CriticalPointError(ValueError):
    pass


def _top_mask(profile, values):
    return values >= (1.0 - TOP_FRACTION) * profile.top


def _peak(phi):
    """Refined maximum value from a 3x3 quadratic fit around the largest node."""
    g = phi.grid
    v = phi.values
    i, j = phi.argmax()
    M = float(v[i, j])
    if 0 < i < g.x.size - 1 and 0 < j < g.y.size - 1 and g.interior[i, j]:
        fx = (v[i + 1, j] - v[i - 1, j]) / (2 * g.hx)
        fy = (v[i, j + 1] - v[i, j - 1]) / (2 * g.hy)
        fxx = (v[i + 1, j] - 2 * v[i, j] + v[i - 1, j]) / g.hx**2
        fyy = (v[i, j + 1] - 2 * v[i, j] + v[i, j - 1]) / g.hy**2
        fxy = (v[i + 1, j + 1] - v[i + 1, j - 1] - v[i - 1, j + 1] + v[i - 1, j - 1]) / (4 * g.hx * g.hy)
        H = np.array([[fxx, fxy], [fxy, fyy]])
        gv = np.array([fx, fy])
        try:
            d = -np.linalg.solve(H, gv)
        except np.linalg.LinAlgError:
            return M
        if abs(d[0]) <= g.hx and abs(d[1]) <= g.hy:
            M = max(M, M + 0.5 * float(gv @ d))
    return M


def _top_asymptotics(ap, M):
    """Fit a(h) = c1 e + c2 e^2, e = M - h, on the band just below the top levels."""
    h = ap.levels
    band = (h >= (1.0 - 6 * TOP_FRACTION) * ap.top) & (h < (1.0 - TOP_FRACTION) * ap.top)
    e = M - h[band]
    c, *_ = np.linalg.lstsq(np.column_stack([e, e * e]), ap.areas_mono[band], rcond=None)
    return float(c[0]), float(c[1])


def nonlinear_term(phi: ScalarField, profile=None, route="volume"):
    """|grad phi|^2 T(phi)/a(phi) on the unknowns.

    On the top levels T/a uses the small-area asymptotics a = c1 e + c2 e^2
    with e the distance to the (refined) maximum value, so the term keeps
    its direction dependence near a non-circular maximum.  At the maximum
    node itself the level-set average p/a is used.

    ``route="contour"`` takes T and a from iso-line quadrature instead of the
    cut-cell area profile; it is slower and only meant for cross-checks.
    """
    ap = profile if profile is not None else area_profile(phi)
    h = np.clip(phi.vector, 0.0, ap.top)
    d = gradient(phi)
    ins = phi.grid.inside
    g2 = d.ux[ins] ** 2 + d.uy[ins] ** 2
    if route == "volume":
        # T and a are close to linear in h, their ratio is not
        T, a, levels = ap.T, ap.areas_mono, ap.levels
    elif route == "contour":
        levels = ap.levels[1:-1][ap.regular[1:-1]]
        grad = _grad_extended(phi)
        T = np.array([boundary_integral(phi, lv, "inv_grad", grad).value for lv in levels])
        a = np.array([contour_extract(phi, lv, grad).enclosed_area() for lv in levels])
    else:
        raise ValueError(f"unknown route {route!r}")
    out = g2 * np.interp(h, levels, T) / np.maximum(np.interp(h, levels, a), 1e-300)
    top = _top_mask(ap, h)
    if top.any():
        M = _peak(phi)
        c1, c2 = _top_asymptotics(ap, M)
        e = M - h[top]
        with np.errstate(divide="ignore", invalid="ignore"):
            out[top] = g2[top] * (c1 + 2 * c2 * e) / (c1 * e + c2 * e * e)
        at_max = np.zeros_like(top)
        at_max[top] = ~np.isfinite(out[top]) | (e <= 0)
        if np.any(at_max):
            inv = 1.0 / _ratio(ap)  # p/a, extrapolated to the maximum
            out[at_max] = inv[-1]
    return out


def _single_max(phi, strict=True):
    cps = critical_points(phi)
    maxima = [c for c in cps if c.kind == "max"]
    ok = len(cps) == 1 and len(maxima) == 1
    if strict and not ok:
        kinds = ", ".join(c.kind for c in cps) or "none"
        raise CriticalPointError(f"expected a single interior maximum (found: {kinds})")
    return ok


def residual(phi: ScalarField, check=True) -> ScalarField:
    """-2 lap phi - 1 - |grad phi|^2 T/a on interior nodes; zero on the masked top levels."""
    if check:
        _single_max(phi)
    ap = area_profile(phi)
    lap = laplacian(phi).vector
    r = -2.0 * lap - 1.0 - nonlinear_term(phi, ap)
    h = phi.vector
    keep = phi.grid.interior[phi.grid.inside] & ~_top_mask(ap, h)
    r = np.where(keep, r, 0.0)
    return ScalarField.from_vector(phi.grid, r, dirichlet=False)


def residual_l2(phi: ScalarField, check=False) -> float:
    r = residual(phi, check)
    return float(np.sqrt(integrate(r, power=2.0)))


@dataclass(frozen=True)
class IterationRecord:
    step: int
    sup_norm: float
    residual_l2: float
    apriori1: float  # sup phi / (|Omega| / 4 pi)
    apriori2: float  # int |lap phi| / |Omega|
    apriori3: float  # int |lap phi - lap tau0| / |Omega|
    scheme: str
    change: float  # relative sup-norm step from the previous iterate
    flagged: bool = False  # more than one critical point


@dataclass(frozen=True, eq=False)
class IterationTrace:
    records: tuple
    verdict: str  # converged | diverged | max-iterations
    field: ScalarField
    scheme: str
    tau0: ScalarField = None

    def __post_init__(self):
        if not self.records:
            raise ValueError("trace needs at least one record")
        if self.verdict not in ("converged", "diverged", "max-iterations"):
            raise ValueError(f"bad verdict {self.verdict!r}")

    @property
    def converged(self):
        return self.verdict == "converged"

    @property
    def steps(self):
        return self.records[-1].step

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("step,sup_norm,residual_l2,apriori1,apriori2,apriori3\n")
            for r in self.records:
                fh.write(
                    f"{r.step},{r.sup_norm:.12g},{r.residual_l2:.12g},"
                    f"{r.apriori1:.12g},{r.apriori2:.12g},{r.apriori3:.12g}\n"
                )


def apriori_values(phi: ScalarField, tau0: ScalarField):
    """The three normalised quantities bounded for genuine critical points."""
    area = phi.grid.area
    lap = laplacian(phi)
    lap_t = laplacian(tau0)
    a1 = phi.max() / (area / (4 * np.pi))
    a2 = integrate(lap.map(np.abs)) / area
    a3 = integrate((lap - lap_t).map(np.abs)) / area
    return float(a1), float(a2), float(a3)


def _record(step, phi, tau0, scheme, prev, flagged=False, with_residual=True):
    a1, a2, a3 = apriori_values(phi, tau0)
    try:
        res = residual_l2(phi) if with_residual else float("nan")
    except Exception:  # residual is diagnostic only
        res = float("nan")
    change = float("nan") if prev is None else float(np.abs(phi.vector - prev.vector).max() / max(prev.max(), 1e-300))
    return IterationRecord(step, phi.max(), res, a1, a2, a3, scheme, change, flagged)


def half_step(phi: ScalarField) -> ScalarField:
    """Solve -2 lap phi_new = 1 + nonlinear_term(phi)."""
    n = nonlinear_term(phi)
    return solve_poisson(phi.grid, 0.5 * (1.0 + n))


def iterate_naive(grid: DomainGrid, max_steps: int = 50, tol: float = STEP_TOL) -> IterationTrace:
    """phi_0 = tau0, then phi_{n+1} = half_step(phi_n) until the step is below ``tol``."""
    tau0 = solve_poisson(grid)
    limit = DIVERGENCE_FACTOR * grid.area / (4 * np.pi)
    phi = tau0
    records = [_record(0, phi, tau0, "naive", None)]
    verdict = "max-iterations"
    for k in range(1, max_steps + 1):
        flagged = not _single_max(phi, strict=False)
        new = half_step(phi)
        rec = _record(k, new, tau0, "naive", phi, flagged)
        records.append(rec)
        phi = new
        if not np.isfinite(rec.sup_norm) or rec.sup_norm > limit:
            verdict = "diverged"
            break
        if rec.change < tol:
            verdict = "converged"
            break
    if max_steps == 0:
        verdict = "max-iterations"
    return IterationTrace(tuple(records), verdict, phi, "naive", tau0)


def default_amplitude(grid: DomainGrid, phi: ScalarField, target=TARGET_PECLET) -> float:
    """Amplitude giving grid Peclet number ``target`` for the flow grad^perp phi."""
    u = perp_gradient(phi)
    umax = max(np.abs(u.ux).max() * grid.hx, np.abs(u.uy).max() * grid.hy)
    return float(2.0 * target / umax)


def reparametrize(phi: ScalarField) -> ScalarField:
    """Remap the values of phi to its own Freidlin profile (level sets kept)."""
    ap = area_profile(phi)
    prof = effective_profile(ap)
    return ScalarField.from_vector(phi.grid, prof(np.clip(phi.vector, 0.0, ap.top)), dirichlet=True)


def iterate_stabilized(
    grid: DomainGrid,
    max_steps: int = 200,
    reparam: str = "freidlin",
    amplitude: float | None = None,
    tol: float = STEP_TOL,
) -> IterationTrace:
    """Naive half-step followed by a Freidlin reparametrisation or an advective solve."""
    if reparam not in ("freidlin", "advective"):
        raise ValueError(f"unknown reparametrisation {reparam!r}")
    if amplitude is not None and amplitude <= 0:
        raise ValueError("amplitude must be positive")
    tau0 = solve_poisson(grid)
    if reparam == "advective" and amplitude is None:
        amplitude = default_amplitude(grid, tau0)
    limit = DIVERGENCE_FACTOR * grid.area / (4 * np.pi)
    phi = tau0
    records = [_record(0, phi, tau0, reparam, None)]
    verdict = "max-iterations"
    for k in range(1, max_steps + 1):
        half = half_step(phi)
        flagged = not _single_max(half, strict=False)
        if flagged:
            log.warning("step %d: half-step has several critical points", k)
        if reparam == "freidlin":
            try:
                new = reparametrize(half)
            except FreidlinError as exc:
                raise CriticalPointError(f"reparametrisation failed at step {k}: {exc}") from exc
        else:
            opts = SolveOptions(amplitude=amplitude)
            new = solve_exit_time(grid, perp_gradient(half), opts).tau
        rec = _record(k, new, tau0, reparam, phi, flagged)
        records.append(rec)
        phi = new
        if not np.isfinite(rec.sup_norm) or rec.sup_norm > limit:
            verdict = "diverged"
            break
        if rec.change < tol:
            verdict = "converged"
            break
    return IterationTrace(tuple(records), verdict, phi, reparam, tau0)


@dataclass(frozen=True, eq=False)
class FGFields:
    F: ScalarField
    G: ScalarField
    dF: ScalarField  # F'(psi), derivative of the level function
    mask: np.ndarray  # unknowns in the top levels, excluded from integrals


def fg_fields(psi: ScalarField, profile=None) -> FGFields:
    """G = -1/p(psi) and F = a(psi) G^2, composed from the area profile."""
    ap = profile if profile is not None else area_profile(psi)
    reg = ap.levels < (1.0 - TOP_FRACTION) * ap.top
    inner = reg & (ap.levels > 0)
    if np.any(ap.p[inner] <= 0):
        raise CriticalPointError("non-positive flux coefficient p")
    lv = ap.levels[reg]
    a = ap.areas_mono[reg]
    p = ap.p[reg]
    Fl = a / p**2
    Gl = -1.0 / p
    dp = np.gradient(ap.p, ap.levels)[reg]
    dFl = (-ap.T[reg] * p - 2.0 * a * dp) / p**3
    h = np.clip(psi.vector, 0.0, ap.top)
    mask = ~(h < lv[-1])
    g = psi.grid

    def comp(vals):
        out = np.interp(h, lv, vals)
        out[mask] = 0.0
        return ScalarField.from_vector(g, out, dirichlet=False)

    return FGFields(comp(Fl), comp(Gl), comp(dFl), mask)


def _sample_v(grid, v):
    if isinstance(v, VectorField):
        return v
    X, Y = grid.mesh
    vx, vy = v(X, Y)
    vx = np.where(grid.inside, vx, 0.0)
    vy = np.where(grid.inside, vy, 0.0)
    return VectorField(grid, np.asarray(vx, float), np.asarray(vy, float))


def variation(psi: ScalarField, v) -> float:
    """First variation of max tau_bar under psi -> psi o X_eps, X_eps the flow of v.

    Volume form: int (v.grad psi) [F' |grad psi|^2 + 2 F lap psi - G] dx over
    the unmasked region.  ``v`` is a VectorField or a callable (x, y) -> (vx, vy).
    """
    _single_max(psi)
    fg = fg_fields(psi)
    g = psi.grid
    vv = _sample_v(g, v)
    d = gradient(psi)
    ins = g.inside
    gx, gy = d.ux[ins], d.uy[ins]
    vdg = vv.ux[ins] * gx + vv.uy[ins] * gy
    bracket = fg.dF.vector * (gx**2 + gy**2) + 2.0 * fg.F.vector * laplacian(psi).vector - fg.G.vector
    integrand = np.where(fg.mask, 0.0, vdg * bracket)
    return integrate(ScalarField.from_vector(g, integrand, dirichlet=False))


def max_tau_bar(psi: ScalarField) -> float:
    return effective_profile(area_profile(psi)).maximum


def flow_map(v, x, y, eps, steps=8):
    """X_eps(x, y) for the autonomous field v by classical RK4."""
    dt = eps / steps
    for _ in range(steps):
        k1 = v(x, y)
        k2 = v(x + 0.5 * dt * k1[0], y + 0.5 * dt * k1[1])
        k3 = v(x + 0.5 * dt * k2[0], y + 0.5 * dt * k2[1])
        k4 = v(x + dt * k3[0], y + dt * k3[1])
        x = x + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        y = y + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return x, y


@dataclass(frozen=True)
class FDVariation:
    value: float
    eps: float
    flagged: bool  # the flow map left the domain


def variation_fd(psi: ScalarField, v, eps: float = 1e-3) -> FDVariation:
    """Central difference (max tau_bar(psi o X_eps) - max tau_bar(psi o X_-eps)) / 2 eps.

    ``v`` must be a callable (x, y) -> (vx, vy).  The composition uses a
    bicubic spline of the ghost-extended field.
    """
    if not callable(v):
        raise TypeError("variation_fd needs v as a callable")
    g = psi.grid
    I, J = g.nodes
    x0 = g.x[I]
    y0 = g.y[J]
    vx0, vy0 = v(x0, y0)
    if np.all(vx0 == 0) and np.all(vy0 == 0):
        return FDVariation(0.0, eps, False)
    spline = RectBivariateSpline(g.x, g.y, psi.extended(), kx=3, ky=3, s=0)
    moving = (np.abs(vx0) + np.abs(vy0)) > 0
    vals = []
    flagged = False
    for s in (+1.0, -1.0):
        xe, ye = flow_map(v, x0[moving], y0[moving], s * eps)
        flagged |= not bool(np.all(g.contains(xe, ye)))
        new = psi.vector.copy()
        new[moving] = spline.ev(xe, ye)
        vals.append(max_tau_bar(ScalarField.from_vector(g, new, dirichlet=True)))
    return FDVariation((vals[0] - vals[1]) / (2 * eps), eps, flagged)


def variation_scale(psi: ScalarField, v) -> float:
    """Natural size of a variation: ||tau_bar|| ||v|| / sqrt|Omega|."""
    g = psi.grid
    vv = _sample_v(g, v)
    return max_tau_bar(psi) * vv.sup_norm() / np.sqrt(g.area)


def bump_field(center, radius, direction=None, swirl=0.0):
    """Compactly supported C^2 test field (1 - r^2/R^2)^3 times a fixed direction plus a swirl."""
    cx, cy = center
    dx, dy = direction if direction is not None else (1.0, 0.0)

    def v(x, y):
        rr = ((x - cx) ** 2 + (y - cy) ** 2) / radius**2
        w = np.where(rr < 1.0, (1.0 - rr) ** 3, 0.0)
        return w * (dx - swirl * (y - cy)), w * (dy + swirl * (x - cx))

    return v


def random_bumps(psi: ScalarField, n: int, rng, radius=0.3, top=0.9, tries=10000):
    """``n`` bump fields whose supports lie inside the domain and below ``top * max psi``."""
    g = psi.grid
    I, J = g.nodes
    X, Y = g.x[I], g.y[J]
    M = psi.max()
    ang = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    out = []
    for _ in range(tries):
        if len(out) == n:
            break
        k = rng.integers(I.size)
        cx, cy = X[k], Y[k]
        if not np.all(g.contains(cx + radius * np.cos(ang), cy + radius * np.sin(ang))):
            continue
        near = (X - cx) ** 2 + (Y - cy) ** 2 <= radius**2
        if psi.vector[near].max() >= top * M:
            continue
        d = rng.normal(size=2)
        out.append(bump_field((float(cx), float(cy)), radius, tuple(d), swirl=float(rng.normal())))
    if len(out) < n:
        raise CriticalPointError("could not place compactly supported test fields")
    return out


@dataclass(frozen=True)
class Hessian:
    eigenvalues: tuple
    ratio: float
    location: tuple


def hessian_at_max(phi: ScalarField) -> Hessian:
    """Least-squares quadratic on the 5x5 block around the largest node value."""
    g = phi.grid
    i, j = phi.argmax()
    if i < 2 or j < 2 or i + 2 >= g.x.size or j + 2 >= g.y.size or not g.inside[i - 2 : i + 3, j - 2 : j + 3].all():
        raise CriticalPointError("maximum too close to the boundary for a 5x5 fit")
    di, dj = np.meshgrid(np.arange(-2, 3), np.arange(-2, 3), indexing="ij")
    X = (di * g.hx).ravel()
    Y = (dj * g.hy).ravel()
    z = phi.values[i - 2 : i + 3, j - 2 : j + 3].ravel()
    A = np.column_stack([np.ones_like(X), X, Y, X * X, X * Y, Y * Y])
    c, *_ = np.linalg.lstsq(A, z, rcond=None)
    H = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
    lam = np.linalg.eigvalsh(H)
    mags = np.abs(lam)
    if mags.max() == 0 or mags.min() / mags.max() < 1e-10:
        raise CriticalPointError("degenerate quadratic fit at the maximum")
    return Hessian(tuple(float(x) for x in lam), float(np.sqrt(mags.min() / mags.max())), (float(g.x[i]), float(g.y[j])))
