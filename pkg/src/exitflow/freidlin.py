"""Large-amplitude limit of exit times for cellular stream functions.

For a stream function psi > 0 with a single interior maximum M, the exit
time for the flow A grad^perp psi tends, as A grows, to a function of psi
alone:

    tau_bar(h) = int_0^h a(s) / p(s) ds,
    a(s) = |{psi > s}|,   p(s) = -int_{psi > s} lap psi dx.

Both a and p vanish linearly at the maximum; the top 2% of levels use a
linear extrapolation of the ratio a/p from the levels just below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .elliptic import SolveOptions, solve_exit_time
from .grid import ScalarField, perp_gradient
from .levelset import DEFAULT_LEVELS, TOP_FRACTION, AreaProfile, area_profile, critical_points


# fitted exponents of a/p below this are treated as a boundary singularity
SINGULAR_EXPONENT = 0.05


class FreidlinError(ValueError):
    pass


@dataclass(frozen=True)
class EffectiveProfile:
    levels: np.ndarray
    values: np.ndarray
    ratio: np.ndarray  # a/p used as the integrand
    # exponent of tau_bar ~ h^e on the first level interval (1 when regular)
    boundary_exponent: float = 1.0

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        out = PchipInterpolator(self.levels, self.values, extrapolate=True)(h)
        if self.boundary_exponent != 1.0:
            h1 = self.levels[1]
            low = (h < h1) & (h >= 0)
            out = np.where(low, self.values[1] * (np.clip(h, 0, None) / h1) ** self.boundary_exponent, out)
        return out

    @property
    def maximum(self):
        return float(self.values[-1])


@dataclass(frozen=True, eq=False)
class FreidlinResult:
    tau_bar: ScalarField
    profile: EffectiveProfile
    areas: AreaProfile


def _ratio(profile):
    h = np.asarray(profile.levels, dtype=float)
    a = np.asarray(profile.areas_mono, dtype=float)
    p = np.asarray(profile.p, dtype=float)
    top = float(profile.top)
    reg = h < (1.0 - TOP_FRACTION) * top - 1e-15 * top
    inner = reg & (h > 0)
    if np.any(p[inner] <= 0):
        bad = h[inner][p[inner] <= 0][0]
        raise FreidlinError(f"non-positive flux coefficient p at level {bad:.4g}")
    ratio = np.empty_like(h)
    with np.errstate(divide="ignore"):
        ratio[reg] = a[reg] / p[reg]
    # linear fit on the band just below the masked top levels
    band = reg & (h >= (1.0 - 5 * TOP_FRACTION) * top)
    if band.sum() < 2:
        band = reg.copy()
        band[: max(0, reg.sum() - 2)] = False
    if band.sum() >= 2:
        c = np.polyfit(h[band], ratio[band], 1)
        ratio[~reg] = np.polyval(c, h[~reg])
    else:
        ratio[~reg] = ratio[reg][-1]
    return ratio


def effective_profile(areas) -> EffectiveProfile:
    """tau_bar(h) = int_0^h a/p by the composite trapezoid rule on the level grid."""
    ratio = _ratio(areas)
    h = np.asarray(areas.levels, dtype=float)
    steps = 0.5 * (ratio[1:] + ratio[:-1]) * np.diff(h)
    p = np.asarray(areas.p, dtype=float)
    expo = 1.0
    # a/p ~ c h^alpha near the boundary level; alpha < 0 when the flux
    # vanishes there (zero normal derivative), so p(0) is not usable
    alpha = np.polyfit(np.log(h[1:4]), np.log(ratio[1:4]), 1)[0]
    if alpha < -SINGULAR_EXPONENT or p[0] <= 1e-3 * np.abs(p).max():
        alpha = max(alpha, -0.95)
        steps[0] = ratio[1] * h[1] / (alpha + 1.0)
        expo = alpha + 1.0
        ratio = ratio.copy()
        ratio[0] = np.inf
    elif p[0] < 0:
        raise FreidlinError("negative flux coefficient p at the boundary level")
    vals = np.concatenate([[0.0], np.cumsum(steps)])
    return EffectiveProfile(h, vals, ratio, float(expo))


def require_single_maximum(psi: ScalarField):
    cps = critical_points(psi)
    if len(cps) != 1 or cps[0].kind != "max":
        kinds = ", ".join(c.kind for c in cps) or "none"
        raise FreidlinError(f"stream function must have exactly one interior critical point (found: {kinds})")
    return cps[0]


def freidlin_limit(psi: ScalarField, K: int = DEFAULT_LEVELS, check=True) -> FreidlinResult:
    """A -> infinity limit of the exit time for the flow grad^perp psi."""
    if check:
        require_single_maximum(psi)
        if psi.min() < -1e-10 * psi.max():
            raise FreidlinError("stream function must be positive inside the domain")
    ap = area_profile(psi, K)
    prof = effective_profile(ap)
    vals = np.clip(psi.vector, 0.0, ap.top)
    tb = ScalarField.from_vector(psi.grid, prof(vals), dirichlet=True)
    return FreidlinResult(tb, prof, ap)


@dataclass(frozen=True)
class StudyRow:
    amplitude: float
    deviation: float
    scheme: str
    peclet: float


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: list
    monotone: bool  # non-increasing after the first (pre-asymptotic) row

    def deviations(self):
        return [r.deviation for r in self.rows]


def convergence_study(psi: ScalarField, amplitudes, opts: SolveOptions | None = None, slack=1e-9):
    """sup |tau^{A grad^perp psi} - tau_bar| for each amplitude.

    ``monotone`` is False when the deviation grows (beyond ``slack`` times
    the field scale) anywhere after the first row.
    """
    fr = freidlin_limit(psi)
    u = perp_gradient(psi)
    base = opts or SolveOptions()
    rows = []
    for A in amplitudes:
        sol = solve_exit_time(psi.grid, u, _with_amplitude(base, A))
        dev = float(np.abs(sol.tau.vector - fr.tau_bar.vector).max())
        rows.append(StudyRow(float(A), dev, sol.scheme, sol.peclet))
    scale = fr.tau_bar.max()
    devs = [r.deviation for r in rows]
    mono = all(devs[k + 1] <= devs[k] + slack * scale for k in range(1, len(devs) - 1))
    return ConvergenceStudy(rows, mono)


def _with_amplitude(opts, A):
    from dataclasses import replace

    return replace(opts, amplitude=float(A))


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10 - 15 * t + 6 * t * t)


def perturb_near_max(psi: ScalarField, h1: float, kind="tilt", strength=0.02) -> ScalarField:
    """A stream function equal to ``psi`` wherever psi <= h1.

    ``cap`` flattens psi above h1 (a reparametrisation, so streamlines are
    kept); ``tilt`` adds ``strength * chi(psi) * x`` with a C^2 cutoff chi,
    which moves the maximum and changes the streamlines near it.
    """
    M = psi.max()
    if not (0 < h1 < M):
        raise ValueError("h1 must lie strictly between 0 and max psi")
    v = psi.vector
    t = (v - h1) / (M - h1)
    if kind == "cap":
        # slope 1 at h1, slope 0 at M
        w = np.clip(t, 0.0, 1.0)
        new = np.where(v > h1, h1 + (M - h1) * (w - 0.5 * w**2), v)
    elif kind == "tilt":
        I, J = psi.grid.nodes
        x = psi.grid.x[I]
        new = v + strength * _smoothstep(t) * (x - x.mean()) * (v > h1)
    else:
        raise ValueError(f"unknown perturbation {kind!r}")
    return ScalarField.from_vector(psi.grid, new, dirichlet=True)


@dataclass(frozen=True)
class LocalityRow:
    amplitude: float
    difference: float
    scheme: str


def locality_experiment(psi, psi2, h0, h1, amplitudes, opts: SolveOptions | None = None, tol=1e-12):
    """sup over {psi <= h0} of |tau^{A grad^perp psi} - tau^{A grad^perp psi2}|."""
    M = psi.max()
    if not (0 < h0 < h1 < M):
        raise ValueError("need 0 < h0 < h1 < max psi")
    outer = psi.vector <= h1
    if np.abs(psi.vector[outer] - psi2.vector[outer]).max(initial=0.0) > tol * M:
        raise ValueError("stream functions differ outside the super-level set {psi > h1}")
    u = perp_gradient(psi)
    u2 = perp_gradient(psi2)
    far = psi.vector <= h0
    base = opts or SolveOptions()
    rows = []
    for A in amplitudes:
        o = _with_amplitude(base, A)
        s1 = solve_exit_time(psi.grid, u, o)
        s2 = solve_exit_time(psi.grid, u2, o)
        d = float(np.abs(s1.tau.vector - s2.tau.vector)[far].max())
        rows.append(LocalityRow(float(A), d, s2.scheme))
    return rows
