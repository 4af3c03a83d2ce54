"""Symmetric decreasing rearrangement and L^p comparison with the ball.

Among all domains of a given area and all incompressible flows tangent to
the boundary, the exit time is largest in every L^p norm for the ball with
no flow.  The checks here evaluate both sides numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .elliptic import integrate, lp_norm
from .grid import ScalarField, laplacian
from .levelset import TOP_FRACTION, area_profile, boundary_integral, _grad_extended
from .report import VerificationReport, make_check

SLACK = 0.01


def unit_ball_volume(n: int) -> float:
    """Gamma_n = pi^{n/2} / Gamma(n/2 + 1)."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return float(np.pi ** (n / 2) / gamma_fn(n / 2 + 1))


def ball_radius(n: int, V: float) -> float:
    if V <= 0:
        raise ValueError("volume must be positive")
    return float((V / unit_ball_volume(n)) ** (1.0 / n))


def ball_exit_time(n: int, V: float, x) -> float:
    """Exit time of Brownian motion (generator Laplacian) from the centred ball of volume V.

    >>> ball_exit_time(2, np.pi, (0.0, 0.0))
    0.25
    """
    rho = ball_radius(n, V)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r2 = float(np.sum(x * x))
    if r2 > rho * rho * (1 + 1e-12):
        raise ValueError("point lies outside the ball")
    return float(max(rho * rho - r2, 0.0) / (2 * n))


def ball_norm(V: float, p) -> float:
    """L^p norm of the planar ball exit time (rho^2 - r^2)/4 over the disc of area V."""
    rho = ball_radius(2, V)
    p = float(p)
    if np.isinf(p):
        return rho * rho / 4.0
    return float((np.pi / (p + 1)) ** (1 / p) * rho ** (2 + 2 / p) / 4.0)


@dataclass(frozen=True)
class RadialProfile:
    r: np.ndarray
    gamma: np.ndarray
    rho: float
    n: int = 2

    def __call__(self, r):
        return np.interp(r, self.r, self.gamma, right=0.0)

    def bound(self, r=None):
        r = self.r if r is None else np.asarray(r)
        return (self.rho**2 - r**2) / (2 * self.n)

    def lp_norm(self, p, samples=20001):
        """Radial quadrature in the area variable s = pi r^2."""
        p = float(p)
        if np.isinf(p):
            return float(self.gamma.max())
        s = np.linspace(0.0, np.pi * self.rho**2, samples)
        vals = self(np.sqrt(s / np.pi)) ** p
        return float(np.trapezoid(vals, s) ** (1 / p))

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("r,gamma,bound\n")
            for r, g, b in zip(self.r, self.gamma, self.bound()):
                fh.write(f"{r:.10g},{g:.10g},{b:.10g}\n")


def symmetric_rearrangement(tau: ScalarField, K: int = 400, samples: int = 401) -> RadialProfile:
    """gamma(r) = sup{h : |{tau > h}| >= pi r^2}, from the cut-cell area profile."""
    ap = area_profile(tau, K)
    rho = float(np.sqrt(tau.grid.area / np.pi))
    a = ap.areas_mono
    h = ap.levels
    # areas are non-increasing in h; invert as h(s), keeping the largest h on plateaus
    s_rev = a[::-1]
    h_rev = h[::-1]
    keep = np.concatenate([np.diff(s_rev) > 0, [True]])
    s_u, h_u = s_rev[keep], h_rev[keep]
    r = np.linspace(0.0, rho, samples)
    s = np.pi * r * r
    g = np.interp(s, s_u, h_u, left=h_u[0], right=0.0)
    g[-1] = 0.0
    g = np.minimum.accumulate(g)
    return RadialProfile(r, g, rho, 2)


def verify_theorem_12(tau: ScalarField, p_list=(1, 2, np.inf), slack=SLACK, label="") -> VerificationReport:
    """Compare ||tau||_p with the ball exit time of the same area."""
    V = tau.grid.area
    rep = VerificationReport(f"Lp comparison with the ball{(' ' + label) if label else ''}")
    for p in p_list:
        lhs = lp_norm(tau, p)
        rhs = ball_norm(V, p)
        rep.add(make_check(f"Lp bound p={p:g}{(' ' + label) if label else ''}", lhs, rhs, "<=", slack, "rearrange.verify_theorem_12"))
    return rep


def pointwise_bound_check(tau: ScalarField, slack=SLACK) -> VerificationReport:
    """gamma(r) <= (rho^2 - r^2)/4 with slack relative to rho^2/4."""
    prof = symmetric_rearrangement(tau)
    excess = float(np.max(prof.gamma - prof.bound()))
    rep = VerificationReport("pointwise rearrangement bound")
    rep.add(make_check("max(gamma - ball profile)", excess, 0.0, "<=", slack * prof.rho**2 / 4, "rearrange.symmetric_rearrangement"))
    return rep


def freidlin_constraint(phi: ScalarField, n_levels=20, lo=0.05, hi=1.0 - 2 * TOP_FRACTION):
    """Relative mismatch of a(h) and the contour integral of |grad phi| on sampled levels.

    Near-critical levels flagged by the contour quadrature are skipped.
    """
    ap = area_profile(phi)
    M = ap.top
    grad = _grad_extended(phi)
    rows = []
    for h in np.linspace(lo * M, hi * M, n_levels):
        bi = boundary_integral(phi, h, "grad", grad)
        if bi.flagged:
            continue
        a = float(ap.area_at(h))
        rows.append((float(h), a, bi.value, abs(bi.value - a) / a))
    return rows


def apriori_checks(phi: ScalarField, tau0: ScalarField, slack=SLACK, identity_tol=0.03) -> VerificationReport:
    """Bounds satisfied by any genuine critical point phi, plus the Freidlin constraint."""
    area = phi.grid.area
    rep = VerificationReport("a priori estimates")
    rep.add(make_check("sup phi <= |Omega|/(4 pi)", phi.max(), area / (4 * np.pi), "<=", slack, "rearrange.apriori_checks"))
    lap = laplacian(phi)
    rep.add(make_check("int |lap phi| = |Omega|", integrate(lap.map(np.abs)), area, "~=", identity_tol, "rearrange.apriori_checks"))
    d = integrate((lap - laplacian(tau0)).map(np.abs))
    rep.add(make_check("int |lap phi - lap tau0| < |Omega|", d, area, "<", 0.0, "rearrange.apriori_checks"))
    rows = freidlin_constraint(phi)
    worst = max((r[3] for r in rows), default=float("nan"))
    rep.add(make_check("Freidlin constraint a(h) = int |grad phi|", worst, 0.0, "<=", identity_tol, "rearrange.freidlin_constraint",
                       note=f"{len(rows)} regular levels"))
    return rep
