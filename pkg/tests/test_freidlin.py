import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exitflow.elliptic import SolveOptions
from exitflow.freidlin import (
    FreidlinError,
    convergence_study,
    freidlin_limit,
    locality_experiment,
    perturb_near_max,
)
from exitflow.grid import ScalarField


@pytest.mark.parametrize("name", ["tau_disc", "tau_ellipse", "tau_square"])
def test_torsion_reproduces_itself(request, name):
    tau = request.getfixturevalue(name)
    fr = freidlin_limit(tau)
    assert np.abs(fr.tau_bar.values - tau.values).max() <= 0.01 * tau.max()


def test_disc_profile_is_identity(tau_disc):
    # a(h) = p(h) on the disc, so tau_bar(h) = h
    fr = freidlin_limit(tau_disc)
    h = np.linspace(0.0, 0.24, 13)
    assert np.allclose(fr.profile(h), h, atol=1e-4)


@settings(max_examples=8, deadline=None)
@given(st.sampled_from(["sin", "power", "mix"]), st.floats(0.5, 2.5))
def test_streamline_geometry_alone_determines_the_limit(kind, c):
    # same streamlines, different labels: the averaged solution is unchanged;
    # powers other than 1 make the flux vanish or blow up at the boundary
    from exitflow.elliptic import solve_poisson
    from exitflow.grid import DomainSpec, build_domain

    g = build_domain(DomainSpec.ellipse(2, 1, 128))
    tau = solve_poisson(g)
    f = {
        "sin": lambda v: np.sin(c * v),
        "power": lambda v: np.maximum(v, 0) ** c,
        "mix": lambda v: v + c * np.maximum(v, 0) ** 1.5,
    }[kind]
    fr = freidlin_limit(tau.map(f))
    assert np.abs(fr.tau_bar.values - tau.values).max() <= 0.015 * tau.max()


def test_large_amplitude_solutions_approach_the_limit(disc128, tau_disc):
    X, Y = disc128.mesh
    psi = ScalarField(disc128, tau_disc.values * (1 + 0.4 * X + 0.2 * Y * Y))
    study = convergence_study(psi, [10, 100, 1000, 10000])
    devs = study.deviations()
    assert study.monotone
    assert devs[-1] < 5e-4 < devs[0]
    assert all(r.scheme == "centered" for r in study.rows)


def test_two_maxima_are_rejected(disc128):
    X, Y = disc128.mesh
    v = (1 - X**2 - Y**2) * (np.exp(-20 * ((X - 0.5) ** 2 + Y**2)) + np.exp(-20 * ((X + 0.5) ** 2 + Y**2)))
    with pytest.raises(FreidlinError):
        freidlin_limit(ScalarField(disc128, np.where(disc128.inside, v, 0.0)))


@pytest.mark.parametrize("kind", ["cap", "tilt"])
def test_perturbation_is_confined_near_the_maximum(tau_disc, kind):
    psi2 = perturb_near_max(tau_disc, 0.2, kind)
    low = tau_disc.vector <= 0.2
    assert np.array_equal(psi2.vector[low], tau_disc.vector[low])
    assert np.abs(psi2.vector - tau_disc.vector).max() > 0


def test_perturbation_errors(tau_disc):
    with pytest.raises(ValueError):
        perturb_near_max(tau_disc, 0.3)
    with pytest.raises(ValueError):
        perturb_near_max(tau_disc, 0.2, "bend")


def test_locality_requires_agreement_outside(tau_disc):
    other = tau_disc * 1.1
    with pytest.raises(ValueError):
        locality_experiment(tau_disc, other, 0.1, 0.2, [10.0])


def test_locality_far_field_shrinks(tau_disc):
    psi2 = perturb_near_max(tau_disc, 0.2, "tilt")
    rows = locality_experiment(tau_disc, psi2, 0.15, 0.2, [100.0, 1000.0, 10000.0], SolveOptions())
    d = [r.difference for r in rows]
    assert d[0] > d[1] > d[2]
