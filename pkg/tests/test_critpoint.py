import numpy as np
import pytest

from exitflow.critpoint import (
    CriticalPointError,
    IterationTrace,
    bump_field,
    default_amplitude,
    flow_map,
    hessian_at_max,
    iterate_naive,
    iterate_stabilized,
    nonlinear_term,
    random_bumps,
    reparametrize,
    residual,
    residual_l2,
    variation,
    variation_fd,
    variation_scale,
)
from exitflow.grid import DomainSpec, ScalarField, build_domain, perp_gradient
from exitflow.elliptic import grid_peclet
from exitflow.levelset import area_profile


@pytest.fixture(scope="module")
def ellipse64():
    return build_domain(DomainSpec.ellipse(2, 1, 64))


@pytest.fixture(scope="module")
def stabilized(ellipse64):
    return iterate_stabilized(ellipse64)


def test_nonlinear_term_is_one_on_the_disc(disc128, tau_disc):
    # |grad tau|^2 T/a = (r^2/4)(4 pi)/(pi r^2) = 1
    n = nonlinear_term(tau_disc)
    inner = disc128.interior[disc128.inside]
    assert np.abs(n[inner] - 1).max() < 0.01


def test_contour_route_agrees_with_volume_route(tau_ellipse):
    ap = area_profile(tau_ellipse)
    h = tau_ellipse.vector
    mid = (h > 0.1 * ap.top) & (h < 0.8 * ap.top)
    a = nonlinear_term(tau_ellipse, ap)
    b = nonlinear_term(tau_ellipse, ap, route="contour")
    assert np.abs(a - b)[mid].max() < 0.02 * np.abs(a[mid]).max()


def test_residual_vanishes_on_the_disc_only(tau_disc, tau_ellipse):
    assert residual_l2(tau_disc) < 2e-3
    assert residual_l2(tau_ellipse) > 0.5


def test_residual_rejects_several_maxima(disc128):
    X, Y = disc128.mesh
    v = (1 - X**2 - Y**2) * (np.exp(-20 * ((X - 0.5) ** 2 + Y**2)) + np.exp(-20 * ((X + 0.5) ** 2 + Y**2)))
    with pytest.raises(CriticalPointError):
        residual(ScalarField(disc128, np.where(disc128.inside, v, 0.0)))


def test_naive_iteration_keeps_the_disc_fixed_point():
    trace = iterate_naive(build_domain(DomainSpec.disc(1, 64)))
    assert trace.converged
    assert trace.field.max() == pytest.approx(0.25, rel=0.01)


def test_stabilized_iteration_on_the_ellipse(stabilized):
    assert stabilized.converged
    assert 0.405 < stabilized.field.max() <= 0.5
    r = stabilized.records[-1]
    assert r.apriori1 <= 1.0
    assert r.apriori2 == pytest.approx(1.0, abs=0.03)
    assert r.apriori3 < 1.0


def test_maximiser_is_rounder_than_torsion(stabilized):
    assert hessian_at_max(stabilized.tau0).ratio == pytest.approx(0.5, abs=1e-6)
    assert hessian_at_max(stabilized.field).ratio > 0.9


def test_advective_variant_agrees(ellipse64, stabilized):
    adv = iterate_stabilized(ellipse64, reparam="advective")
    assert adv.converged
    assert adv.field.max() == pytest.approx(stabilized.field.max(), rel=0.03)


def test_default_amplitude_hits_target_peclet(ellipse64, stabilized):
    A = default_amplitude(ellipse64, stabilized.tau0)
    assert grid_peclet(ellipse64, perp_gradient(stabilized.tau0), A) == pytest.approx(50.0, rel=1e-9)


def test_trace_csv(tmp_path, stabilized):
    path = tmp_path / "trace.csv"
    stabilized.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,sup_norm,residual_l2,apriori1,apriori2,apriori3"
    assert len(lines) == len(stabilized.records) + 1


def test_trace_validation(stabilized):
    with pytest.raises(ValueError):
        IterationTrace((), "converged", stabilized.field, "naive")
    with pytest.raises(ValueError):
        IterationTrace(stabilized.records, "stalled", stabilized.field, "naive")
    with pytest.raises(ValueError):
        iterate_stabilized(stabilized.field.grid, reparam="other")


def test_reparametrize_fixes_the_disc_torsion(tau_disc):
    assert np.abs(reparametrize(tau_disc).values - tau_disc.values).max() < 2e-3


def test_hessian_of_the_disc_torsion(tau_disc):
    h = hessian_at_max(tau_disc)
    assert h.ratio == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(h.eigenvalues, -0.5)


def test_flow_map_of_a_rotation():
    rot = lambda x, y: (-y, x)  # noqa: E731
    x, y = flow_map(rot, np.array([1.0]), np.array([0.0]), 0.3)
    assert x[0] == pytest.approx(np.cos(0.3), abs=1e-8)
    assert y[0] == pytest.approx(np.sin(0.3), abs=1e-8)


def test_bump_field_has_compact_support():
    v = bump_field((0.0, 0.0), 0.5, (1.0, 2.0), swirl=1.0)
    vx, vy = v(np.array([0.0, 0.6]), np.array([0.0, 0.0]))
    assert (vx[0], vy[0]) == (1.0, 2.0)
    assert (vx[1], vy[1]) == (0.0, 0.0)


def test_disc_torsion_is_critical(tau_disc):
    rng = np.random.default_rng(1)
    for v in random_bumps(tau_disc, 3, rng):
        assert abs(variation(tau_disc, v)) <= 5e-3 * variation_scale(tau_disc, v)


def test_variation_matches_finite_differences_on_the_ellipse(tau_ellipse):
    rng = np.random.default_rng(4)
    for v in random_bumps(tau_ellipse, 2, rng):
        an = variation(tau_ellipse, v)
        fd = variation_fd(tau_ellipse, v)
        assert not fd.flagged
        assert abs(an - fd.value) <= max(0.05 * abs(fd.value), 5e-3 * variation_scale(tau_ellipse, v))


def test_variation_fd_needs_a_callable(tau_ellipse):
    with pytest.raises(TypeError):
        variation_fd(tau_ellipse, perp_gradient(tau_ellipse))
