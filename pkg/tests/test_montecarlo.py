import numpy as np
import pytest

from exitflow.grid import DomainSpec, build_domain, perp_gradient
from exitflow.montecarlo import McConfig, allowance, field_crosscheck, sample_exit_time
from exitflow.elliptic import solve_poisson


@pytest.fixture(scope="module")
def disc64():
    return build_domain(DomainSpec.disc(1.0, 64))


def _bias(dt):
    return 2 * np.sqrt(dt)  # generous O(sqrt dt) allowance for the unit disc


@pytest.mark.parametrize("bad", [dict(dt=0.0), dict(n_paths=10), dict(max_steps=0), dict(amplitude=-1.0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        McConfig((0.0, 0.0), **bad)


def test_start_outside_is_rejected(disc64):
    with pytest.raises(ValueError):
        sample_exit_time(disc64, None, McConfig((1.5, 0.0), n_paths=1000))


def test_same_seed_same_estimate(disc64):
    cfg = McConfig((0.2, 0.1), dt=1e-3, n_paths=2000, seed=7)
    a = sample_exit_time(disc64, None, cfg)
    b = sample_exit_time(disc64, None, cfg)
    assert a == b
    c = sample_exit_time(disc64, None, McConfig((0.2, 0.1), dt=1e-3, n_paths=2000, seed=8))
    assert c.mean != a.mean


@pytest.mark.parametrize("point", [(0.0, 0.0), (0.6, 0.3)])
def test_disc_mean_exit_time(disc64, point):
    cfg = McConfig(point, dt=1e-3, n_paths=20000, seed=11)
    est = sample_exit_time(disc64, None, cfg)
    exact = (1 - point[0] ** 2 - point[1] ** 2) / 4
    assert abs(est.mean - exact) <= 3 * est.stderr + 0.1 * _bias(cfg.dt)
    assert est.truncated == 0


def test_bridge_reduces_the_bias(disc64):
    on = sample_exit_time(disc64, None, McConfig((0.0, 0.0), dt=4e-3, n_paths=20000, seed=3))
    off = sample_exit_time(disc64, None, McConfig((0.0, 0.0), dt=4e-3, n_paths=20000, seed=3, bridge=False))
    assert abs(on.mean - 0.25) < abs(off.mean - 0.25)
    assert off.mean > 0.25  # missed excursions can only delay the exit


def test_truncation_is_flagged(disc64):
    est = sample_exit_time(disc64, None, McConfig((0.0, 0.0), dt=1e-3, n_paths=1000, max_steps=50))
    assert est.truncated > 0
    assert est.flagged


def test_rotation_does_not_change_the_disc_exit_time(disc64):
    tau0 = solve_poisson(disc64)
    u = perp_gradient(tau0)
    est = sample_exit_time(disc64, u, McConfig((0.5, 0.0), dt=1e-3, n_paths=20000, seed=5, amplitude=20.0))
    assert abs(est.mean - 0.1875) <= 3 * est.stderr + 0.1 * _bias(1e-3)


def test_crosscheck_rows(disc64):
    cfg = McConfig((0.0, 0.0), dt=1e-3, n_paths=4000, seed=2)
    rows, rep = field_crosscheck(disc64, None, 0.0, [(0.0, 0.0), (0.3, -0.4)], cfg)
    assert len(rows) == len(rep.checks) == 2
    assert rep.passed
    assert rows[0].tolerance >= allowance(disc64, 1e-3)
    assert "montecarlo" in rep.checks[0].provenance


def test_csv_row_format():
    from exitflow.montecarlo import McEstimate

    e = McEstimate(0.25, 0.001, 1000, 0, 1e-4)
    assert e.csv_row() == "0.25,0.001,1000,0,0.0001"
