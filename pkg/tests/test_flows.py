import numpy as np
import pytest

from exitflow import flows
from exitflow.elliptic import check_flow, solve_poisson
from exitflow.grid import DomainSpec, build_domain


@pytest.mark.parametrize("kind", flows.FLOWS)
@pytest.mark.parametrize("spec", [DomainSpec.disc(1, 64), DomainSpec.ellipse(2, 1, 64), DomainSpec.rectangle(1, 1, 64)])
def test_flows_are_admissible(spec, kind):
    g = build_domain(spec)
    u = flows.flow(g, kind)
    fc = check_flow(g, u)
    assert fc.ok
    assert fc.max_divergence < 1e-10
    if kind != "zero":
        assert fc.sup_norm > 0


def test_square_single_cell_is_the_classic_cellular_flow():
    g = build_domain(DomainSpec.rectangle(1, 1, 64))
    psi = flows.stream_function(g, "cellular", cells=1, scale=0.1)
    X, Y = g.mesh
    exact = np.where(g.inside, 0.1 * np.sin(np.pi * X) * np.sin(np.pi * Y), 0.0)
    assert np.abs(psi.values - exact).max() < 1e-14


def test_perp_tau0_uses_the_torsion_function():
    g = build_domain(DomainSpec.disc(1, 32))
    tau0 = solve_poisson(g)
    assert flows.stream_function(g, "perp_tau0", tau0=tau0) is tau0


def test_unknown_flow():
    g = build_domain(DomainSpec.disc(1, 16))
    with pytest.raises(ValueError):
        flows.stream_function(g, "vortex")
