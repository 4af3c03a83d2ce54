"""Shared grids and closed-form oracles."""

import numpy as np
import pytest

from exitflow.elliptic import solve_poisson
from exitflow.grid import DomainSpec, ScalarField, build_domain


def disc_tau(X, Y, r=1.0):
    return (r * r - X**2 - Y**2) / 4.0


def ellipse_tau(X, Y, a=2.0, b=1.0):
    return (1 - X**2 / a**2 - Y**2 / b**2) / (2 * (1 / a**2 + 1 / b**2))


def square_center_oracle(terms=60):
    """Torsion function of the unit square at its centre, single Fourier series.

    tau = x(1-x)/2 - sum_{k odd} 4/(pi^3 k^3) sin(k pi x) cosh(k pi (y-1/2)) / cosh(k pi/2)
    """
    k = np.arange(1, 2 * terms, 2, dtype=float)
    s = np.sum(4 / (np.pi**3 * k**3) * np.sin(k * np.pi / 2) / np.cosh(k * np.pi / 2))
    return 0.125 - s


def exact_field(grid, fn):
    X, Y = grid.mesh
    return ScalarField(grid, np.where(grid.inside, fn(X, Y), 0.0))


@pytest.fixture(scope="session")
def disc128():
    return build_domain(DomainSpec.disc(1.0, 128))


@pytest.fixture(scope="session")
def ellipse128():
    return build_domain(DomainSpec.ellipse(2.0, 1.0, 128))


@pytest.fixture(scope="session")
def square128():
    return build_domain(DomainSpec.rectangle(1.0, 1.0, 128))


@pytest.fixture(scope="session")
def tau_disc(disc128):
    return solve_poisson(disc128)


@pytest.fixture(scope="session")
def tau_ellipse(ellipse128):
    return solve_poisson(ellipse128)


@pytest.fixture(scope="session")
def tau_square(square128):
    return solve_poisson(square128)
