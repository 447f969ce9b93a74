from __future__ import annotations

import numpy as np
import pytest

from hardcongestion import harness
from hardcongestion.potential import builtin_quadratic, double_well_confined
from hardcongestion.sampling import MacroDensity, quantile_of_density, sample_particles
from hardcongestion.trajectory import integrate


def _run(potential, rho0, n, tau, horizon):
    x0 = sample_particles(quantile_of_density(rho0), n)
    return integrate(x0, potential, None, tau, horizon)


@pytest.fixture(scope="session")
def quad_traj():
    """phi = 1 + x^2, uniform on [-2, 2], N=64, tau=1e-3, T=1."""
    return _run(builtin_quadratic(), MacroDensity.uniform(-2.0, 2.0), 64, 1e-3, 1.0)


@pytest.fixture(scope="session")
def dw_traj():
    return _run(double_well_confined(), MacroDensity.uniform(-1.7, 2.3), 64, 1e-3, 1.0)


@pytest.fixture(scope="session")
def quad_sweep_n():
    cfg = harness.quadratic_benchmark(n_list=[16, 32, 64, 128, 256], tau_list=[1e-3], horizon=1.0)
    return harness.sweep_N(cfg)


@pytest.fixture(scope="session")
def dw_sweep_n():
    cfg = harness.double_well_benchmark(n_list=[16, 32, 64, 128, 256], tau_list=[1e-3], horizon=1.0)
    return harness.sweep_N(cfg)


@pytest.fixture(scope="session")
def quad_sweep_tau():
    cfg = harness.quadratic_benchmark(n_list=[32], tau_list=[1e-2 / 2**k for k in range(5)], horizon=1.0)
    return harness.sweep_tau(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
