from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sci_integrate

from hardcongestion.errors import InputError
from hardcongestion.eulerian import (
    PiecewiseField,
    TestFunction,
    bump,
    bump_family,
    empirical_measure,
    histogram_density,
    mean_weak_residual,
    plateau,
    pressure_fields,
    pressure_gap,
    pressure_gap_direct,
    pressure_l2,
    quantile_of_field,
    saturation_check,
    weak_form_residual,
)
from hardcongestion.jko import project_to_cone
from hardcongestion.potential import builtin_quadratic
from hardcongestion.trajectory import integrate


def test_empirical_measure():
    f = empirical_measure([0.0])
    assert f.atoms.tolist() == [[0.0, 1.0]]
    f = empirical_measure([0.0, 0.5])
    assert f.atoms.tolist() == [[0.0, 0.5], [0.5, 0.5]]
    assert f.mass() == 1.0


def test_histogram_examples():
    h = histogram_density([0.0, 0.5])
    assert h.breakpoints.tolist() == [-1.0, 0.0, 0.5]
    assert h.left.tolist() == [0.5, 1.0]
    assert h.mass() == 1.0
    n = 8
    h = histogram_density(np.arange(n) / n)
    assert h.left[0] == 0.5 and np.all(h.left[1:] == 1.0)
    h = histogram_density([0.0, 1.0])
    assert h.left[1] == 0.5
    with pytest.raises(InputError):
        histogram_density([0.0, 0.2])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 60))
def test_histogram_mass_and_bounds(seed, n):
    x = project_to_cone(np.random.default_rng(seed).normal(0, 2, n))
    h = histogram_density(x)
    assert h.mass() == pytest.approx(1.0, abs=1e-12)
    assert np.all(h.left <= 1.0 + 1e-9)
    assert h.left[0] == pytest.approx(0.5)


def test_pressure_examples():
    p, q = pressure_fields([-0.25, 0.25], [0.0, 0.0, 0.0])
    assert np.all(p.left == 0) and np.all(q.left == 0) and np.all(q.slope == 0)
    p, q = pressure_fields([-0.25, 0.25], [0.0, 0.25, 0.0])
    assert p(np.array([-0.3, -0.25, 0.0, 0.2499, 0.25])) == pytest.approx([0.0, 0.25, 0.25, 0.25, 0.0])
    # ramps of half-width 1/4 around each particle
    assert q(np.array([-0.5, -0.25, 0.0, 0.25, 0.5])) == pytest.approx([0.0, 0.125, 0.25, 0.125, 0.0])
    assert p.sup_distance(q) == pytest.approx(0.125)


def test_pressure_overlap_uses_midpoint():
    n = 4
    x = np.arange(n) / n
    x[2] -= 1e-15  # roundoff squeeze between touching particles
    _, q = pressure_fields(x, np.array([0.0, 0.1, 0.3, 0.2, 0.0]))
    assert np.all(np.diff(q.breakpoints) >= 0)


def test_pressure_l2_by_slackness():
    x = np.array([-0.25, 0.25])
    p, _ = pressure_fields(x, [0.0, 0.25, 0.0])
    assert p.l2_squared() == pytest.approx(0.25**2 * 0.5)


def test_saturation_examples():
    x = np.array([0.0, 0.5])
    rho = histogram_density(x)
    p, _ = pressure_fields(x, [0.0, 0.3, 0.0])
    assert saturation_check(rho, p) == 0.0
    x = np.array([0.0, 1.0])
    rho = histogram_density(x)
    p, _ = pressure_fields(x, [0.0, 0.0, 0.0])
    assert saturation_check(rho, p) == 0.0
    p, _ = pressure_fields(x, [0.0, 1.0, 0.0])
    assert saturation_check(rho, p) == pytest.approx(0.5)


def test_saturation_along_trajectory(quad_traj):
    for k in range(0, quad_traj.steps, 100):
        x = quad_traj.states[k + 1]
        p, _ = pressure_fields(x, quad_traj.multipliers[k])
        assert saturation_check(histogram_density(x), p) <= 1e-8


def test_field_integration_is_exact_on_polynomials():
    f = PiecewiseField(np.array([0.0, 1.0, 3.0]), np.array([1.0, 2.0]), np.array([0.5, -1.0]))
    ref = sci_integrate.quad(lambda t: t**5 * float(f(np.array(t))), 0, 3, points=[1.0])[0]
    assert f.integrate(lambda t: t**5) == pytest.approx(ref, rel=1e-12)
    assert f.mass() == pytest.approx(sci_integrate.quad(lambda t: float(f(np.array(t))), 0, 3, points=[1.0])[0])


def test_field_validation_and_degenerate_cells():
    with pytest.raises(InputError):
        PiecewiseField(np.array([0.0, 1.0]), np.array([1.0, 2.0]), np.array([0.0, 0.0]))
    with pytest.raises(InputError):
        PiecewiseField(np.array([1.0, 0.0]), np.array([1.0]), np.array([0.0]))
    f = PiecewiseField(np.array([0.0, 1.0, 1.0, 2.0]), np.array([1.0, 5.0, 2.0]), np.zeros(3))
    assert f.breakpoints.tolist() == [0.0, 1.0, 2.0]
    assert f.left.tolist() == [1.0, 2.0]


def test_quantile_of_field():
    q = quantile_of_field(histogram_density([0.0, 0.5]))
    assert q(np.array([0.0, 0.5, 1.0])) == pytest.approx([-1.0, 0.0, 0.5])
    q = quantile_of_field(empirical_measure([1.0, 0.0]))
    assert q(np.array([0.25, 0.75])) == pytest.approx([0.0, 1.0])


@pytest.mark.parametrize("psi", bump_family(0.3, 1.2) + [plateau(-0.5, 0.5, 0.7)], ids=lambda p: p.name)
def test_test_function_derivatives(psi):
    x = np.linspace(psi.support[0] - 0.2, psi.support[1] + 0.2, 401)
    h = 1e-6
    fd1 = (psi.f(x + h) - psi.f(x - h)) / (2 * h)
    fd2 = (psi.d1(x + h) - psi.d1(x - h)) / (2 * h)
    assert np.max(np.abs(fd1 - psi.d1(x))) <= 1e-6
    assert np.max(np.abs(fd2 - psi.d2(x))) <= 1e-5
    outside = (x < psi.support[0]) | (x > psi.support[1])
    assert np.all(psi.f(x[outside]) == 0)


def test_test_function_needs_support():
    with pytest.raises(InputError):
        TestFunction(np.sin, np.cos, np.sin, None)
    with pytest.raises(InputError):
        bump(0.0, -1.0)


def test_weak_residual_at_equilibrium():
    n = 16
    x = (np.arange(1, n + 1) - (n + 1) / 2) / n
    traj = integrate(x, builtin_quadratic(), tau=0.01, horizon=0.05)
    for psi in bump_family(0.1, 0.8) + [plateau(-0.2, 0.1, 0.3)]:
        assert max(weak_form_residual(traj, psi, k) for k in range(traj.steps)) <= 1e-8


def test_weak_residual_constant_test_function(quad_traj):
    psi = plateau(-5.0, 5.0, 1.0)
    assert weak_form_residual(quad_traj, psi, 3) == 0.0
    with pytest.raises(InputError):
        weak_form_residual(quad_traj, psi, quad_traj.steps)


def test_weak_residual_halves_with_tau():
    p = builtin_quadratic()
    x0 = -2 + 4 * np.arange(1, 33) / 32
    res = [mean_weak_residual(integrate(x0, p, tau=t, horizon=0.5), bump_family(0.0, 2.5)) for t in (0.02, 0.01)]
    assert 0.25 <= res[1] / res[0] <= 0.75


def test_pressure_gap_closed_form_matches_fields(quad_traj):
    assert pressure_gap(quad_traj) == pytest.approx(pressure_gap_direct(quad_traj), rel=1e-10, abs=1e-16)


def test_pressure_l2_identity(quad_traj):
    direct, formula = pressure_l2(quad_traj)
    assert direct == pytest.approx(formula, abs=1e-10)
