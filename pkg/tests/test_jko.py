from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import isotonic_regression

from hardcongestion.errors import ConvergenceError, InputError, StepSizeError
from hardcongestion.jko import active_set, check_slackness, jko_step, pav, project_to_cone, recover_multipliers
from hardcongestion.oracles import brute_force_jko, brute_force_projection
from hardcongestion.potential import (
    builtin_quadratic,
    constant_potential,
    double_well_confined,
    gaussian_bump_interaction,
    quadratic_interaction,
)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------- projection


def test_projection_examples():
    assert project_to_cone([0.3, 0.2]) == pytest.approx([0.0, 0.5])
    x = np.array([-1.0, 0.0, 1.0])
    assert np.array_equal(project_to_cone(x), x)
    # middle violation only: particles 2 and 3 pool, particle 1 stays
    z = project_to_cone([-2.0, 0.5, 0.6])
    assert z[0] == -2.0
    assert z == pytest.approx(brute_force_projection([-2.0, 0.5, 0.6]))
    assert z[2] - z[1] == pytest.approx(1 / 3)


@settings(max_examples=200, deadline=None)
@given(y=arrays(float, st.integers(1, 40), elements=finite), data=st.data())
def test_pav_matches_scipy(y, data):
    w = data.draw(arrays(float, y.size, elements=st.floats(0.1, 10.0)))
    ours = pav(y, w)
    ref = isotonic_regression(y, weights=w).x
    assert ours == pytest.approx(ref, abs=1e-10)
    assert pav(y, w, ties="pool") == pytest.approx(ours, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(y=arrays(float, st.integers(2, 8), elements=finite))
def test_projection_matches_brute_force(y):
    assert np.max(np.abs(project_to_cone(y) - brute_force_projection(y))) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(y=arrays(float, st.integers(2, 60), elements=finite), data=st.data())
def test_projection_properties(y, data):
    n = y.size
    z = project_to_cone(y)
    assert np.all(np.diff(z) >= 1.0 / n - 1e-12)
    assert project_to_cone(z) == pytest.approx(z, abs=1e-12)
    # obtuse angle: <y - z, v - z> <= 0 for any v in the cone
    v = project_to_cone(data.draw(arrays(float, n, elements=finite)))
    assert np.dot(y - z, v - z) <= 1e-9 * (1 + np.abs(y).sum() + np.abs(v).sum())
    # translation equivariance and mean preservation
    assert project_to_cone(y + 1.5) == pytest.approx(z + 1.5, abs=1e-10)
    assert np.mean(z) == pytest.approx(np.mean(y), abs=1e-10)


def test_pav_rejects_bad_input():
    with pytest.raises(InputError):
        pav([1.0, np.nan])
    with pytest.raises(InputError):
        pav([1.0, 2.0], [1.0, 0.0])
    with pytest.raises(InputError):
        pav([1.0, 2.0], ties="random")


# ---------------------------------------------------------------- one step


def test_constant_potential_is_stationary():
    x = np.array([-1.0, 0.3, 2.0])
    xn, lam, rep = jko_step(x, constant_potential(), tau=0.7)
    assert np.array_equal(xn, x)
    assert np.all(lam == 0)
    assert rep.inner_iterations == 0


def test_two_particle_fixed_point():
    x = np.array([-0.25, 0.25])
    xn, lam, rep = jko_step(x, builtin_quadratic(), tau=0.1)
    assert xn == pytest.approx(x, abs=1e-14)
    assert lam == pytest.approx([0.0, 0.25, 0.0], abs=1e-13)
    assert rep.active_set == [1]
    assert check_slackness(xn, lam) <= 1e-14


def test_two_particle_free_step():
    xn, lam, rep = jko_step(np.array([-2.0, 2.0]), builtin_quadratic(), tau=0.1)
    assert xn == pytest.approx([-5 / 3, 5 / 3], abs=1e-14)
    assert np.all(np.abs(lam) <= 1e-13)
    assert rep.active_set == []


def test_three_particle_equilibrium_multipliers():
    x = np.array([-1 / 3, 0.0, 1 / 3])
    xn, lam, _ = jko_step(x, builtin_quadratic(), tau=0.1)
    assert xn == pytest.approx(x, abs=1e-14)
    # stationary KKT: 2 x_i + 3 (lam_i - lam_{i-1}) = 0 solved by hand
    assert lam == pytest.approx([0.0, 2 / 9, 2 / 9, 0.0], abs=1e-13)


def test_recover_multipliers_examples():
    p = builtin_quadratic()
    x = np.array([-0.25, 0.25])
    lam, res = recover_multipliers(x, x, p, 0.1)
    assert lam == pytest.approx([0, 0.25, 0]) and res <= 1e-15
    xk = np.array([-2.0, 2.0])
    lam, res = recover_multipliers(xk, xk / 1.2, p, 0.1)
    assert np.all(np.abs(lam) <= 1e-14) and res <= 1e-14


def test_recover_multipliers_flags_inexact_solve(caplog):
    p = builtin_quadratic()
    x = np.array([-0.25, 0.26])
    with caplog.at_level("WARNING"):
        _, res = recover_multipliers(x, x, p, 0.1, tol_consistency=1e-8)
    assert res > 1e-8
    assert "inexact" in caplog.text


def test_check_slackness_examples():
    assert check_slackness([0.0, 1.0, 2.0], [0, 0, 0, 0]) == 0.0
    assert check_slackness([0.0, 1.0], [0, 0.3, 0]) == pytest.approx(0.3 * 0.5)
    with pytest.raises(InputError):
        check_slackness([0.0, 1.0], [0, 0])


def test_active_set_indices():
    assert active_set([0.0, 0.5, 2.0, 2.25 + 1e-14]).tolist() == [3]
    assert active_set([0.0, 0.25, 0.5, 0.75]).tolist() == [1, 2, 3]


def _random_instance(rng, n):
    xk = project_to_cone(rng.normal(0, 1.5, n))
    kind = rng.integers(0, 4)
    pot = [builtin_quadratic(rng.uniform(-1, 1)), double_well_confined(), builtin_quadratic(0, 2.0), double_well_confined(0.3, 1.0)][kind]
    inter = None
    u = rng.random()
    if u < 0.25:
        inter = quadratic_interaction(rng.uniform(-0.5, 1.0))
    elif u < 0.5:
        inter = gaussian_bump_interaction(rng.uniform(-1, 1), rng.uniform(0.4, 1.5))
    c2 = pot.c2 + (2 * inter.c2 if inter is not None else 0)
    tau = rng.uniform(0.05, 1.0) * 0.5 / c2
    return xk, pot, inter, tau


def test_jko_matches_brute_force():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(100):
        n = 2 + trial % 5
        xk, pot, inter, tau = _random_instance(rng, n)
        x, _, _ = jko_step(xk, pot, inter, tau)
        ref = brute_force_jko(xk, pot, inter, tau)
        worst = max(worst, float(np.max(np.abs(x - ref))))
    assert worst <= 1e-8


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40))
def test_step_kkt_properties(seed, n):
    rng = np.random.default_rng(seed)
    xk, pot, inter, tau = _random_instance(rng, n)
    x, lam, rep = jko_step(xk, pot, inter, tau)
    assert np.all(np.diff(x) >= 1.0 / n - 1e-12)
    assert lam[0] == 0.0 and lam[-1] == 0.0
    assert np.min(lam) >= -1e-9
    assert rep.slackness_residual <= 1e-8
    assert rep.consistency_residual <= 1e-8
    assert rep.dissipation_slack >= -1e-10


def test_ties_and_initial_guess_do_not_change_minimizer():
    rng = np.random.default_rng(5)
    xk = project_to_cone(rng.normal(0, 0.3, 30))
    p = builtin_quadratic()
    x1, l1, _ = jko_step(xk, p, tau=0.05)
    x2, l2, _ = jko_step(xk, p, tau=0.05, x_init=xk + rng.normal(0, 0.1, 30), ties="pool")
    assert x2 == pytest.approx(x1, abs=1e-12)
    assert l2 == pytest.approx(l1, abs=1e-10)


def test_step_errors():
    p = builtin_quadratic()
    with pytest.raises(StepSizeError):
        jko_step(np.array([0.0, 1.0]), p, tau=0.3)
    with pytest.raises(StepSizeError):
        jko_step(np.array([0.0, 1.0]), p, tau=-1.0)
    with pytest.raises(InputError):
        jko_step(np.array([0.0, 0.1]), p, tau=0.1)
    with pytest.raises(ConvergenceError) as info:
        jko_step(np.linspace(-3, 3, 20), double_well_confined(), tau=0.05, max_iter=0)
    assert info.value.best is not None


def test_report_serializes():
    _, _, rep = jko_step(np.array([-0.25, 0.25]), builtin_quadratic(), tau=0.1)
    d = rep.to_dict()
    assert d["active_set"] == [1]
    assert set(d) >= {"energy_before", "energy_after", "movement", "kkt_residual", "inner_iterations"}
