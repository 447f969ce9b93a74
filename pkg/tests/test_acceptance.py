"""Acceptance criteria 1-10; each test prints one PASS/FAIL line."""

from __future__ import annotations

import time

import numpy as np
import pytest

from hardcongestion import harness
from hardcongestion.eulerian import bump_family, plateau, weak_form_residual
from hardcongestion.jko import jko_step, project_to_cone
from hardcongestion.metrics import emp_vs_hist_closed_form, emp_vs_hist_quadrature, estimate_suite, suite_passed
from hardcongestion.oracles import brute_force_jko, brute_force_projection
from hardcongestion.potential import builtin_quadratic
from hardcongestion.sampling import density_corpus, quantile_of_density, sample_particles, sampling_error, support_bound
from hardcongestion.trajectory import gap_ratios, integrate


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number:>2}] {'PASS' if ok else 'FAIL'}  {detail}")

    return emit


@pytest.fixture(scope="module")
def kkt_200():
    t0 = time.perf_counter()
    agg = harness.kkt_suite(seed=0, scenarios=200, steps=15)
    agg["wall"] = time.perf_counter() - t0
    return agg


@pytest.fixture(scope="module")
def long_quadratic():
    """N=64 quadratic benchmark out to T=2."""
    x0 = sample_particles(quantile_of_density(harness.quadratic_benchmark().density()), 64)
    return integrate(x0, builtin_quadratic(), None, 1e-3, 2.0)


def test_1_kkt_suite(kkt_200, report):
    a = kkt_200
    ok = (
        a["min_gap_defect"] >= -1e-12
        and a["min_lambda"] >= -1e-9
        and a["boundary_lambda"] == 0.0
        and a["max_slackness"] <= 1e-8
        and a["max_consistency"] <= 1e-8
        and a["wall"] < 120.0
    )
    report(
        1,
        ok,
        f"200 scenarios, {a['steps']} steps: min gap defect {a['min_gap_defect']:.2e}, min lambda {a['min_lambda']:.2e}, "
        f"slackness {a['max_slackness']:.2e}, telescoping {a['max_consistency']:.2e}, {a['wall']:.1f}s",
    )
    assert ok


def test_2_dissipation(kkt_200, quad_traj, dw_traj, long_quadratic, report):
    worst = kkt_200["max_dissipation_violation"]
    for traj in (quad_traj, dw_traj, long_quadratic):
        worst = max(worst, max(-r.dissipation_slack for r in traj.reports))
    ok = worst <= 1e-10
    report(2, ok, f"largest energy+movement increase over all runs {worst:.2e} (<= 1e-10)")
    assert ok


def test_3_a_priori_estimates(quad_sweep_n, dw_sweep_n, quad_traj, dw_traj, long_quadratic, report):
    suites = [r["suite_passed"] for res in (quad_sweep_n, dw_sweep_n) for r in res.records]
    tight = []
    for traj in (quad_traj, dw_traj, long_quadratic):
        recs = estimate_suite(traj)
        suites.append(suite_passed(recs))
        tight.append(max(r.lhs / r.rhs for r in recs if r.name != "equicontinuity"))
    ok = all(suites)
    report(3, ok, f"{len(suites)} trajectories (N <= 256, T <= 2) pass all four bounds; worst lhs/rhs {max(tight):.3f}")
    assert ok


def test_4_gap_growth(quad_traj, dw_traj, report):
    worst = {name: float(np.max(gap_ratios(t))) for name, t in (("quadratic", quad_traj), ("double-well", dw_traj))}
    ok = all(v <= 1.05 for v in worst.values())
    report(4, ok, "max omega_i(t) / (omega_i(0) e^{c2 t}): " + ", ".join(f"{k} {v:.4f}" for k, v in worst.items()))
    assert ok


def test_5_closed_form_wasserstein(report):
    rng = np.random.default_rng(5)
    worst, worst_w1 = 0.0, 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 80))
        x = project_to_cone(rng.normal(0, rng.uniform(0.1, 3.0), n))
        for p in (1, 2):
            worst = max(worst, abs(emp_vs_hist_closed_form(x, p) - emp_vs_hist_quadrature(x, p)))
        worst_w1 = max(worst_w1, abs(emp_vs_hist_quadrature(x, 1) - (x[-1] - (x[0] - 2 / n)) / (2 * n)))
    ok = worst <= 1e-10 and worst_w1 <= 1e-10
    report(5, ok, f"1000 configurations: closed form vs quadrature {worst:.1e}, W1 vs (x_N - x_0)/(2N) {worst_w1:.1e}")
    assert ok


def test_6_brute_force(report):
    rng = np.random.default_rng(6)
    worst_step, worst_proj = 0.0, 0.0
    for trial in range(100):
        n = 2 + trial % 5
        sc = harness.random_scenario(rng, n_range=(n, n))
        xk = project_to_cone(rng.normal(0, 1.5, n))
        x, _, _ = jko_step(xk, sc["potential"], sc["interaction"], sc["tau"])
        ref = brute_force_jko(xk, sc["potential"], sc["interaction"], sc["tau"])
        worst_step = max(worst_step, float(np.max(np.abs(x - ref))))
        y = rng.normal(0, 1, n)
        worst_proj = max(worst_proj, float(np.max(np.abs(project_to_cone(y) - brute_force_projection(y)))))
    ok = worst_step <= 1e-8 and worst_proj <= 1e-10
    report(6, ok, f"N in 2..6, 100 instances: jko_step {worst_step:.1e}, projection {worst_proj:.1e}")
    assert ok


def test_7_steady_state(report):
    tau = 1e-3
    cfg = harness.quadratic_benchmark(n_list=[2, 3, 64], tau_list=[tau], horizon=5.0)
    res = harness.steady_state_benchmark(cfg)
    tol = max(10 * tau, 1e-3)
    pos = max(r["max_position_error"] for r in res.records)
    decay = [r["mean_decay_exponent"] for r in res.records]
    ok = pos <= tol and all(abs(d + 2.0) <= 0.2 for d in decay) and res.checks["multipliers_nonnegative"]
    report(7, ok, f"N in (2, 3, 64), T=5: position error {pos:.1e} (<= {tol:g}); decay exponents " + ", ".join(f"{d:.4f}" for d in decay))
    assert ok


def test_8_weak_form(quad_sweep_tau, report):
    slope = quad_sweep_tau.meta["richardson_slope"]
    n = 16
    x = (np.arange(1, n + 1) - (n + 1) / 2) / n
    eq = integrate(x, builtin_quadratic(), tau=0.01, horizon=0.1)
    family = bump_family(0.1, 0.8) + bump_family(-0.2, 2.0) + [plateau(-0.3, 0.2, 0.25)]
    eq_res = max(weak_form_residual(eq, psi, k) for psi in family for k in range(eq.steps))
    ok = 0.7 <= slope <= 1.3 and eq_res <= 1e-8
    report(8, ok, f"Richardson slope {slope:.4f} in [0.7, 1.3]; equilibrium residual {eq_res:.1e} (<= 1e-8)")
    assert ok


def test_9_convergence_in_n(quad_sweep_n, dw_sweep_n, report):
    parts, ok = [], True
    for name, res in (("quadratic", quad_sweep_n), ("double-well", dw_sweep_n)):
        c = res.checks
        good = c["cauchy_strictly_decreasing"] and c["lambda_gap_ratio"] and c["pressure_gap_ratio"]
        ok = ok and good
        lam_r = max(r["lambda_gap_ratio"] for r in res.records[1:])
        p_r = max(r["pressure_gap_ratio"] for r in res.records[1:])
        cauchy = ", ".join(f"{v:.2e}" for v in res.meta["cauchy"])
        parts.append(f"{name}: W1 Cauchy [{cauchy}], max ratios Lambda {lam_r:.3f} p {p_r:.3f}")
    report(9, ok, "; ".join(parts))
    assert ok


def test_10_sampling(report):
    worst, count = -np.inf, 0
    for rho in density_corpus():
        q = quantile_of_density(rho)
        for n in (4, 16, 64, 256):
            x = sample_particles(q, n)
            worst = max(worst, sampling_error(q, x) - support_bound(q, n))
            count += 1
    ok = worst <= 1e-12
    report(10, ok, f"{count} density/N pairs: max (L1 error - (xi_R - xi_L)/N) = {worst:.2e}")
    assert ok
