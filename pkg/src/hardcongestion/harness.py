"""Experiment orchestration: sweeps in tau and N, benchmarks and property checks."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import eulerian, metrics
from .errors import ConfigError
from .jko import jko_step, project_to_cone
from .potential import (
    builtin_quadratic,
    double_well_confined,
    effective_c2,
    gaussian_bump_interaction,
    make_interaction,
    make_potential,
    quadratic_interaction,
)
from .quantile import QuantileFn
from .sampling import (
    MacroDensity,
    quantile_of_density,
    random_blocks,
    sample_particles,
    sampling_error,
    support_bound,
)
from .trajectory import (
    Trajectory,
    eval_time_interpolants,
    gap_ratios,
    holder_gap,
    integrate,
    lambda_interp_gap,
    save_trajectory,
    slackness_defect,
    support_ratios,
)

log = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {
    "tau_guard": 0.5,
    "gap": 1e-12,
    "lambda_neg": 1e-9,
    "slackness": 1e-8,
    "consistency": 1e-8,
    "dissipation": 1e-10,
    "ratio_max": 0.85,
    "residual_ratio": (0.25, 0.75),
    "richardson_slope": (0.7, 1.3),
    "weak_window": None,  # None: the whole horizon
    "gap_growth": 1.05,
}


# ---------------------------------------------------------------------------
# configuration


def _floats(xs):
    if isinstance(xs, (int, float, str)):
        xs = [xs]
    return [float(x) for x in xs]


@dataclass
class ExperimentConfig:
    scenario: str = "quadratic"
    rho0: object = "uniform:-2,2"
    potential: dict = field(default_factory=lambda: {"kind": "quadratic", "center": 0.0, "scale": 1.0})
    interaction: dict | None = None
    n_list: list = field(default_factory=lambda: [64])
    tau_list: list = field(default_factory=lambda: [1e-3])
    horizon: float = 1.0
    tolerances: dict = field(default_factory=dict)
    out: str | None = None
    seed: int = 0
    workers: int = 1
    strict_phi: bool = True

    def __post_init__(self):
        self.n_list = [int(n) for n in (self.n_list if isinstance(self.n_list, (list, tuple)) else [self.n_list])]
        self.tau_list = _floats(self.tau_list)
        self.horizon = float(self.horizon)
        self.tolerances = {**DEFAULT_TOLERANCES, **(self.tolerances or {})}
        if any(n < 2 for n in self.n_list):
            raise ConfigError("every N must be at least 2")
        if any(t <= 0 for t in self.tau_list):
            raise ConfigError("every tau must be positive")
        c2 = effective_c2(self.build_potential(), self.build_interaction())
        guard = self.tolerances["tau_guard"]
        if c2 > 0 and max(self.tau_list) > guard / c2:
            raise ConfigError(f"tau {max(self.tau_list)} exceeds {guard}/c2 = {guard / c2:.4g}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        kw = {
            "scenario": d.pop("scenario", "quadratic"),
            "rho0": d.pop("rho0", "uniform:-2,2"),
            "potential": d.pop("potential", None) or {"kind": "quadratic"},
            "interaction": d.pop("interaction", None),
            "n_list": d.pop("N", d.pop("n_list", [64])),
            "tau_list": d.pop("tau", d.pop("tau_list", [1e-3])),
            "horizon": d.pop("T", d.pop("horizon", 1.0)),
            "tolerances": d.pop("tolerances", {}) or {},
            "out": d.pop("out", None),
            "seed": int(d.pop("seed", 0)),
            "workers": int(d.pop("workers", 1)),
            "strict_phi": bool(d.pop("strict_phi", True)),
        }
        if d:
            raise ConfigError(f"unknown config keys: {sorted(d)}")
        return cls(**kw)

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
        return cls.from_dict(data)

    def build_potential(self):
        spec = dict(self.potential)
        spec.setdefault("strict_phi", self.strict_phi)
        return make_potential(spec)

    def build_interaction(self):
        return make_interaction(self.interaction)

    def density(self) -> MacroDensity:
        return MacroDensity.from_spec(self.rho0)

    def initial_quantile(self) -> QuantileFn:
        return quantile_of_density(self.density())

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "rho0": self.rho0 if isinstance(self.rho0, (str, dict)) else self.density().to_dict(),
            "potential": self.potential,
            "interaction": self.interaction,
            "N": self.n_list,
            "tau": self.tau_list,
            "T": self.horizon,
            "tolerances": {k: list(v) if isinstance(v, tuple) else v for k, v in self.tolerances.items()},
            "out": self.out,
            "seed": self.seed,
            "workers": self.workers,
            "strict_phi": self.strict_phi,
        }


def quadratic_benchmark(**kw) -> ExperimentConfig:
    """phi = 1 + x^2, rho0 = 1/4 on [-2, 2]."""
    base = dict(scenario="quadratic", rho0="uniform:-2,2", potential={"kind": "quadratic", "center": 0.0, "scale": 1.0})
    base.update(kw)
    return ExperimentConfig(**base)


def double_well_benchmark(**kw) -> ExperimentConfig:
    """Confined double well, rho0 = 1/4 on [-1.7, 2.3] (off-centre so both wells fill unevenly)."""
    base = dict(
        scenario="double-well",
        rho0="uniform:-1.7,2.3",
        potential={"kind": "double_well_confined", "scale": 0.5, "height": 2.0, "width": 1.0},
    )
    base.update(kw)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# results


@dataclass
class SweepResult:
    name: str
    records: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "checks": self.checks, "records": self.records, "meta": self.meta}

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{self.name}.json").write_text(json.dumps(self.to_dict(), indent=1, default=_jsonable))
        scalar_keys = []
        for rec in self.records:
            for k, v in rec.items():
                if isinstance(v, (int, float, str, bool, np.floating, np.integer)) and k not in scalar_keys:
                    scalar_keys.append(k)
        with (out / f"{self.name}.csv").open("w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=scalar_keys, extrasaction="ignore")
            wr.writeheader()
            for rec in self.records:
                wr.writerow({k: rec.get(k, "") for k in scalar_keys})
        return out

    def summary_lines(self) -> list[str]:
        return [f"{'PASS' if ok else 'FAIL'}  {self.name}: {name}" for name, ok in self.checks.items()]


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return str(obj)


# ---------------------------------------------------------------------------
# jobs


def run_job(job: dict) -> Trajectory:
    """Build everything from plain data so jobs can cross process boundaries."""
    pot = make_potential(job["potential"])
    inter = make_interaction(job.get("interaction"))
    x0 = np.asarray(job["x0"], dtype=float)
    t0 = time.perf_counter()
    traj = integrate(x0, pot, inter, job["tau"], job["T"], tau_guard=job.get("tau_guard", 0.5))
    traj.meta["wall_time"] = time.perf_counter() - t0
    return traj


def _map(func, jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, jobs))
    return [func(j) for j in jobs]


def _job(cfg: ExperimentConfig, n: int, tau: float) -> dict:
    pot = dict(cfg.potential)
    pot.setdefault("strict_phi", cfg.strict_phi)
    return {
        "potential": pot,
        "interaction": cfg.interaction,
        "x0": sample_particles(cfg.initial_quantile(), n).tolist(),
        "tau": tau,
        "T": cfg.horizon,
        "tau_guard": cfg.tolerances["tau_guard"],
    }


def trajectory_checks(traj: Trajectory, tol: dict | None = None) -> dict:
    """Per-step constraint, multiplier and dissipation diagnostics."""
    tol = {**DEFAULT_TOLERANCES, **(tol or {})}
    n = traj.n
    gaps = np.diff(traj.states, axis=1)
    lam = traj.multipliers
    out = {
        "min_gap_defect": float(np.min(gaps - 1.0 / n)) if n > 1 else 0.0,
        "min_lambda": float(np.min(lam)) if lam.size else 0.0,
        "boundary_lambda": float(np.max(np.abs(lam[:, [0, -1]]))) if lam.size else 0.0,
        "max_slackness": max((r.slackness_residual for r in traj.reports), default=0.0),
        "max_consistency": max((r.consistency_residual for r in traj.reports), default=0.0),
        "max_dissipation_violation": max((-r.dissipation_slack for r in traj.reports), default=0.0),
    }
    out["ok"] = bool(
        out["min_gap_defect"] >= -tol["gap"]
        and out["min_lambda"] >= -tol["lambda_neg"]
        and out["boundary_lambda"] == 0.0
        and out["max_slackness"] <= tol["slackness"]
        and out["max_consistency"] <= tol["consistency"]
        and out["max_dissipation_violation"] <= tol["dissipation"]
    )
    return out


def _strictly_decreasing(col, floor=1e-14) -> bool:
    col = np.asarray(col, dtype=float)
    if col.size < 2 or not np.all(np.isfinite(col)):
        return bool(col.size < 2 and np.all(np.isfinite(col)))
    return bool(np.all((col[1:] < col[:-1]) | (np.maximum(col[1:], col[:-1]) <= floor)))


def _ratios(col) -> list:
    col = np.asarray(col, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (col[1:] / col[:-1]).tolist()


# ---------------------------------------------------------------------------
# sweeps


def sweep_tau(cfg: ExperimentConfig, family=None) -> SweepResult:
    """Self-convergence in tau at fixed N from identical initial data."""
    taus = cfg.tau_list
    if len(taus) < 2 or not np.allclose(np.asarray(taus[1:]) / np.asarray(taus[:-1]), 0.5, rtol=1e-9, atol=0):
        raise ConfigError("sweep_tau needs a halving tau list with at least two entries")
    n = cfg.n_list[0]
    trajs = _map(run_job, [_job(cfg, n, t) for t in taus], cfg.workers)
    family = family or eulerian.bump_family(0.0, 2.5)
    window = cfg.tolerances["weak_window"] or cfg.horizon
    records, residuals = [], []
    for tau, traj in zip(taus, trajs):
        k_max = int(round(min(window, cfg.horizon) / tau))
        res = eulerian.mean_weak_residual(traj, family, k_max)
        residuals.append(res)
        suite = metrics.estimate_suite(traj)
        records.append(
            {
                "N": n,
                "tau": tau,
                "weak_residual": res,
                "suite_passed": metrics.suite_passed(suite),
                "estimates": [r.to_dict() for r in suite],
                "checks_ok": trajectory_checks(traj, cfg.tolerances)["ok"],
                "wall_time": traj.meta.get("wall_time", 0.0),
            }
        )
    cauchy = []
    for j in range(len(trajs) - 1):
        d = trajs[j].states[-1] - trajs[j + 1].states[-1]
        cauchy.append(float(np.sqrt(d @ d / n)))
        records[j]["cauchy_w2_T"] = cauchy[-1]
    ratios = _ratios(residuals)
    for j, r in enumerate(ratios):
        records[j + 1]["residual_ratio"] = r
    lo, hi = cfg.tolerances["residual_ratio"]
    res_arr = np.asarray(residuals)
    trivial = bool(np.all(res_arr <= 1e-12))
    slope = float(np.polyfit(np.log(taus), np.log(np.maximum(res_arr, 1e-300)), 1)[0]) if not trivial else float("nan")
    s_lo, s_hi = cfg.tolerances["richardson_slope"]
    checks = {
        "cauchy_decreasing": _strictly_decreasing(cauchy),
        "residual_ratio_half": trivial or all(lo <= r <= hi for r in ratios),
        "richardson_slope": trivial or s_lo <= slope <= s_hi,
        "estimates": all(r["suite_passed"] for r in records),
        "constraints": all(r["checks_ok"] for r in records),
    }
    result = SweepResult("sweep_tau", records, checks, {"config": cfg.to_dict(), "richardson_slope": slope, "cauchy": cauchy})
    if cfg.out:
        result.write(cfg.out)
    return result


def snapshot_times(horizon: float, count: int = metrics.SNAPSHOTS) -> np.ndarray:
    return np.linspace(0.0, horizon, count)


def _w1_steps(xa, xb) -> float:
    return metrics.wasserstein_p(QuantileFn.from_steps(xa), QuantileFn.from_steps(xb), 1)


def sweep_N(cfg: ExperimentConfig) -> SweepResult:
    """Cauchy study in N: sup over snapshots of W_1(rho_N(t), rho_2N(t))."""
    ns = cfg.n_list
    if len(ns) < 2 or any(b != 2 * a for a, b in zip(ns[:-1], ns[1:])):
        raise ConfigError("sweep_N needs a doubling N list with at least two entries")
    tau = cfg.tau_list[0]
    trajs = _map(run_job, [_job(cfg, n, tau) for n in ns], cfg.workers)
    times = snapshot_times(cfg.horizon)
    x0 = cfg.initial_quantile()
    records = []
    for n, traj in zip(ns, trajs):
        snaps = [eval_time_interpolants(traj, t)[0] for t in times]
        closed = [metrics.emp_vs_hist_closed_form(x, 1) for x in snaps]
        quad = [metrics.emp_vs_hist_quadrature(x, 1) for x in snaps]
        suite = metrics.estimate_suite(traj)
        hold, hold_bound = holder_gap(traj)
        records.append(
            {
                "N": n,
                "tau": tau,
                "sampling_error": sampling_error(x0, traj.states[0]),
                "sampling_bound": support_bound(x0, n),
                "emp_hist_w1_sup": max(closed),
                "emp_hist_closed_vs_quadrature": float(np.max(np.abs(np.subtract(closed, quad)))),
                "lambda_gap": float(np.sqrt(lambda_interp_gap(traj))),
                "pressure_gap": float(np.sqrt(eulerian.pressure_gap(traj))),
                "slackness_defect": slackness_defect(traj),
                "gap_growth_max": float(np.max(gap_ratios(traj))),
                "support_growth_max": float(np.max(support_ratios(traj))),
                "holder_gap": hold,
                "holder_bound": hold_bound,
                "suite_passed": metrics.suite_passed(suite),
                "estimates": [r.to_dict() for r in suite],
                "checks_ok": trajectory_checks(traj, cfg.tolerances)["ok"],
                "wall_time": traj.meta.get("wall_time", 0.0),
                "_snaps": snaps,
            }
        )
    cauchy = []
    for j in range(len(ns) - 1):
        d = max(_w1_steps(a, b) for a, b in zip(records[j]["_snaps"], records[j + 1]["_snaps"]))
        cauchy.append(d)
        records[j]["cauchy_w1_sup"] = d
    for r in records:
        r.pop("_snaps")
    for key in ("cauchy_w1_sup", "lambda_gap", "pressure_gap"):
        col = [r[key] for r in records if key in r]
        for j, ratio in enumerate(_ratios(col)):
            records[j + 1][f"{key}_ratio"] = ratio
            records[j + 1][f"{key}_rate"] = float(-np.log2(ratio)) if ratio > 0 else float("nan")
    rmax = cfg.tolerances["ratio_max"]

    def ratio_ok(key):
        # pairs where both entries are roundoff (no contacts yet) carry no information
        col = np.asarray([r[key] for r in records])
        return all(b <= rmax * a or max(a, b) <= 1e-12 for a, b in zip(col[:-1], col[1:]))

    checks = {
        "cauchy_strictly_decreasing": _strictly_decreasing(cauchy),
        "lambda_gap_ratio": ratio_ok("lambda_gap"),
        "pressure_gap_ratio": ratio_ok("pressure_gap"),
        "emp_hist_closed_form": all(r["emp_hist_closed_vs_quadrature"] <= 1e-10 for r in records),
        "sampling_bound": all(r["sampling_error"] <= r["sampling_bound"] + 1e-12 for r in records),
        "estimates": all(r["suite_passed"] for r in records),
        "constraints": all(r["checks_ok"] for r in records),
    }
    result = SweepResult("sweep_N", records, checks, {"config": cfg.to_dict(), "cauchy": cauchy})
    if cfg.out:
        result.write(cfg.out)
    return result


# ---------------------------------------------------------------------------
# benchmarks


def lattice(n: int) -> np.ndarray:
    """Equilibrium of phi = 1 + x^2 on K_N: one touching block centred at 0."""
    return (np.arange(1, n + 1) - (n + 1) / 2) / n


def lattice_multipliers(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.concatenate([[0.0], -2.0 * np.cumsum(x) / x.size])


def steady_state_benchmark(cfg: ExperimentConfig) -> SweepResult:
    """Long runs of the quadratic benchmark compared with the touching lattice."""
    pot = cfg.build_potential()
    if pot.name != "quadratic" or pot.params.get("center", 0.0) != 0.0 or pot.params.get("scale", 1.0) != 1.0:
        raise ConfigError("steady state benchmark needs phi = 1 + x^2")
    tau = cfg.tau_list[0]
    horizon = cfg.horizon
    trajs = _map(run_job, [_job(cfg, n, tau) for n in cfg.n_list], cfg.workers)
    records = []
    for n, traj in zip(cfg.n_list, trajs):
        xf = traj.states[-1]
        lam = traj.multipliers[-1] if traj.steps else np.zeros(n + 1)
        pos_err = float(np.max(np.abs(xf - lattice(n))))
        lam_err = float(np.max(np.abs(lam - lattice_multipliers(xf))))
        means = traj.states.mean(axis=1)
        keep = np.abs(means) > 1e-12
        slope = float(np.polyfit(traj.times[keep], np.log(np.abs(means[keep])), 1)[0]) if keep.sum() > 2 else float("nan")
        tol = 10.0 * (tau + np.exp(-2.0 * horizon))
        records.append(
            {
                "N": n,
                "tau": tau,
                "T": horizon,
                "max_position_error": pos_err,
                "position_tolerance": float(tol),
                "lambda_error": lam_err,
                "min_lambda": float(np.min(lam)),
                "mean_decay_exponent": slope,
                "final_positions": xf.tolist() if n <= 8 else None,
                "final_multipliers": lam.tolist() if n <= 8 else None,
            }
        )
    checks = {
        "positions": all(r["max_position_error"] <= r["position_tolerance"] for r in records),
        "multipliers_match": all(r["lambda_error"] <= r["position_tolerance"] for r in records),
        "multipliers_nonnegative": all(r["min_lambda"] >= -cfg.tolerances["lambda_neg"] for r in records),
        "mean_decay": all(abs(r["mean_decay_exponent"] + 2.0) <= 0.2 for r in records),
    }
    result = SweepResult("steady_state", records, checks, {"config": cfg.to_dict()})
    if cfg.out:
        result.write(cfg.out)
    return result


def uniqueness_probe(cfg: ExperimentConfig, perturbation: float = 1e-3) -> SweepResult:
    """Re-run with perturbed inner starting points and the other PAV tie rule."""
    n, tau = cfg.n_list[0], cfg.tau_list[0]
    job = _job(cfg, n, tau)
    pot = make_potential(job["potential"])
    inter = make_interaction(job["interaction"])
    x0 = np.asarray(job["x0"])
    base = integrate(x0, pot, inter, tau, cfg.horizon)
    again = integrate(x0, pot, inter, tau, cfg.horizon)
    rng = np.random.default_rng(cfg.seed)

    def guess(k, x):
        return x + perturbation * rng.standard_normal(x.size)

    other = integrate(x0, pot, inter, tau, cfg.horizon, guess=guess, ties="pool")
    tol_kkt = 1e-10 * n
    bound = 10 * tol_kkt * max(base.steps, 1)
    diff = float(np.linalg.norm(base.states[-1] - other.states[-1]))
    ys = rng.standard_normal((20, n)) * 0.1
    tie_gap = max(float(np.max(np.abs(project_to_cone(y) - project_to_cone(y, ties="pool")))) for y in ys)
    rec = {
        "N": n,
        "tau": tau,
        "steps": base.steps,
        "bitwise_identical": bool(np.array_equal(base.states, again.states) and np.array_equal(base.multipliers, again.multipliers)),
        "perturbed_difference": diff,
        "bound": bound,
        "tie_rule_difference": tie_gap,
    }
    checks = {
        "deterministic": rec["bitwise_identical"],
        "perturbed_within_bound": diff <= bound,
        "tie_rules_agree": tie_gap <= 1e-13,
    }
    result = SweepResult("uniqueness", [rec], checks, {"config": cfg.to_dict()})
    if cfg.out:
        result.write(cfg.out)
    return result


def timing_scan(ns=(32, 64, 128, 256, 512), steps: int = 20, tau: float = 1e-3) -> SweepResult:
    """Mean wall time per step on the quadratic benchmark; log-log slope below 2."""
    pot = builtin_quadratic()
    x0q = quantile_of_density(MacroDensity.uniform(-2.0, 2.0))
    records = []
    for n in ns:
        x = sample_particles(x0q, n)
        # run into the congested regime first so the contact logic is exercised
        x = integrate(x, pot, None, 0.01, 1.0).states[-1]
        t0 = time.perf_counter()
        for _ in range(steps):
            x, _, _ = jko_step(x, pot, None, tau)
        records.append({"N": n, "seconds_per_step": (time.perf_counter() - t0) / steps})
    slope = float(np.polyfit(np.log(ns), np.log([r["seconds_per_step"] for r in records]), 1)[0])
    return SweepResult("timing", records, {"sub_quadratic": slope < 2.0}, {"loglog_slope": slope})


# ---------------------------------------------------------------------------
# randomized property suite


def random_scenario(rng: np.random.Generator, n_range=(2, 48)) -> dict:
    """Random density, particle count, potential, optional interaction and admissible tau."""
    rho0 = random_blocks(rng)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    kind = int(rng.integers(0, 3))
    if kind == 0:
        pot = builtin_quadratic(float(rng.uniform(-1, 1)), float(rng.uniform(0.5, 2.0)))
    elif kind == 1:
        pot = double_well_confined(float(rng.uniform(0.3, 1.0)), float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.5, 1.5)))
    else:
        pot = builtin_quadratic(0.0, float(rng.uniform(0.2, 4.0)))
    u = rng.random()
    inter = None
    if u < 0.2:
        inter = quadratic_interaction(float(rng.uniform(-0.5, 1.0)))
    elif u < 0.35:
        inter = gaussian_bump_interaction(float(rng.uniform(-1.0, 1.0)), float(rng.uniform(0.3, 1.5)))
    c2 = effective_c2(pot, inter)
    tau = float(rng.uniform(0.02, 1.0)) * 0.5 / c2
    x0 = sample_particles(quantile_of_density(rho0), n)
    return {"rho0": rho0, "N": n, "potential": pot, "interaction": inter, "tau": tau, "x0": x0}


def kkt_suite(seed: int = 0, scenarios: int = 200, steps: int = 15) -> dict:
    """Aggregate constraint/multiplier/dissipation diagnostics over random scenarios."""
    rng = np.random.default_rng(seed)
    agg = {
        "min_gap_defect": np.inf,
        "min_lambda": np.inf,
        "boundary_lambda": 0.0,
        "max_slackness": 0.0,
        "max_consistency": 0.0,
        "max_dissipation_violation": -np.inf,
        "steps": 0,
    }
    t0 = time.perf_counter()
    for _ in range(scenarios):
        sc = random_scenario(rng)
        traj = integrate(sc["x0"], sc["potential"], sc["interaction"], sc["tau"], steps * sc["tau"])
        c = trajectory_checks(traj)
        agg["min_gap_defect"] = min(agg["min_gap_defect"], c["min_gap_defect"])
        agg["min_lambda"] = min(agg["min_lambda"], c["min_lambda"])
        for key in ("boundary_lambda", "max_slackness", "max_consistency", "max_dissipation_violation"):
            agg[key] = max(agg[key], c[key])
        agg["steps"] += traj.steps
    agg["seconds"] = time.perf_counter() - t0
    return agg


def validate(seed: int = 0, scenarios: int = 200, out=None) -> SweepResult:
    """Quick property suite: random KKT checks, sampling bound, closed forms, oracles."""
    from .oracles import brute_force_jko, brute_force_projection

    rng = np.random.default_rng(seed)
    kkt = kkt_suite(seed, scenarios, steps=10)
    checks = {
        "gaps": kkt["min_gap_defect"] >= -1e-12,
        "lambda_nonnegative": kkt["min_lambda"] >= -1e-9,
        "lambda_boundary": kkt["boundary_lambda"] == 0.0,
        "slackness": kkt["max_slackness"] <= 1e-8,
        "telescoping": kkt["max_consistency"] <= 1e-8,
        "dissipation": kkt["max_dissipation_violation"] <= 1e-10,
    }
    worst_sampling, worst_closed, worst_oracle, worst_proj = -np.inf, 0.0, 0.0, 0.0
    for _ in range(scenarios):
        sc = random_scenario(rng)
        x0q = quantile_of_density(sc["rho0"])
        worst_sampling = max(worst_sampling, sampling_error(x0q, sc["x0"]) - support_bound(x0q, sc["N"]))
        for p in (1, 2):
            worst_closed = max(
                worst_closed, abs(metrics.emp_vs_hist_closed_form(sc["x0"], p) - metrics.emp_vs_hist_quadrature(sc["x0"], p))
            )
        n = int(rng.integers(2, 7))
        xs = project_to_cone(rng.normal(0, 1, n))
        x, _, _ = jko_step(xs, sc["potential"], sc["interaction"], sc["tau"])
        worst_oracle = max(worst_oracle, float(np.max(np.abs(x - brute_force_jko(xs, sc["potential"], sc["interaction"], sc["tau"])))))
        y = rng.normal(0, 1, n)
        worst_proj = max(worst_proj, float(np.max(np.abs(project_to_cone(y) - brute_force_projection(y)))))
    checks["sampling_bound"] = worst_sampling <= 1e-12
    checks["closed_form_wasserstein"] = worst_closed <= 1e-10
    checks["oracle_jko"] = worst_oracle <= 1e-8
    checks["oracle_projection"] = worst_proj <= 1e-10
    rec = {
        **{k: float(v) for k, v in kkt.items()},
        "sampling_excess": float(worst_sampling),
        "closed_form_error": worst_closed,
        "oracle_jko_error": worst_oracle,
        "oracle_projection_error": worst_proj,
    }
    result = SweepResult("validate", [rec], checks, {"seed": seed, "scenarios": scenarios})
    if out:
        result.write(out)
    return result


# ---------------------------------------------------------------------------
# field export


def export_fields(traj: Trajectory, path, every: int = 1) -> Path:
    """CSV with columns k, t, field, x_left, x_right, value, slope for every ``every``-th step."""
    if every < 1:
        raise ConfigError("--every must be a positive integer")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["k", "t", "field", "x_left", "x_right", "value", "slope"])
        for k in range(0, traj.steps + 1, every):
            x = traj.states[k]
            lam = traj.multiplier_at_step(k)
            t = k * traj.tau
            for loc in x:
                wr.writerow([k, repr(t), "rho_N", repr(float(loc)), repr(float(loc)), repr(1.0 / traj.n), 0.0])
            fields = [("rho_tilde", eulerian.histogram_density(x))]
            p_const, p_lin = eulerian.pressure_fields(x, lam)
            fields += [("p_N", p_const), ("p_tilde", p_lin)]
            for name, f in fields:
                a, b, va, _ = f.cells()
                for aj, bj, vj, sj in zip(a, b, va, f.slope):
                    wr.writerow([k, repr(t), name, repr(float(aj)), repr(float(bj)), repr(float(vj)), repr(float(sj))])
    return path


def simulate(cfg: ExperimentConfig) -> tuple[Trajectory, dict]:
    """Single run at (N_list[0], tau_list[0]) with diagnostics."""
    traj = run_job(_job(cfg, cfg.n_list[0], cfg.tau_list[0]))
    suite = metrics.estimate_suite(traj)
    hold, hold_bound = holder_gap(traj)
    diag = {
        **trajectory_checks(traj, cfg.tolerances),
        "estimates": [r.to_dict() for r in suite],
        "estimates_ok": metrics.suite_passed(suite),
        "holder_gap": hold,
        "holder_bound": hold_bound,
        "gap_growth_max": float(np.max(gap_ratios(traj))),
        "support_growth_max": float(np.max(support_ratios(traj))),
        "slackness_defect": slackness_defect(traj),
    }
    diag["ok"] = bool(diag["ok"] and diag["estimates_ok"] and hold <= hold_bound)
    if cfg.out:
        save_trajectory(traj, Path(cfg.out) / "trajectory", {"config": cfg.to_dict()})
        (Path(cfg.out) / "diagnostics.json").write_text(json.dumps(diag, indent=1, default=_jsonable))
    return traj, diag
