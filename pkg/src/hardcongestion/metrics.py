"""Wasserstein distances on the line and the a-priori estimate suite."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError
from .eulerian import PiecewiseField, quantile_of_field, with_ghost
from .quantile import QuantileFn, lp_distance_pth
from .trajectory import Trajectory

SNAPSHOTS = 33


@dataclass(frozen=True)
class WassersteinReport:
    order: float
    value: float
    method: str


def wasserstein_p(q1: QuantileFn, q2: QuantileFn, p: float = 1.0, adaptive: bool = False) -> float:
    """(int_0^1 |q1 - q2|^p ds)^(1/p); exact for p in {1, 2}."""
    if not p >= 1:
        raise InputError("p must be >= 1")
    if p not in (1, 2) and not adaptive:
        raise InputError("exact distances only for p in {1, 2}; pass adaptive=True otherwise")
    return lp_distance_pth(q1, q2, p, adaptive=adaptive) ** (1.0 / p)


def wasserstein_report(q1: QuantileFn, q2: QuantileFn, p: float = 1.0) -> WassersteinReport:
    return WassersteinReport(p, wasserstein_p(q1, q2, p), "quantile-quadrature")


def emp_vs_hist_closed_form(x, p: float = 1.0) -> float:
    """W_p between the empirical and the histogram measure of ``x`` in closed form."""
    x = np.asarray(x, dtype=float)
    n = x.size
    gaps = np.diff(with_ghost(x))
    return float((np.sum(np.abs(gaps) ** p) / ((p + 1) * n)) ** (1.0 / p))


def emp_vs_hist_quadrature(x, p: float = 1.0) -> float:
    """The same distance through the two quantile functions."""
    x = np.asarray(x, dtype=float)
    return wasserstein_p(QuantileFn.from_steps(x), QuantileFn.from_nodes(with_ghost(x)), p)


# ---------------------------------------------------------------------------
# Kantorovich-Rubinstein lower bound


@dataclass(frozen=True)
class Witness:
    """Candidate 1-Lipschitz potential with its kinks listed in ``breaks``."""

    func: Callable
    breaks: tuple = ()
    name: str = "witness"


def hinge(c: float) -> Witness:
    return Witness(lambda x: np.abs(np.asarray(x) - c), (float(c),), f"|x-{c:g}|")


def ramp(a: float, b: float) -> Witness:
    """0 left of a, slope 1 on [a, b], flat right of b."""
    return Witness(lambda x: np.clip(np.asarray(x) - a, 0.0, b - a), (float(a), float(b)), f"ramp[{a:g},{b:g}]")


def identity_witness(sign: float = 1.0) -> Witness:
    return Witness(lambda x: sign * np.asarray(x, dtype=float), (), "x" if sign > 0 else "-x")


def _support(f: PiecewiseField):
    pts = [f.breakpoints] if f.breakpoints.size else []
    if f.atoms.size:
        pts.append(f.atoms[:, 0])
    allp = np.concatenate(pts)
    return float(allp.min()), float(allp.max())


def check_lipschitz(w: Witness, lo: float, hi: float, n: int = 4001) -> float:
    grid = np.union1d(np.linspace(lo, hi, n), [b for b in w.breaks if lo <= b <= hi])
    vals = w.func(grid)
    return float(np.max(np.abs(np.diff(vals)) / np.diff(grid)))


def kr_dual_lower_bound(f1: PiecewiseField, f2: PiecewiseField, witnesses) -> float:
    """max over witnesses of |<psi, f1> - <psi, f2>|, a lower bound for W_1."""
    lo1, hi1 = _support(f1)
    lo2, hi2 = _support(f2)
    lo, hi = min(lo1, lo2) - 1.0, max(hi1, hi2) + 1.0
    best = 0.0
    for w in witnesses:
        lip = check_lipschitz(w, lo, hi)
        if lip > 1 + 1e-9:
            raise InputError(f"witness {w.name} has Lipschitz constant {lip:.6g} > 1")
        gap = abs(f1.integrate(w.func, w.breaks) - f2.integrate(w.func, w.breaks))
        best = max(best, gap)
    return best


def default_witnesses(f1: PiecewiseField, f2: PiecewiseField, count: int = 64) -> list[Witness]:
    lo = min(_support(f1)[0], _support(f2)[0])
    hi = max(_support(f1)[1], _support(f2)[1])
    cs = np.linspace(lo, hi, count)
    ws = [identity_witness(1.0), identity_witness(-1.0)]
    ws += [hinge(c) for c in cs]
    ws += [ramp(a, b) for a, b in zip(cs[:-1], cs[1:])]
    ws += [ramp(lo, c) for c in cs[1:]]
    return ws


def field_w1(f1: PiecewiseField, f2: PiecewiseField) -> float:
    return wasserstein_p(quantile_of_field(f1), quantile_of_field(f2), 1)


# ---------------------------------------------------------------------------
# a-priori estimates along a trajectory


@dataclass
class EstimateRecord:
    name: str
    lhs: float
    rhs: float
    margin: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.margin = float(self.rhs - self.lhs)
        self.passed = bool(self.lhs <= self.rhs * (1 + 1e-12) + 1e-14)

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "pass": self.passed}


def snapshot_steps(traj: Trajectory, count: int = SNAPSHOTS) -> np.ndarray:
    """Step indices of (up to) ``count`` uniform times in [0, T]."""
    return np.unique(np.round(np.linspace(0, traj.steps, count)).astype(int))


def estimate_suite(traj: Trajectory) -> list[EstimateRecord]:
    """The four a-priori step estimates plus the time-equicontinuity constant.

    The multiplier bounds use |phi'(x)| <= c2 (1 + |x|), which needs
    |phi'(0)| <= c2; the gradient constant is therefore max(c2, |phi'(0)|).
    """
    n, tau, horizon = traj.n, traj.tau, traj.horizon
    p = traj.potential
    phi_bar = traj.phi_bar
    c0 = p.c0
    c_grad = max(p.c2, float(abs(p.grad(np.zeros(1))[0])))
    ratio = phi_bar / c0 if c0 > 0 else np.inf
    post = traj.states[1:]
    vel = traj.velocities()
    lam = traj.multipliers
    if traj.steps:
        second_moment = float(np.max(np.mean(post**2, axis=1)))
    else:
        second_moment = 0.0
    movement = float(tau / n * np.sum(vel**2))
    press_grad = float(tau / n * np.sum((n * np.diff(lam, axis=1)) ** 2)) if traj.steps else 0.0
    press = float(tau / n * np.sum(lam[:, 1:] ** 2)) if traj.steps else 0.0
    lam_rhs = 4 * c_grad**2 * horizon * (1 + ratio) + 4 * phi_bar

    # W_2^2(rho_N(t1), rho_N(t2)) = (1/N)|X(t2) - X(t1)|^2 on the snapshot grid
    ks = snapshot_steps(traj)
    equi = 0.0
    for a in range(ks.size):
        for b in range(a + 1, ks.size):
            d = traj.states[ks[b]] - traj.states[ks[a]]
            equi = max(equi, float(d @ d / n) / ((ks[b] - ks[a]) * tau))
    return [
        EstimateRecord("second_moment", second_moment, ratio),
        EstimateRecord("movement", movement, 2 * phi_bar),
        EstimateRecord("pressure_gradient", press_grad, lam_rhs),
        EstimateRecord("pressure", press, lam_rhs),
        EstimateRecord("equicontinuity", equi, 2 * phi_bar),
    ]


def suite_passed(records) -> bool:
    return all(r.passed for r in records)


def suite_json(records) -> str:
    return json.dumps([r.to_dict() for r in records], indent=1)
