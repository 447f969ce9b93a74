"""Time stepping and the interpolants built from a sequence of steps.

Time interpolants on I_k = (k tau, (k+1) tau]:

* ``X^tau(t) = X^{k+1}`` (piecewise constant, ``X^tau(0) = X^0``),
* ``X~^tau(t)`` linear between ``X^k`` and ``X^{k+1}``,
* ``Lambda^tau(t) = Lambda^{k+1}``; at ``t = 0`` we use ``Lambda^1``.

Lagrangian interpolants in the mass variable s in [0, 1] use the knots
s_i = i/N and the ghost particle x_0 = x_1 - 2/N.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, InputError, IntegrationError, StepSizeError
from .jko import StepReport, jko_step
from .potential import InteractionKernel, Potential, effective_c2, interaction_drift, make_interaction, make_potential
from .quantile import QuantileFn


@dataclass
class Trajectory:
    """States X^0..X^K (rows) and multipliers Lambda^1..Lambda^K (rows, length N+1)."""

    tau: float
    states: np.ndarray
    multipliers: np.ndarray
    reports: list
    potential: Potential
    interaction: InteractionKernel | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def horizon(self) -> float:
        return self.steps * self.tau

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.tau

    @property
    def phi_bar(self) -> float:
        """Initial mean potential energy (1/N) sum phi(x_i^0)."""
        return self.potential.energy(self.states[0])

    def multiplier_at_step(self, k: int) -> np.ndarray:
        """Lambda^k for k >= 1; Lambda^0 is taken to be Lambda^1."""
        if self.steps == 0:
            return np.zeros(self.n + 1)
        return self.multipliers[max(k, 1) - 1]

    def velocities(self) -> np.ndarray:
        """(X^{k+1} - X^k) / tau, one row per step."""
        return np.diff(self.states, axis=0) / self.tau


def integrate(
    x0,
    potential: Potential,
    interaction=None,
    tau: float = 1e-3,
    horizon: float = 1.0,
    guess=None,
    **step_kw,
) -> Trajectory:
    """Iterate :func:`jko_step` for K = horizon / tau steps.

    ``guess(k, x)`` may supply the inner solver's starting point for step k.
    On a failing step an :class:`IntegrationError` carries the step index
    and the trajectory computed so far.
    """
    x0 = np.asarray(x0, dtype=float)
    if not tau > 0:
        raise StepSizeError(f"tau must be positive, got {tau}")
    k_float = horizon / tau
    steps = int(round(k_float))
    if steps < 0 or abs(steps - k_float) > 1e-9 * max(1.0, k_float):
        raise InputError(f"horizon {horizon} is not an integer multiple of tau {tau}")
    n = x0.size
    states = np.empty((steps + 1, n))
    states[0] = x0
    mults = np.empty((steps, n + 1))
    reports: list[StepReport] = []
    x = x0
    for k in range(steps):
        try:
            if guess is not None:
                step_kw["x_init"] = guess(k, x)
            x, lam, rep = jko_step(x, potential, interaction, tau, **step_kw)
        except (ConvergenceError, StepSizeError, InputError) as exc:
            partial = Trajectory(tau, states[: k + 1].copy(), mults[:k].copy(), reports, potential, interaction)
            raise IntegrationError(f"step {k} failed: {exc}", step=k, partial=partial) from exc
        states[k + 1] = x
        mults[k] = lam
        reports.append(rep)
    return Trajectory(tau, states, mults, reports, potential, interaction)


def _step_index(traj: Trajectory, t: float) -> int:
    """k with t in (k tau, (k+1) tau]; -1 for t = 0."""
    if not -1e-12 <= t <= traj.horizon * (1 + 1e-12) + 1e-12:
        raise InputError(f"t={t} outside [0, {traj.horizon}]")
    if t <= 0:
        return -1
    k = int(np.ceil(t / traj.tau - 1e-9)) - 1
    return min(max(k, 0), traj.steps - 1)


def eval_time_interpolants(traj: Trajectory, t: float):
    """(X^tau(t), X~^tau(t), Lambda^tau(t))."""
    k = _step_index(traj, t)
    if k < 0:
        x0 = traj.states[0]
        return x0.copy(), x0.copy(), traj.multiplier_at_step(1).copy()
    frac = (t - k * traj.tau) / traj.tau
    xa, xb = traj.states[k], traj.states[k + 1]
    return xb.copy(), xa + frac * (xb - xa), traj.multipliers[k].copy()


def holder_gap(traj: Trajectory) -> tuple[float, float]:
    """(max_t |X^tau(t) - X~^tau(t)|, sqrt(tau N phi_bar)).

    The gap is largest just after t_k, where it equals |X^{k+1} - X^k|.
    """
    if traj.steps == 0:
        return 0.0, float(np.sqrt(traj.tau * traj.n * traj.phi_bar))
    jumps = np.linalg.norm(np.diff(traj.states, axis=0), axis=1)
    return float(np.max(jumps)), float(np.sqrt(traj.tau * traj.n * traj.phi_bar))


# ---------------------------------------------------------------------------
# Lagrangian interpolants


@dataclass(frozen=True)
class LagrangianInterpolant:
    """Polyline in s with repeated knots at jumps.

    ``side`` picks the value at a jump: ``'left'`` for functions defined on
    half-open cells ((i-1)/N, i/N], ``'right'`` for [i/N, (i+1)/N).
    """

    kind: str
    knots: np.ndarray
    values: np.ndarray
    side: str = "left"

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any((s < 0) | (s > 1)):
            raise InputError("s outside [0, 1]")
        k, v = self.knots, self.values
        if self.side == "left":
            hi = np.clip(np.searchsorted(k, s, side="left"), 1, k.size - 1)
            lo = hi - 1
        else:
            lo = np.clip(np.searchsorted(k, s, side="right") - 1, 0, k.size - 2)
            hi = lo + 1
        w = k[hi] - k[lo]
        frac = np.divide(s - k[lo], w, out=np.zeros_like(s), where=w > 0)
        return v[lo] + frac * (v[hi] - v[lo])

    def cells(self):
        """Nondegenerate pieces as (a, b, value at a+, value at b-)."""
        keep = np.diff(self.knots) > 0
        return self.knots[:-1][keep], self.knots[1:][keep], self.values[:-1][keep], self.values[1:][keep]

    def as_quantile(self) -> QuantileFn:
        if not self.kind.startswith("X"):
            raise InputError("only position interpolants are quantile functions")
        kind = "piecewise-constant" if self.kind.endswith("constant") else "piecewise-linear"
        return QuantileFn(self.knots, self.values, kind=kind)


def build_lagrangian_interpolants(x, lam) -> dict:
    """X_N, X~_N, Lambda_N and Lambda~_N for one configuration and multiplier vector."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    n = x.size
    if lam.size != n + 1:
        raise InputError("need N+1 multipliers for N particles")
    edges = np.arange(n + 1) / n
    doubled = np.repeat(edges, 2)[1:-1]
    with_ghost = np.concatenate([[x[0] - 2.0 / n], x])
    return {
        "X_piecewise_constant": LagrangianInterpolant("X_piecewise_constant", doubled, np.repeat(x, 2), "left"),
        "X_piecewise_linear": LagrangianInterpolant("X_piecewise_linear", edges, with_ghost),
        "Lambda_piecewise_constant": LagrangianInterpolant(
            "Lambda_piecewise_constant", doubled, np.repeat(lam[:-1], 2), "right"
        ),
        "Lambda_piecewise_linear": LagrangianInterpolant("Lambda_piecewise_linear", edges, lam.copy()),
    }


def lagrangian_pde_residual(traj: Trajectory, t: float) -> float:
    """max_i |(x_i^{k+1} - x_i^k)/tau + phi'(x_i^{k+1}) [+ pair drift] + N(lambda_i - lambda_{i-1})| on the step containing t."""
    k = max(_step_index(traj, t), 0)
    return step_pde_residual(traj, k)


def step_pde_residual(traj: Trajectory, k: int, lam=None) -> float:
    xa, xb = traj.states[k], traj.states[k + 1]
    lam = traj.multipliers[k] if lam is None else np.asarray(lam, dtype=float)
    r = (xb - xa) / traj.tau + traj.potential.grad(xb) + traj.n * np.diff(lam)
    if traj.interaction is not None:
        r = r + interaction_drift(traj.interaction, xb)
    return float(np.max(np.abs(r)))


# ---------------------------------------------------------------------------
# bounds along a trajectory


def gap_ratios(traj: Trajectory) -> np.ndarray:
    """max_i omega_i(t_k) / (omega_i(0) e^{c2 t_k}) for every k, omega_0 = 2 included."""
    n = traj.n
    c2 = effective_c2(traj.potential, traj.interaction)
    omega = n * np.diff(traj.states, axis=1)
    omega = np.concatenate([np.full((omega.shape[0], 1), 2.0), omega], axis=1)
    growth = np.exp(c2 * traj.times)[:, None]
    return np.max(omega / (omega[0] * growth), axis=1)


def support_ratios(traj: Trajectory) -> np.ndarray:
    """(x_N - x_0)(t_k) / ((x_N - x_0)(0) e^{c2 t_k})."""
    c2 = effective_c2(traj.potential, traj.interaction)
    diam = traj.states[:, -1] - traj.states[:, 0] + 2.0 / traj.n
    return diam / (diam[0] * np.exp(c2 * traj.times))


def slackness_defect(traj: Trajectory) -> float:
    """int_0^T int_0^1 Lambda~_N (1 - d_s X~_N) ds dt, exact.

    On cell [i/N, (i+1)/N] the slope of X~_N is omega_i and Lambda~_N is
    affine from lambda_i to lambda_{i+1}; in time both are constant on
    each step interval.
    """
    n = traj.n
    total = 0.0
    for k in range(traj.steps):
        x = traj.states[k + 1]
        lam = traj.multipliers[k]
        omega = np.concatenate([[2.0], n * np.diff(x)])
        total += float(np.sum((1.0 - omega) * (lam[:-1] + lam[1:]))) / (2 * n)
    return total * traj.tau


def lambda_interp_gap(traj: Trajectory) -> float:
    """||Lambda~_N - Lambda_N||^2 in L^2_t L^inf_s: tau sum_k max_i |lambda_{i+1} - lambda_i|^2."""
    if traj.steps == 0:
        return 0.0
    jumps = np.max(np.abs(np.diff(traj.multipliers, axis=1)), axis=1)
    return float(traj.tau * np.sum(jumps**2))


# ---------------------------------------------------------------------------
# persistence


def save_trajectory(traj: Trajectory, path, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<path>.csv`` (k, t, i, x_i, lambda_i) and ``<path>.json`` metadata.

    Rows run over i = 1..N; lambda_0 = 0 is implied.  Step 0 has no
    multipliers and its lambda column is empty.
    """
    base = Path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    n = traj.n
    with csv_path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["k", "t", "i", "x_i", "lambda_i"])
        for k in range(traj.steps + 1):
            t = k * traj.tau
            lam = traj.multipliers[k - 1] if k > 0 else None
            for i in range(1, n + 1):
                wr.writerow([k, repr(t), i, repr(float(traj.states[k, i - 1])), "" if lam is None else repr(float(lam[i]))])
    meta = {
        "N": n,
        "tau": traj.tau,
        "K": traj.steps,
        "T": traj.horizon,
        "potential": traj.potential.describe(),
        "interaction": None if traj.interaction is None else traj.interaction.describe(),
        "max_kkt_residual": max((r.kkt_residual for r in traj.reports), default=0.0),
        "max_consistency_residual": max((r.consistency_residual for r in traj.reports), default=0.0),
        "max_slackness_residual": max((r.slackness_residual for r in traj.reports), default=0.0),
        "reports": [r.to_dict() for r in traj.reports],
        **traj.meta,
        **(extra or {}),
    }
    json_path.write_text(json.dumps(meta, indent=1))
    return csv_path, json_path


def load_trajectory(path) -> Trajectory:
    base = Path(path)
    meta = json.loads(base.with_suffix(".json").read_text())
    n, steps = int(meta["N"]), int(meta["K"])
    states = np.empty((steps + 1, n))
    mults = np.zeros((steps, n + 1))
    with base.with_suffix(".csv").open() as fh:
        for row in csv.DictReader(fh):
            k, i = int(row["k"]), int(row["i"])
            states[k, i - 1] = float(row["x_i"])
            if k > 0:
                mults[k - 1, i] = float(row["lambda_i"])
    reports = [StepReport(**r) for r in meta.get("reports", [])]
    known = {"N", "tau", "K", "T", "potential", "interaction", "reports"}
    return Trajectory(
        float(meta["tau"]),
        states,
        mults,
        reports,
        make_potential(meta["potential"]),
        make_interaction(meta["interaction"]) if meta.get("interaction") else None,
        meta={k: v for k, v in meta.items() if k not in known and not k.startswith("max_")},
    )
