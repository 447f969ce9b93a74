"""One minimizing-movement step under the non-overlap constraint.

Each step minimizes

    F(X) = (1/N) sum phi(x_i) + |X - X^k|^2 / (2 N tau) + (1/(2 N^2)) sum_{i,j} W(x_i - x_j)

over the cone K_N = {x_{i+1} - x_i >= 1/N}.  The solver works with the
scaled objective G = N F whose gradient is

    g_i = phi'(x_i) + (x_i - x_i^k) / tau + (1/N) sum_j W'(x_i - x_j).

Projection onto K_N is an isotonic regression after the shift
y_i = x_i - i/N, solved exactly by pool-adjacent-violators.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InputError, StepSizeError
from .potential import InteractionKernel, Potential, effective_c2, interaction_drift

log = logging.getLogger(__name__)

ACTIVE_TOL = 1e-12
TAU_GUARD = 0.5
_ARMIJO = 1e-4


# ---------------------------------------------------------------------------
# projection onto K_N


def pav(values, weights=None, ties: str = "strict") -> np.ndarray:
    """Weighted isotonic regression: argmin sum w_i (z_i - v_i)^2 with z nondecreasing.

    ``ties='pool'`` also merges neighbouring blocks with equal means; the
    result is the same vector, only the pooling order differs.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n == 0:
        return v.copy()
    if not np.all(np.isfinite(v)):
        raise InputError("values must be finite")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != v.shape or np.any(w <= 0):
        raise InputError("weights must be positive and match the values")
    if ties not in ("strict", "pool"):
        raise InputError(f"unknown tie rule {ties!r}")
    pool_equal = ties == "pool"
    # block stacks: weighted sum, weight, mean, length
    ws, ww, mm, ln = [], [], [], []
    for vi, wi in zip(v.tolist(), w.tolist()):
        s, t, m, c = wi * vi, wi, vi, 1
        while mm and (mm[-1] > m or (pool_equal and mm[-1] == m)):
            s += ws.pop()
            t += ww.pop()
            c += ln.pop()
            mm.pop()
            m = s / t
        ws.append(s)
        ww.append(t)
        mm.append(m)
        ln.append(c)
    return np.repeat(np.asarray(mm), np.asarray(ln))


def project_to_cone(y, weights=None, ties: str = "strict") -> np.ndarray:
    """(Weighted) Euclidean projection onto {z_{i+1} - z_i >= 1/N}."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise InputError("projection input must be finite")
    shift = np.arange(1, y.size + 1) / y.size
    return pav(y - shift, weights, ties) + shift


# ---------------------------------------------------------------------------
# objective


class _Objective:
    """Scaled objective G = N F with gradient and Hessian pieces."""

    def __init__(self, xk, p: Potential, w: InteractionKernel | None, tau: float):
        self.xk = xk
        self.p = p
        self.w = w
        self.tau = tau
        self.n = xk.size

    def value(self, x) -> float:
        d = x - self.xk
        out = float(np.sum(self.p.value(x)) + d @ d / (2 * self.tau))
        if self.w is not None:
            out += self.n * self.w.energy(x)
        return out

    def grad(self, x) -> np.ndarray:
        g = self.p.grad(x) + (x - self.xk) / self.tau
        if self.w is not None:
            g = g + interaction_drift(self.w, x)
        return g

    def hess_diag(self, x) -> np.ndarray:
        h = self.p.hess(x) + 1.0 / self.tau
        if self.w is not None:
            wh = self.w.hess(x[:, None] - x[None, :])
            h = h + (wh.sum(axis=1) - np.diag(wh)) / self.n
        return h

    def hess_dense(self, x) -> np.ndarray:
        h = np.diag(self.p.hess(x) + 1.0 / self.tau)
        if self.w is not None:
            wh = self.w.hess(x[:, None] - x[None, :]) / self.n
            np.fill_diagonal(wh, 0.0)
            h += np.diag(wh.sum(axis=1)) - wh
        return h


def _residual(x, g, tau) -> float:
    """Projected-gradient residual ||x - P(x - tau g)||_inf / tau."""
    return float(np.max(np.abs(x - project_to_cone(x - tau * g))) / tau)


def active_set(x, tol: float = ACTIVE_TOL) -> np.ndarray:
    """1-based indices i with x_{i+1} - x_i within ``tol`` of 1/N."""
    x = np.asarray(x, dtype=float)
    return np.flatnonzero(np.diff(x) <= 1.0 / x.size + tol) + 1


def _telescope(g, n) -> np.ndarray:
    return np.concatenate([[0.0], -np.cumsum(g) / n])


# ---------------------------------------------------------------------------
# step


@dataclass
class StepReport:
    energy_before: float
    energy_after: float
    movement: float
    kkt_residual: float
    slackness_residual: float
    consistency_residual: float
    active_set: list = field(default_factory=list)
    inner_iterations: int = 0
    polished: bool = False
    wall_time: float = 0.0

    @property
    def dissipation_slack(self) -> float:
        """energy_before - energy_after - movement (nonnegative up to roundoff)."""
        return self.energy_before - self.energy_after - self.movement

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["active_set"] = [int(i) for i in self.active_set]
        return d


def _polish(obj: _Objective, x, tol_lam):
    """Reduced Newton on the contact blocks of ``x``; None if the result is not admissible."""
    n = obj.n
    starts = np.concatenate([[0], np.flatnonzero(np.diff(x) > 1.0 / n + ACTIVE_TOL) + 1])
    lengths = np.diff(np.concatenate([starts, [n]]))
    block = np.repeat(np.arange(starts.size), lengths)
    offset = (np.arange(n) - starts[block]) / n
    c = np.add.reduceat(x - offset, starts) / lengths
    for _ in range(30):
        z = c[block] + offset
        rg = np.add.reduceat(obj.grad(z), starts)
        if obj.w is None:
            step = rg / np.add.reduceat(obj.hess_diag(z), starts)
        else:
            h = obj.hess_dense(z)
            h = np.add.reduceat(np.add.reduceat(h, starts, axis=0), starts, axis=1)
            step = np.linalg.solve(h, rg)
        c = c - step
        if np.max(np.abs(step)) <= 1e-15 * max(1.0, float(np.max(np.abs(c)))):
            break
    z = c[block] + offset
    if np.any(np.diff(z) < 1.0 / n - ACTIVE_TOL) or not np.all(np.isfinite(z)):
        return None
    lam = _telescope(obj.grad(z), n)
    if np.min(lam[1:-1], initial=0.0) < -tol_lam:
        return None
    return z


def jko_step(
    xk,
    potential: Potential,
    interaction: InteractionKernel | None = None,
    tau: float = 1e-3,
    tol_kkt: float | None = None,
    max_iter: int | None = None,
    tau_guard: float = TAU_GUARD,
    x_init=None,
    ties: str = "strict",
):
    """Advance ``xk`` by one minimizing-movement step.

    Returns ``(x_next, lam, report)`` with ``lam`` = (lambda_0, ..., lambda_N).
    The iteration is a projected Newton method with diagonal scaling (the
    projection is a weighted isotonic regression) and Armijo backtracking;
    once the contact set settles a reduced Newton solve on the contact
    blocks drives the residual to roundoff.
    """
    t0 = time.perf_counter()
    xk = np.asarray(xk, dtype=float)
    n = xk.size
    if n < 1 or not np.all(np.isfinite(xk)):
        raise InputError("configuration must be a finite nonempty vector")
    if np.any(np.diff(xk) < 1.0 / n - ACTIVE_TOL):
        raise InputError("configuration violates the non-overlap constraint")
    if not tau > 0:
        raise StepSizeError(f"tau must be positive, got {tau}")
    c2 = effective_c2(potential, interaction)
    if c2 > 0 and tau > tau_guard / c2:
        raise StepSizeError(f"tau={tau} exceeds the guard {tau_guard}/c2 = {tau_guard / c2}")
    tol_kkt = 1e-10 * n if tol_kkt is None else tol_kkt
    max_iter = 10 * n + 200 if max_iter is None else max_iter

    obj = _Objective(xk, potential, interaction, tau)
    x = xk.copy() if x_init is None else project_to_cone(np.asarray(x_init, dtype=float), ties=ties)
    best, best_res = x, np.inf
    prev_active, stable, polished = None, 0, False
    it = 0
    while True:
        g = obj.grad(x)
        res = _residual(x, g, tau)
        if res < best_res:
            best, best_res = x, res
        act = active_set(x)
        if res <= tol_kkt:
            # one more reduced solve squeezes the multipliers to roundoff
            z = _polish(obj, x, tol_kkt)
            if z is not None and _residual(z, obj.grad(z), tau) <= res:
                x, polished = z, True
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"no convergence after {it} iterations (residual {best_res:.3e} > {tol_kkt:.3e})",
                best=best,
                residual=best_res,
                iterations=it,
            )
        it += 1
        stable = stable + 1 if prev_active is not None and np.array_equal(act, prev_active) else 0
        prev_active = act
        if stable >= 3:
            z = _polish(obj, x, tol_kkt)
            if z is not None and _residual(z, obj.grad(z), tau) <= tol_kkt:
                x, polished = z, True
                continue
        d_scale = np.maximum(obj.hess_diag(x), 0.5 / tau)
        z = project_to_cone(x - g / d_scale, d_scale, ties)
        d = z - x
        slope = float(g @ d)
        f0 = obj.value(x)
        step = 1.0
        while step > 1e-12:
            trial = x + step * d
            if obj.value(trial) <= f0 + _ARMIJO * step * slope + 1e-15 * abs(f0):
                break
            step *= 0.5
        x = x + step * d
        # keep strict feasibility against roundoff in the convex combination
        if np.any(np.diff(x) < 1.0 / n - ACTIVE_TOL):
            x = project_to_cone(x, ties=ties)

    lam, consistency = recover_multipliers(xk, x, potential, tau, interaction)
    g = obj.grad(x)
    e_before = float(np.mean(potential.value(xk)))
    e_after = float(np.mean(potential.value(x)))
    if interaction is not None:
        e_before += interaction.energy(xk)
        e_after += interaction.energy(x)
    dx = x - xk
    report = StepReport(
        energy_before=e_before,
        energy_after=e_after,
        movement=float(dx @ dx / (2 * n * tau)),
        kkt_residual=_residual(x, g, tau),
        slackness_residual=check_slackness(x, lam),
        consistency_residual=consistency,
        active_set=active_set(x).tolist(),
        inner_iterations=it,
        polished=polished,
        wall_time=time.perf_counter() - t0,
    )
    return x, lam, report


def recover_multipliers(xk, xk1, p: Potential, tau: float, w: InteractionKernel | None = None, tol_consistency=None):
    """Telescoped multipliers and the raw value of lambda_N before it is set to 0.

    lambda_0 = 0, lambda_i = lambda_{i-1} - (1/N)(phi'(x_i) + (x_i - x_i^k)/tau [+ pair drift]).
    """
    xk = np.asarray(xk, dtype=float)
    xk1 = np.asarray(xk1, dtype=float)
    n = xk1.size
    g = p.grad(xk1) + (xk1 - xk) / tau
    if w is not None:
        g = g + interaction_drift(w, xk1)
    lam = _telescope(g, n)
    residual = float(abs(lam[-1]))
    lam[-1] = 0.0
    if tol_consistency is not None and residual > tol_consistency:
        log.warning("multiplier telescoping leaves |lambda_N| = %.3e; inner solve inexact", residual)
    return lam, residual


def check_slackness(x, lam) -> float:
    """max_i |lambda_i (x_{i+1} - x_i - 1/N)| over the interior multipliers."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if lam.size != x.size + 1:
        raise InputError("need N+1 multipliers for N particles")
    if x.size < 2:
        return 0.0
    return float(np.max(np.abs(lam[1:-1] * (np.diff(x) - 1.0 / x.size))))
