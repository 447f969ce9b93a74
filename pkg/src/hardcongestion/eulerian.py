"""Eulerian reconstructions: empirical and histogram densities, pressure fields.

All fields are piecewise affine on finitely many cells and vanish outside
them.  Integrals against smooth test functions use Gauss-Legendre rules on
each cell (split at the test function's own break points), which is exact
for the polynomial test functions provided here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError
from .potential import interaction_drift
from .quantile import QuantileFn
from .trajectory import Trajectory

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_KN_TOL = 1e-12


@dataclass(frozen=True)
class PiecewiseField:
    """Field equal to ``left[j] + slope[j] (x - b_j)`` on ``[b_j, b_{j+1})``, zero elsewhere.

    ``atoms`` holds point masses as an array of shape (m, 2): location, mass.
    """

    breakpoints: np.ndarray
    left: np.ndarray
    slope: np.ndarray
    kind: str = "density-histogram"
    atoms: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.left, dtype=float)
        s = np.asarray(self.slope, dtype=float)
        if b.size == 0:
            if v.size or s.size:
                raise InputError("cells need breakpoints")
        elif b.size != v.size + 1 or v.shape != s.shape:
            raise InputError("need M+1 breakpoints and M cell coefficients")
        if np.any(np.diff(b) < 0):
            raise InputError("breakpoints must be nondecreasing")
        if b.size:
            # zero-length cells carry no information; dropping cell j removes b_{j+1} == b_j
            keep = np.diff(b) > 0
            b = np.concatenate([b[:-1][keep], b[-1:]]) if keep.any() else np.zeros(0)
            v, s = v[keep], s[keep]
        atoms = np.asarray(self.atoms, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "left", v)
        object.__setattr__(self, "slope", s)
        object.__setattr__(self, "atoms", atoms)

    @property
    def right(self) -> np.ndarray:
        """Left limit of the field at each cell's right end."""
        return self.left + self.slope * np.diff(self.breakpoints)

    def cells(self):
        b = self.breakpoints
        return b[:-1], b[1:], self.left, self.right

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self._limit(x, "right")

    def _limit(self, x, side):
        """One-sided limit from the right (``'right'``) or the left."""
        b = self.breakpoints
        out = np.zeros_like(x, dtype=float)
        if b.size < 2:
            return out
        if side == "right":
            j = np.searchsorted(b, x, side="right") - 1
            inside = (j >= 0) & (j < b.size - 1)
        else:
            j = np.searchsorted(b, x, side="left") - 1
            inside = (j >= 0) & (j < b.size - 1)
        jj = np.clip(j, 0, max(b.size - 2, 0))
        val = self.left[jj] + self.slope[jj] * (x - b[jj])
        return np.where(inside, val, out)

    def mass(self) -> float:
        a, b, va, vb = self.cells()
        return float(np.sum(0.5 * (va + vb) * (b - a)) + np.sum(self.atoms[:, 1]))

    def l2_squared(self) -> float:
        a, b, va, vb = self.cells()
        return float(np.sum((b - a) * (va * va + va * vb + vb * vb) / 3.0))

    def integrate(self, func: Callable, extra_breaks=()) -> float:
        """int func(x) field(dx), exact for polynomial ``func`` of degree <= 14 between breaks."""
        total = float(np.sum(self.atoms[:, 1] * func(self.atoms[:, 0]))) if self.atoms.size else 0.0
        b = self.breakpoints
        if b.size < 2:
            return total
        extra = np.asarray(extra_breaks, dtype=float)
        extra = extra[(extra > b[0]) & (extra < b[-1])]
        grid = np.union1d(b, extra)
        lo, hi = grid[:-1], grid[1:]
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = func(pts) * self._limit(pts, "right")
        return total + float(np.sum(half * (vals @ _GL_WEIGHTS)))

    def sup_distance(self, other: "PiecewiseField") -> float:
        """sup_x |self - other| over the cells of both fields (atoms ignored)."""
        grid = np.union1d(self.breakpoints, other.breakpoints)
        if grid.size < 2:
            return 0.0
        a, b = grid[:-1], grid[1:]
        d_a = self._limit(a, "right") - other._limit(a, "right")
        d_b = self._limit(b, "left") - other._limit(b, "left")
        return float(np.max(np.maximum(np.abs(d_a), np.abs(d_b))))


# ---------------------------------------------------------------------------
# constructors


def _check_cone(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 1:
        raise InputError("configuration must be a nonempty vector")
    if np.any(np.diff(x) < 1.0 / x.size - _KN_TOL):
        raise InputError("configuration violates the non-overlap constraint")
    return x


def with_ghost(x) -> np.ndarray:
    """(x_0, x_1, ..., x_N) with x_0 = x_1 - 2/N."""
    x = np.asarray(x, dtype=float)
    return np.concatenate([[x[0] - 2.0 / x.size], x])


def empirical_measure(x) -> PiecewiseField:
    """(1/N) sum_i delta_{x_i}."""
    x = np.asarray(x, dtype=float)
    atoms = np.column_stack([x, np.full(x.size, 1.0 / x.size)])
    return PiecewiseField(np.zeros(0), np.zeros(0), np.zeros(0), kind="empirical", atoms=atoms)


def histogram_density(x) -> PiecewiseField:
    """1 / (N (x_{i+1} - x_i)) on [x_i, x_{i+1}), i = 0..N-1, with the ghost x_0."""
    x = _check_cone(x)
    xg = with_ghost(x)
    vals = 1.0 / (x.size * np.diff(xg))
    return PiecewiseField(xg, vals, np.zeros_like(vals), kind="density-histogram")


def pressure_fields(x, lam) -> tuple[PiecewiseField, PiecewiseField]:
    """(p_N, p~_N).

    p_N equals lambda_i on [x_i, x_{i+1}).  p~_N ramps linearly from
    lambda_{i-1} to lambda_i on [x_i - r, x_i + r] with r = 1/(2N), holds
    lambda_i between consecutive ramps and vanishes outside.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    n = x.size
    if lam.size != n + 1:
        raise InputError("need N+1 multipliers for N particles")
    xg = with_ghost(x)
    p_const = PiecewiseField(xg, lam[:-1].copy(), np.zeros(n), kind="pressure-constant")

    r = 0.5 / n
    lo, hi = x - r, x + r
    # at touching pairs the ramps meet; roundoff may make them overlap slightly
    overlap = hi[:-1] > lo[1:]
    mid = 0.5 * (x[:-1] + x[1:])
    hi[:-1] = np.where(overlap, mid, hi[:-1])
    lo[1:] = np.where(overlap, mid, lo[1:])
    bps = np.empty(2 * n)
    bps[0::2], bps[1::2] = lo, hi
    left = np.empty(2 * n - 1)
    slope = np.zeros(2 * n - 1)
    left[0::2] = lam[:-1]
    slope[0::2] = np.diff(lam) / (hi - lo)
    left[1::2] = lam[1:-1]
    p_lin = PiecewiseField(bps, left, slope, kind="pressure-linear")
    return p_const, p_lin


def saturation_check(rho: PiecewiseField, p_const: PiecewiseField) -> float:
    """sup |p_N (1 - rho~_N)| over the cells of the two (piecewise constant) fields."""
    grid = np.union1d(rho.breakpoints, p_const.breakpoints)
    if grid.size < 2:
        return 0.0
    mid = 0.5 * (grid[:-1] + grid[1:])
    return float(np.max(np.abs(p_const(mid) * (1.0 - rho(mid)))))


def quantile_of_field(f: PiecewiseField) -> QuantileFn:
    """Quantile of a unit-mass piecewise-constant density or of an atomic measure."""
    if f.atoms.size and f.breakpoints.size:
        raise InputError("mixed atomic/continuous measures are not supported")
    if f.atoms.size:
        order = np.argsort(f.atoms[:, 0], kind="stable")
        loc, m = f.atoms[order, 0], f.atoms[order, 1]
        cum = np.concatenate([[0.0], np.cumsum(m)])
        cum /= cum[-1]
        knots = np.repeat(cum, 2)[1:-1]
        return QuantileFn(knots, np.repeat(loc, 2), kind="piecewise-constant")
    if np.any(f.slope != 0):
        raise InputError("quantiles are only implemented for piecewise-constant densities")
    a, b, v, _ = f.cells()
    cum = np.concatenate([[0.0], np.cumsum(v * (b - a))])
    cum /= cum[-1]
    knots, vals = [0.0], [a[0]]
    for j in range(a.size):
        knots.append(cum[j + 1] if v[j] > 0 else cum[j])
        vals.append(b[j])
    return QuantileFn(np.asarray(knots), np.asarray(vals), kind="piecewise-linear")


# ---------------------------------------------------------------------------
# test functions and the weak form


@dataclass(frozen=True)
class TestFunction:
    """C^2 compactly supported test function with closed-form derivatives."""

    __test__ = False  # not a pytest class

    f: Callable
    d1: Callable
    d2: Callable
    support: tuple | None
    breaks: tuple = ()
    name: str = "custom"

    def __post_init__(self):
        if self.support is None:
            raise InputError("test functions must have compact support")
        lo, hi = self.support
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise InputError("support must be a bounded interval")
        object.__setattr__(self, "breaks", tuple(sorted({float(lo), float(hi), *map(float, self.breaks)})))


def _cut(x, lo, hi, arr):
    return np.where((x > lo) & (x < hi), arr, 0.0)


def bump(center: float = 0.0, radius: float = 1.0, power: int = 0) -> TestFunction:
    """(x - c)^power * (1 - ((x - c)/R)^2)^3 on |x - c| < R, for power in {0, 1, 2}."""
    if not radius > 0:
        raise InputError("radius must be positive")
    if power not in (0, 1, 2):
        raise InputError("power must be 0, 1 or 2")
    c, big_r = float(center), float(radius)

    def parts(x):
        x = np.asarray(x, dtype=float)
        y = x - c
        u = y / big_r
        w = 1.0 - u * u
        b0 = w**3
        b1 = -6.0 * u * w * w / big_r
        b2 = -6.0 * w * (1.0 - 5.0 * u * u) / big_r**2
        return x, y, b0, b1, b2

    def f(x):
        x, y, b0, _, _ = parts(x)
        return _cut(x, c - big_r, c + big_r, y**power * b0)

    def d1(x):
        x, y, b0, b1, _ = parts(x)
        out = [b1, b0 + y * b1, 2 * y * b0 + y * y * b1][power]
        return _cut(x, c - big_r, c + big_r, out)

    def d2(x):
        x, y, b0, b1, b2 = parts(x)
        out = [b2, 2 * b1 + y * b2, 2 * b0 + 4 * y * b1 + y * y * b2][power]
        return _cut(x, c - big_r, c + big_r, out)

    return TestFunction(f, d1, d2, (c - big_r, c + big_r), (c,), name=f"bump{power}(c={c:g},R={big_r:g})")


def plateau(lo: float, hi: float, ramp: float = 1.0) -> TestFunction:
    """Equal to 1 on [lo, hi], C^2 quintic ramps of width ``ramp`` down to 0 outside."""
    if not (hi > lo and ramp > 0):
        raise InputError("need hi > lo and ramp > 0")
    a, b, w = float(lo), float(hi), float(ramp)

    def u_of(x):
        x = np.asarray(x, dtype=float)
        left = np.clip((x - (a - w)) / w, 0.0, 1.0)
        right = np.clip(((b + w) - x) / w, 0.0, 1.0)
        return x, left, right

    def s0(u):
        return u**3 * (10 - 15 * u + 6 * u * u)

    def s1(u):
        return 30 * u * u * (1 - u) ** 2

    def s2(u):
        return 60 * u * (1 - u) * (1 - 2 * u)

    def f(x):
        x, ul, ur = u_of(x)
        return np.where(x < a, s0(ul), np.where(x > b, s0(ur), 1.0))

    def d1(x):
        x, ul, ur = u_of(x)
        return np.where(x < a, s1(ul) / w, np.where(x > b, -s1(ur) / w, 0.0))

    def d2(x):
        x, ul, ur = u_of(x)
        return np.where(x < a, s2(ul) / w**2, np.where(x > b, s2(ur) / w**2, 0.0))

    return TestFunction(f, d1, d2, (a - w, b + w), (a, b), name=f"plateau([{a:g},{b:g}],{w:g})")


def bump_family(center: float = 0.0, radius: float = 1.0) -> list[TestFunction]:
    return [bump(center, radius, k) for k in (0, 1, 2)]


def weak_form_residual(traj: Trajectory, psi: TestFunction, k: int) -> float:
    """Discrete weak-form defect of step k -> k+1.

    |(<psi, rho_N^{k+1}> - <psi, rho_N^k>)/tau + (1/N) sum psi'(x_i) phi'(x_i) - int psi'' p_N dx|
    with positions, drift and pressure taken at step k+1.
    """
    if not isinstance(psi, TestFunction):
        raise InputError("psi must be a TestFunction with compact support")
    if not 0 <= k < traj.steps:
        raise InputError(f"step index {k} outside 0..{traj.steps - 1}")
    xa, xb = traj.states[k], traj.states[k + 1]
    lam = traj.multipliers[k]
    time_term = (np.mean(psi.f(xb)) - np.mean(psi.f(xa))) / traj.tau
    drift = traj.potential.grad(xb)
    if traj.interaction is not None:
        drift = drift + interaction_drift(traj.interaction, xb)
    drift_term = np.mean(psi.d1(xb) * drift)
    p_const, _ = pressure_fields(xb, lam)
    press_term = p_const.integrate(psi.d2, psi.breaks)
    return float(abs(time_term + drift_term - press_term))


def mean_weak_residual(traj: Trajectory, family, k_max: int | None = None) -> float:
    """tau * sum_k max_psi residual over the first ``k_max`` steps, divided by their duration."""
    k_max = traj.steps if k_max is None else min(k_max, traj.steps)
    if k_max == 0:
        return 0.0
    total = sum(max(weak_form_residual(traj, psi, k) for psi in family) for k in range(k_max))
    return total / k_max


# ---------------------------------------------------------------------------
# pressure norms along a trajectory


def pressure_gap(traj: Trajectory) -> float:
    """||p_N - p~_N||^2 in L^2_t L^inf_x; the sup on each step is max_i |lambda_i - lambda_{i-1}| / 2."""
    if traj.steps == 0:
        return 0.0
    sup = 0.5 * np.max(np.abs(np.diff(traj.multipliers, axis=1)), axis=1)
    return float(traj.tau * np.sum(sup**2))


def pressure_gap_direct(traj: Trajectory) -> float:
    """Same quantity computed from the reconstructed fields (slow; for cross-checks)."""
    total = 0.0
    for k in range(traj.steps):
        p, q = pressure_fields(traj.states[k + 1], traj.multipliers[k])
        total += p.sup_distance(q) ** 2
    return total * traj.tau


def pressure_l2(traj: Trajectory) -> tuple[float, float]:
    """(||p_N||^2_{L^2_{t,x}} by quadrature, int (1/N) sum lambda_i^2 dt)."""
    direct = 0.0
    for k in range(traj.steps):
        p, _ = pressure_fields(traj.states[k + 1], traj.multipliers[k])
        direct += p.l2_squared()
    formula = float(np.sum(traj.multipliers[:, 1:] ** 2)) / traj.n
    return direct * traj.tau, formula * traj.tau
