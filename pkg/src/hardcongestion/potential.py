"""External potentials and optional pairwise interaction kernels.

A potential is a closed-form triple (value, first derivative, second
derivative) plus two declared constants: ``c0`` with
``phi(x) >= c0 * (1 + x**2)`` and ``c2 >= sup |phi''|``.  Both bounds are
checked once on a grid when the object is built.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ParameterError

DEFAULT_GRID = (-10.0, 10.0, 2001)
_BOUND_TOL = 1e-9
_FD_RTOL = 1e-6

ArrayFn = Callable[[np.ndarray], np.ndarray]


def _fd_mismatch(f: ArrayFn, df: ArrayFn, x: np.ndarray, kinks=()) -> float:
    """Largest relative gap between ``df`` and a central difference of ``f``.

    Points whose stencil straddles a listed kink of ``df`` are skipped.
    """
    h = 1e-5 * np.maximum(1.0, np.abs(x))
    if len(kinks):
        dist = np.min(np.abs(x[:, None] - np.asarray(kinks, dtype=float)[None, :]), axis=1)
        x, h = x[dist > 2 * h], h[dist > 2 * h]
    fd = (f(x + h) - f(x - h)) / (2 * h)
    exact = df(x)
    scale = np.maximum(1.0, np.maximum(np.abs(exact), np.abs(f(x)) * 1e-4))
    return float(np.max(np.abs(fd - exact) / scale))


@dataclass(frozen=True)
class Potential:
    """External potential phi with its assumption constants.

    With ``strict_phi=False`` the quadratic lower bound is not enforced
    (bounded or constant potentials still run, but the a-priori estimates
    that rely on ``c0`` no longer apply).
    """

    value: ArrayFn
    grad: ArrayFn
    hess: ArrayFn
    c0: float
    c2: float
    name: str = "custom"
    params: dict = field(default_factory=dict)
    strict_phi: bool = True
    grid: tuple = DEFAULT_GRID
    kinks: tuple = ()
    validation: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.c2 < 0:
            raise ParameterError(f"c2 must be nonnegative, got {self.c2}")
        if self.strict_phi and not self.c0 > 0:
            raise ParameterError(f"strict potentials need c0 > 0, got {self.c0}")
        lo, hi, n = self.grid
        x = np.linspace(lo, hi, int(n))
        phi = self.value(x)
        lower_margin = float(np.min(phi - self.c0 * (1 + x**2)))
        hess_margin = float(self.c2 - np.max(np.abs(self.hess(x))))
        report = {
            "lower_bound_margin": lower_margin,
            "hess_bound_margin": hess_margin,
            "grad_fd_mismatch": _fd_mismatch(self.value, self.grad, x),
            "hess_fd_mismatch": _fd_mismatch(self.grad, self.hess, x, self.kinks),
        }
        if self.strict_phi and lower_margin < -_BOUND_TOL:
            raise ParameterError(f"{self.name}: phi < c0(1+x^2) on the grid (margin {lower_margin:.3e})")
        if hess_margin < -_BOUND_TOL:
            raise ParameterError(f"{self.name}: |phi''| exceeds c2 on the grid (margin {hess_margin:.3e})")
        if report["grad_fd_mismatch"] > _FD_RTOL or report["hess_fd_mismatch"] > _FD_RTOL:
            raise ParameterError(f"{self.name}: derivatives disagree with finite differences: {report}")
        object.__setattr__(self, "validation", report)

    def energy(self, x) -> float:
        """Mean potential energy (1/N) sum phi(x_i)."""
        return float(np.mean(self.value(np.asarray(x, dtype=float))))

    def describe(self) -> dict:
        return {"kind": self.name, **self.params, "c0": self.c0, "c2": self.c2, "strict_phi": self.strict_phi}


@dataclass(frozen=True)
class InteractionKernel:
    """Symmetric pair potential W with ``c2 >= sup |W''|``."""

    value: ArrayFn
    grad: ArrayFn
    hess: ArrayFn
    c2: float
    name: str = "custom"
    params: dict = field(default_factory=dict)
    symmetric: bool = True
    grid: tuple = DEFAULT_GRID

    def __post_init__(self):
        lo, hi, n = self.grid
        z = np.linspace(lo, hi, int(n))
        if np.max(np.abs(self.value(-z) - self.value(z))) > 1e-12:
            raise ParameterError(f"{self.name}: W is not even")
        if np.max(np.abs(self.grad(-z) + self.grad(z))) > 1e-12:
            raise ParameterError(f"{self.name}: W' is not odd")
        if np.max(np.abs(self.hess(z))) > self.c2 + _BOUND_TOL:
            raise ParameterError(f"{self.name}: |W''| exceeds c2")
        if max(_fd_mismatch(self.value, self.grad, z), _fd_mismatch(self.grad, self.hess, z)) > _FD_RTOL:
            raise ParameterError(f"{self.name}: derivatives disagree with finite differences")

    def energy(self, x) -> float:
        """Pair energy (1/(2N^2)) sum_{i,j} W(x_i - x_j)."""
        x = np.asarray(x, dtype=float)
        return float(0.5 * np.mean(self.value(x[:, None] - x[None, :])))

    def describe(self) -> dict:
        return {"kind": self.name, **self.params, "c2": self.c2}


# closed forms are module-level so that partials pickle into worker processes


def _quad_value(x, center, scale):
    return scale * (1.0 + (x - center) ** 2)


def _quad_grad(x, center, scale):
    return 2.0 * scale * (x - center)


def _quad_hess(x, center, scale):
    return np.full_like(np.asarray(x, dtype=float), 2.0 * scale)


def _dw_value(x, scale, height, width):
    return scale * (1.0 + x**2) + height * np.exp(-((x / width) ** 2))


def _dw_grad(x, scale, height, width):
    return 2.0 * scale * x - 2.0 * height * x / width**2 * np.exp(-((x / width) ** 2))


def _dw_hess(x, scale, height, width):
    u2 = (x / width) ** 2
    return 2.0 * scale + height * (4.0 * u2 - 2.0) / width**2 * np.exp(-u2)


def _const_value(x, level):
    return np.full_like(np.asarray(x, dtype=float), level)


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _quadratic_c0(center: float) -> float:
    # min over x of (1 + (x - c)^2) / (1 + x^2): smallest eigenvalue of [[1, -c], [-c, 1 + c^2]]
    tr = 2.0 + center**2
    return 0.5 * (tr - np.sqrt(tr * tr - 4.0))


def builtin_quadratic(center: float = 0.0, scale: float = 1.0, **kw) -> Potential:
    """phi(x) = scale * (1 + (x - center)^2)."""
    if not scale > 0:
        raise ParameterError(f"scale must be positive, got {scale}")
    # 1e-12 relative slack keeps the grid check clear of rounding
    c0 = scale * _quadratic_c0(center) * (1.0 - 1e-12)
    args = dict(center=float(center), scale=float(scale))
    return Potential(
        value=functools.partial(_quad_value, **args),
        grad=functools.partial(_quad_grad, **args),
        hess=functools.partial(_quad_hess, **args),
        c0=c0,
        c2=2.0 * scale,
        name="quadratic",
        params=args,
        **kw,
    )


def double_well_confined(scale: float = 0.5, height: float = 2.0, width: float = 1.0, **kw) -> Potential:
    """Confining parabola plus a Gaussian bump at the origin.

    phi(x) = scale (1 + x^2) + height exp(-(x/width)^2).  Two wells appear
    when height > scale * width^2.
    """
    if not (scale > 0 and width > 0 and height >= 0):
        raise ParameterError("double well needs scale > 0, width > 0, height >= 0")
    args = dict(scale=float(scale), height=float(height), width=float(width))
    return Potential(
        value=functools.partial(_dw_value, **args),
        grad=functools.partial(_dw_grad, **args),
        hess=functools.partial(_dw_hess, **args),
        c0=scale,
        # |g''| of exp(-u^2) peaks at the origin with value 2 / width^2
        c2=2.0 * scale + 2.0 * height / width**2,
        name="double_well_confined",
        params=args,
        **kw,
    )


def constant_potential(level: float = 1.0) -> Potential:
    """Flat potential; only usable with the strict lower bound switched off."""
    return Potential(
        value=functools.partial(_const_value, level=float(level)),
        grad=_zero,
        hess=_zero,
        c0=0.0,
        c2=0.0,
        name="constant",
        params={"level": float(level)},
        strict_phi=False,
    )


class _TablePotential:
    """Cubic spline through tabulated values, continued by C^2 quadratic tails."""

    def __init__(self, xs, phis, tail_curvature):
        self.a, self.b = float(xs[0]), float(xs[-1])
        self.kappa = float(tail_curvature)
        self.spline = CubicSpline(xs, phis, bc_type=((2, self.kappa), (2, self.kappa)))
        self.d1 = self.spline.derivative(1)
        self.d2 = self.spline.derivative(2)
        self.ends = [(e, float(self.spline(e)), float(self.d1(e))) for e in (self.a, self.b)]

    def _pieces(self, x, order):
        x = np.asarray(x, dtype=float)
        inside = np.clip(x, self.a, self.b)
        out = np.asarray([self.spline, self.d1, self.d2][order](inside), dtype=float)
        for (e, v, s), mask in zip(self.ends, (x < self.a, x > self.b)):
            d = x[mask] - e
            tail = [v + s * d + 0.5 * self.kappa * d * d, s + self.kappa * d, np.full_like(d, self.kappa)][order]
            out[mask] = tail
        return out

    def value(self, x):
        return self._pieces(x, 0)

    def grad(self, x):
        return self._pieces(x, 1)

    def hess(self, x):
        return self._pieces(x, 2)


def custom_table(xs, phis, tail_curvature: float = 2.0, **kw) -> Potential:
    """Potential interpolated from a table of (x, phi(x)) samples."""
    xs = np.asarray(xs, dtype=float)
    phis = np.asarray(phis, dtype=float)
    if xs.ndim != 1 or xs.shape != phis.shape or xs.size < 4 or np.any(np.diff(xs) <= 0):
        raise ParameterError("custom table needs >= 4 strictly increasing x samples with matching phi values")
    if not tail_curvature > 0:
        raise ParameterError("tail_curvature must be positive")
    tab = _TablePotential(xs, phis, tail_curvature)
    c2 = max(float(np.max(np.abs(tab.d2(xs)))), tab.kappa)
    # tails grow like kappa/2 * x^2, so the infimum of phi/(1+x^2) is found on a wide log grid
    far = np.geomspace(1e-3, 1e6, 4000)
    probe = np.concatenate([np.linspace(xs[0], xs[-1], 20001), xs[0] - far, xs[-1] + far])
    c0 = min(float(np.min(tab.value(probe) / (1 + probe**2))), 0.5 * tab.kappa) * (1.0 - 1e-9)
    strict = kw.pop("strict_phi", True)
    if strict and c0 <= 0:
        raise ParameterError("tabulated potential is not bounded below by c0 (1 + x^2) with c0 > 0")
    return Potential(
        value=tab.value,
        grad=tab.grad,
        hess=tab.hess,
        c0=max(c0, 0.0),
        c2=c2 * (1 + 1e-12),
        name="custom-table",
        params={"x": xs.tolist(), "phi": phis.tolist(), "tail_curvature": tab.kappa},
        strict_phi=strict,
        # phi'' of a cubic spline is only piecewise linear
        kinks=tuple(xs.tolist()),
        **kw,
    )


def _wq_value(z, strength):
    return 0.5 * strength * z**2


def _wq_grad(z, strength):
    return strength * z


def _wq_hess(z, strength):
    return np.full_like(np.asarray(z, dtype=float), strength)


def _wg_value(z, strength, width):
    return strength * np.exp(-0.5 * (z / width) ** 2)


def _wg_grad(z, strength, width):
    return -strength * z / width**2 * np.exp(-0.5 * (z / width) ** 2)


def _wg_hess(z, strength, width):
    u2 = (z / width) ** 2
    return strength * (u2 - 1.0) / width**2 * np.exp(-0.5 * u2)


def quadratic_interaction(strength: float = 1.0) -> InteractionKernel:
    """W(z) = strength * z^2 / 2 (attractive for strength > 0)."""
    args = dict(strength=float(strength))
    return InteractionKernel(
        value=functools.partial(_wq_value, **args),
        grad=functools.partial(_wq_grad, **args),
        hess=functools.partial(_wq_hess, **args),
        c2=abs(float(strength)),
        name="quadratic",
        params=args,
    )


def gaussian_bump_interaction(strength: float = 1.0, width: float = 1.0) -> InteractionKernel:
    """W(z) = strength * exp(-z^2 / (2 width^2)) (repulsive for strength > 0)."""
    if not width > 0:
        raise ParameterError("width must be positive")
    args = dict(strength=float(strength), width=float(width))
    return InteractionKernel(
        value=functools.partial(_wg_value, **args),
        grad=functools.partial(_wg_grad, **args),
        hess=functools.partial(_wg_hess, **args),
        # |(u^2 - 1) e^{-u^2/2}| peaks at u = 0
        c2=abs(float(strength)) / width**2,
        name="gaussian-bump",
        params=args,
    )


def zero_interaction() -> InteractionKernel:
    return InteractionKernel(value=_zero, grad=_zero, hess=_zero, c2=0.0, name="zero")


def make_potential(spec: dict | None) -> Potential:
    """Build a potential from a config mapping (``kind`` plus parameters)."""
    spec = dict(spec or {"kind": "quadratic"})
    kind = spec.pop("kind", "quadratic")
    strict = spec.pop("strict_phi", True)
    if kind == "quadratic":
        return builtin_quadratic(spec.get("center", 0.0), spec.get("scale", 1.0), strict_phi=strict)
    if kind == "double_well_confined":
        return double_well_confined(
            spec.get("scale", 0.5), spec.get("height", 2.0), spec.get("width", 1.0), strict_phi=strict
        )
    if kind == "custom-table":
        table = spec.get("table") or spec
        return custom_table(table["x"], table["phi"], spec.get("tail_curvature", 2.0), strict_phi=strict)
    if kind == "constant":
        return constant_potential(spec.get("level", 1.0))
    raise ParameterError(f"unknown potential kind {kind!r}")


def make_interaction(spec: dict | None) -> InteractionKernel | None:
    spec = dict(spec or {"kind": "none"})
    kind = spec.pop("kind", "none")
    if kind == "none":
        return None
    if kind == "zero":
        return zero_interaction()
    if kind == "quadratic":
        return quadratic_interaction(spec.get("strength", 1.0))
    if kind == "gaussian-bump":
        return gaussian_bump_interaction(spec.get("strength", 1.0), spec.get("width", 1.0))
    raise ParameterError(f"unknown interaction kind {kind!r}")


def interaction_drift(w: InteractionKernel | None, x) -> np.ndarray:
    """(1/N) sum_j W'(x_i - x_j) for every i (zeros without a kernel)."""
    x = np.asarray(x, dtype=float)
    if w is None:
        return np.zeros_like(x)
    return np.mean(w.grad(x[:, None] - x[None, :]), axis=1)


def total_drift(p: Potential, w: InteractionKernel | None, x, i: int) -> float:
    """Desired velocity of particle ``i`` (1-based): -phi'(x_i) - (1/N) sum_j W'(x_i - x_j)."""
    x = np.asarray(x, dtype=float)
    if not 1 <= i <= x.size:
        raise IndexError(f"particle index {i} outside 1..{x.size}")
    xi = x[i - 1]
    drift = -float(p.grad(np.asarray([xi]))[0])
    if w is not None:
        drift -= float(np.mean(w.grad(xi - x)))
    return drift


def effective_c2(p: Potential, w: InteractionKernel | None = None) -> float:
    """Curvature bound of the full energy; the pair term adds at most 2 sup|W''|."""
    return p.c2 + (2.0 * w.c2 if w is not None else 0.0)
