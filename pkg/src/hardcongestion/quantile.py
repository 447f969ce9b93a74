"""Monotone functions on [0, 1] representing probability measures.

A :class:`QuantileFn` is stored as a polyline with jumps: knots are
nondecreasing s-values from 0 to 1, and a repeated knot marks a jump.
Between consecutive distinct knots the function is affine.  Piecewise
constant quantiles (empirical measures) use the same storage with flat
pieces.

Point evaluation follows the infimum convention
``X(s) = inf{x : F(x) >= s}``, which makes ``X`` left-continuous: at a
jump the lower value is returned, and ``X(0)`` is the first stored value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InputError

_MONO_TOL = 1e-12


@dataclass(frozen=True)
class QuantileFn:
    knots: np.ndarray
    values: np.ndarray
    kind: str = "piecewise-linear"

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size < 2:
            raise InputError("knots and values must be 1-D arrays of equal length >= 2")
        if abs(k[0]) > _MONO_TOL or abs(k[-1] - 1.0) > _MONO_TOL:
            raise InputError("knots must start at 0 and end at 1")
        if np.any(np.diff(k) < 0):
            raise InputError("knots must be nondecreasing")
        if np.any(np.diff(v) < -_MONO_TOL * np.maximum(1.0, np.abs(v[1:]))):
            raise InputError("quantile values must be nondecreasing")
        k = k.copy()
        k[0], k[-1] = 0.0, 1.0
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v.copy())

    @classmethod
    def from_steps(cls, x) -> "QuantileFn":
        """Quantile of (1/N) sum delta_{x_i}: x_i on ((i-1)/N, i/N]."""
        x = np.sort(np.asarray(x, dtype=float))
        n = x.size
        edges = np.arange(n + 1) / n
        knots = np.repeat(edges, 2)[1:-1]
        values = np.repeat(x, 2)
        return cls(knots, values, kind="piecewise-constant")

    @classmethod
    def from_nodes(cls, x) -> "QuantileFn":
        """Continuous piecewise-linear quantile through (i/M, x_i), i = 0..M."""
        x = np.asarray(x, dtype=float)
        return cls(np.arange(x.size) / (x.size - 1), x, kind="piecewise-linear")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any((s < 0) | (s > 1)):
            raise InputError("quantile argument outside [0, 1]")
        return self._limit(s, side="left")

    def _limit(self, s, side):
        """Left limit (``side='left'``) or right limit of the polyline at ``s``."""
        k, v = self.knots, self.values
        s = np.asarray(s, dtype=float)
        if side == "left":
            # first knot >= s; a match means s sits on a knot and the lower value wins
            hi = np.clip(np.searchsorted(k, s, side="left"), 0, k.size - 1)
            lo = np.maximum(hi - 1, 0)
            exact = k[hi] == s
        else:
            # last knot <= s; a match picks the upper value after a jump
            lo = np.clip(np.searchsorted(k, s, side="right") - 1, 0, k.size - 1)
            hi = np.minimum(lo + 1, k.size - 1)
            exact = k[lo] == s
        width = k[hi] - k[lo]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(width > 0, (s - k[lo]) / np.where(width > 0, width, 1.0), 0.0)
        out = v[lo] + frac * (v[hi] - v[lo])
        pick = v[hi] if side == "left" else v[lo]
        return np.where(exact, pick, out)

    def pieces(self, other: "QuantileFn | None" = None):
        """Common refinement: arrays (a, b, self(a+), self(b-), other(a+), other(b-))."""
        grid = self.knots if other is None else np.union1d(self.knots, other.knots)
        grid = np.unique(grid)
        a, b = grid[:-1], grid[1:]
        out = [a, b, self._limit(a, "right"), self._limit(b, "left")]
        if other is not None:
            out += [other._limit(a, "right"), other._limit(b, "left")]
        return out

    def mean(self) -> float:
        a, b, ya, yb = self.pieces()
        return float(np.sum(0.5 * (ya + yb) * (b - a)))

    def is_constrained(self, tol: float = 1e-12) -> bool:
        """Slope >= 1 everywhere: X(s2) - X(s1) >= s2 - s1."""
        a, b, ya, yb = self.pieces()
        return bool(np.all(yb - ya >= (b - a) - tol))


def _abs_linear_integral(da, db, h):
    """Exact integral of |d| over an interval of length h where d is affine."""
    same = da * db >= 0
    denom = np.abs(da) + np.abs(db)
    with np.errstate(invalid="ignore", divide="ignore"):
        crossing = np.where(denom > 0, (da**2 + db**2) / (2 * np.where(denom > 0, denom, 1.0)), 0.0)
    return h * np.where(same, 0.5 * (np.abs(da) + np.abs(db)), crossing)


def lp_distance_pth(q1: QuantileFn, q2: QuantileFn, p: float = 1.0, adaptive: bool = False) -> float:
    """``int_0^1 |q1 - q2|^p ds``, exact for p in {1, 2}.

    Other exponents need ``adaptive=True`` and use per-piece adaptive
    quadrature.
    """
    a, b, y1a, y1b, y2a, y2b = q1.pieces(q2)
    h = b - a
    da, db = y1a - y2a, y1b - y2b
    if p == 1:
        return float(np.sum(_abs_linear_integral(da, db, h)))
    if p == 2:
        return float(np.sum(h * (da * da + da * db + db * db) / 3.0))
    if not adaptive:
        raise InputError("exact integration only for p in {1, 2}; pass adaptive=True for other p")
    if p < 1:
        raise InputError("p must be >= 1")
    total = 0.0
    for ai, hi, dai, dbi in zip(a, h, da, db):
        if hi <= 0:
            continue
        total += integrate.quad(lambda u: abs(dai + (dbi - dai) * u) ** p, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12)[0] * hi
    return total
