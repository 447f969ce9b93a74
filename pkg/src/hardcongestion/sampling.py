"""Initial data: piecewise-constant macroscopic densities and their quantiles."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import InputError
from .quantile import QuantileFn, lp_distance_pth

_MASS_TOL = 1e-12


@dataclass(frozen=True)
class MacroDensity:
    """Density equal to ``values[j]`` on ``[breakpoints[j], breakpoints[j+1])``."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if bp.ndim != 1 or v.ndim != 1 or bp.size != v.size + 1 or v.size == 0:
            raise InputError("need M+1 breakpoints for M values")
        if not np.all(np.isfinite(bp)) or np.any(np.diff(bp) <= 0):
            raise InputError("breakpoints must be finite and strictly increasing")
        if np.any(v < 0) or np.any(v > 1 + _MASS_TOL):
            raise InputError("density values must lie in [0, 1]")
        mass = float(np.sum(v * np.diff(bp)))
        if mass <= 0:
            raise InputError("density has zero mass")
        if abs(mass - 1.0) > _MASS_TOL:
            raise InputError(f"density mass is {mass!r}, expected 1")
        # trim empty end cells so that the support bounds are the outer breakpoints
        nz = np.flatnonzero(v > 0)
        lo, hi = nz[0], nz[-1]
        object.__setattr__(self, "breakpoints", bp[lo : hi + 2].copy())
        object.__setattr__(self, "values", v[lo : hi + 1].copy())

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def mass(self) -> float:
        return float(np.sum(self.values * np.diff(self.breakpoints)))

    @classmethod
    def uniform(cls, a: float, b: float) -> "MacroDensity":
        if not b - a >= 1.0:
            raise InputError("a uniform density with unit mass and height <= 1 needs b - a >= 1")
        return cls(np.array([a, b], dtype=float), np.array([1.0 / (b - a)]))

    @classmethod
    def from_spec(cls, spec) -> "MacroDensity":
        """Parse ``'uniform:a,b'``, a mapping with breakpoints/values, or a YAML path."""
        if isinstance(spec, MacroDensity):
            return spec
        if isinstance(spec, dict):
            return cls(np.asarray(spec["breakpoints"], float), np.asarray(spec["values"], float))
        spec = str(spec)
        if spec.startswith("uniform:"):
            a, b = (float(t) for t in spec.split(":", 1)[1].split(","))
            return cls.uniform(a, b)
        path = Path(spec)
        if not path.exists():
            raise InputError(f"cannot interpret density spec {spec!r}")
        return cls.from_spec(yaml.safe_load(path.read_text()))

    def to_dict(self) -> dict:
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}


def random_blocks(rng: np.random.Generator, max_blocks: int = 5) -> MacroDensity:
    """1 to ``max_blocks`` disjoint or touching blocks, heights in (0.2, 1], total mass 1."""
    n = int(rng.integers(1, max_blocks + 1))
    masses = rng.dirichlet(np.ones(n))
    heights = rng.uniform(0.2, 1.0, size=n)
    widths = masses / heights
    gaps = np.where(rng.random(n) < 0.3, 0.0, rng.uniform(0.05, 1.5, size=n))
    start = rng.uniform(-3.0, 0.0)
    bps, vals = [start], []
    for j in range(n):
        if j > 0 and gaps[j] > 0:
            bps.append(bps[-1] + gaps[j])
            vals.append(0.0)
        bps.append(bps[-1] + widths[j])
        vals.append(heights[j])
    vals = np.asarray(vals)
    bps = np.asarray(bps)
    # renormalize the last block so rounding in the widths does not leak mass
    mass = np.sum(vals * np.diff(bps))
    bps[-1] = bps[-2] + (1.0 - (mass - vals[-1] * (bps[-1] - bps[-2]))) / vals[-1]
    return MacroDensity(bps, vals)


def quantile_of_density(rho0: MacroDensity) -> QuantileFn:
    """Closed-form quantile: affine on charged cells, a jump across empty ones."""
    bp, v = rho0.breakpoints, rho0.values
    cum = np.concatenate([[0.0], np.cumsum(v * np.diff(bp))])
    cum /= cum[-1]
    knots, values = [0.0], [bp[0]]
    for j, vj in enumerate(v):
        if vj > 0:
            knots.append(cum[j + 1])
            values.append(bp[j + 1])
        else:
            # empty cell: same s, value jumps to the far end
            knots.append(cum[j])
            values.append(bp[j + 1])
    return QuantileFn(np.asarray(knots), np.asarray(values), kind="piecewise-linear")


def sample_particles(x0: QuantileFn, n: int) -> np.ndarray:
    """x_i = X0(i/N) for i = 1..N."""
    if int(n) != n or n < 2:
        raise InputError(f"need at least 2 particles, got {n}")
    n = int(n)
    x = np.asarray(x0(np.arange(1, n + 1) / n), dtype=float)
    if np.any(np.diff(x) < 1.0 / n - 1e-12):
        raise InputError("sampled configuration violates the non-overlap constraint; density exceeds 1?")
    return x


def sampling_error(x0: QuantileFn, xn0) -> float:
    """Exact ``||X_N^0 - X^0||_{L^1(0,1)}`` with X_N^0 the step quantile of the sample."""
    return lp_distance_pth(QuantileFn.from_steps(xn0), x0, 1)


def sampling_error_bound_check(x0: QuantileFn, xn0) -> float:
    """Exact ``||X_N^0 - X^0||_{L^1(0,1)}``; callers compare it with :func:`support_bound`."""
    return sampling_error(x0, xn0)


def support_bound(x0: QuantileFn, n: int) -> float:
    """(xi_R - xi_L) / N for the quantile of a compactly supported density."""
    return float(x0.values[-1] - x0.values[0]) / n


def density_corpus(seed: int = 0, random_count: int = 50) -> list[MacroDensity]:
    """Fixed test densities (benchmarks, a gapped pair, thin and tall blocks) plus seeded random blocks."""
    fixed = [
        MacroDensity.uniform(0.0, 1.0),
        MacroDensity.uniform(0.0, 2.0),
        MacroDensity.uniform(-2.0, 2.0),
        MacroDensity.uniform(-1.7, 2.3),
        MacroDensity(np.array([0.0, 0.5, 1.0, 1.5]), np.array([1.0, 0.0, 1.0])),
        MacroDensity(np.array([-1.0, 0.0, 0.5, 3.0]), np.array([0.5, 0.0, 0.2])),
        MacroDensity(np.array([-5.0, 5.0]), np.array([0.1])),
    ]
    rng = np.random.default_rng(seed)
    return fixed + [random_blocks(rng) for _ in range(random_count)]
