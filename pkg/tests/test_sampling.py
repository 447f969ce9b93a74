from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from hardcongestion.errors import InputError
from hardcongestion.eulerian import histogram_density
from hardcongestion.quantile import QuantileFn, lp_distance_pth
from hardcongestion.sampling import (
    MacroDensity,
    density_corpus,
    quantile_of_density,
    random_blocks,
    sample_particles,
    sampling_error,
    sampling_error_bound_check,
    support_bound,
)

TWO_BLOCKS = MacroDensity(np.array([0.0, 0.5, 1.0, 1.5]), np.array([1.0, 0.0, 1.0]))


def test_quantile_examples():
    q = quantile_of_density(MacroDensity.uniform(0.0, 1.0))
    s = np.linspace(0, 1, 9)
    assert q(s) == pytest.approx(s)
    q = quantile_of_density(MacroDensity.uniform(0.0, 2.0))
    assert q(s) == pytest.approx(2 * s)
    q = quantile_of_density(TWO_BLOCKS)
    assert q._limit(np.array(0.5), "left") == 0.5
    assert q._limit(np.array(0.5), "right") == 1.0
    assert q(0.5) == 0.5  # infimum convention picks the lower value


def test_sample_examples():
    assert sample_particles(quantile_of_density(MacroDensity.uniform(0, 1)), 4) == pytest.approx([0.25, 0.5, 0.75, 1.0])
    assert sample_particles(quantile_of_density(MacroDensity.uniform(0, 2)), 2) == pytest.approx([1.0, 2.0])
    with pytest.raises(InputError):
        sample_particles(quantile_of_density(MacroDensity.uniform(0, 1)), 1)


def test_sampling_error_examples():
    q = quantile_of_density(MacroDensity.uniform(0, 1))
    x = sample_particles(q, 4)
    assert sampling_error_bound_check(q, x) == pytest.approx(1 / 8, abs=1e-15)
    assert support_bound(q, 4) == 0.25
    q2 = quantile_of_density(TWO_BLOCKS)
    assert sampling_error(q2, sample_particles(q2, 2)) <= 1.5 / 2


def test_sampling_error_matches_scipy_quadrature():
    # independent route: adaptive quadrature of |X_N(s) - X(s)| piece by piece
    for rho in density_corpus()[:8]:
        q = quantile_of_density(rho)
        x = sample_particles(q, 16)
        qs = QuantileFn.from_steps(x)
        pts = np.union1d(q.knots, qs.knots)
        total = sum(
            integrate.quad(lambda s: abs(float(qs(s)) - float(q(s))), a, b, limit=200)[0]
            for a, b in zip(pts[:-1], pts[1:])
            if b > a
        )
        assert sampling_error(q, x) == pytest.approx(total, abs=1e-10)


@pytest.mark.parametrize("n", [4, 16, 64, 256])
def test_corpus_invariants(n):
    for rho in density_corpus():
        q = quantile_of_density(rho)
        x = sample_particles(q, n)
        assert np.all(np.diff(x) >= 1.0 / n - 1e-12)
        assert sampling_error(q, x) <= support_bound(q, n) + 1e-12
        assert histogram_density(x).mass() == pytest.approx(1.0, abs=1e-12)


def test_density_validation():
    with pytest.raises(InputError):
        MacroDensity(np.array([0.0, 1.0]), np.array([2.0]))
    with pytest.raises(InputError):
        MacroDensity(np.array([0.0, 3.0]), np.array([0.5]))
    with pytest.raises(InputError):
        MacroDensity.uniform(0.0, 0.5)
    with pytest.raises(InputError):
        MacroDensity.from_spec("gaussian:0,1")


def test_density_from_spec(tmp_path):
    rho = MacroDensity.from_spec("uniform:-2,2")
    assert rho.support == (-2.0, 2.0)
    path = tmp_path / "rho.yaml"
    path.write_text("breakpoints: [0, 0.5, 1.0, 1.5]\nvalues: [1, 0, 1]\n")
    rho = MacroDensity.from_spec(str(path))
    assert rho.mass() == pytest.approx(1.0)
    assert MacroDensity.from_spec(rho.to_dict()).support == (0.0, 1.5)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 200))
def test_random_blocks_sampling_bound(seed, n):
    rho = random_blocks(np.random.default_rng(seed))
    assert rho.mass() == pytest.approx(1.0, abs=1e-12)
    assert np.all(rho.values <= 1.0)
    q = quantile_of_density(rho)
    x = sample_particles(q, n)
    assert sampling_error(q, x) <= support_bound(q, n) + 1e-12


def test_quantile_mean_matches_density_mean():
    for rho in density_corpus()[:10]:
        mid = 0.5 * (rho.breakpoints[:-1] + rho.breakpoints[1:])
        mean = np.sum(rho.values * np.diff(rho.breakpoints) * mid)
        assert quantile_of_density(rho).mean() == pytest.approx(mean, abs=1e-12)


def test_lp_distance_non_default_exponent():
    a = QuantileFn.from_nodes([0.0, 1.0])
    b = QuantileFn.from_nodes([1.0, 1.0])
    # int_0^1 (1 - s)^3 ds = 1/4
    assert lp_distance_pth(a, b, 3, adaptive=True) == pytest.approx(0.25, rel=1e-10)
    with pytest.raises(InputError):
        lp_distance_pth(a, b, 3)
