"""Brute-force reference solvers for small N (enumerate every contact set).

These are deliberately naive and independent of :mod:`hardcongestion.jko`:
each of the 2^(N-1) contact patterns fixes the gaps inside blocks at 1/N,
the remaining block positions are found by Newton's method on the
equality-constrained problem, and the cheapest admissible candidate wins.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import InputError

MAX_N = 8


def _blocks(contacts, n):
    """Block label and in-block offset for each particle, given touching gaps."""
    label = np.zeros(n, dtype=int)
    offset = np.zeros(n)
    for i in range(1, n):
        if contacts[i - 1]:
            label[i] = label[i - 1]
            offset[i] = offset[i - 1] + 1.0 / n
        else:
            label[i] = label[i - 1] + 1
    return label, offset


def _patterns(n):
    if n > MAX_N:
        raise InputError(f"brute force limited to N <= {MAX_N}")
    return itertools.product([False, True], repeat=n - 1)


def brute_force_projection(y) -> np.ndarray:
    """argmin |z - y|^2 over z_{i+1} - z_i >= 1/N by exhaustive search."""
    y = np.asarray(y, dtype=float)
    n = y.size
    best, best_d = None, np.inf
    for pattern in _patterns(n):
        label, offset = _blocks(pattern, n)
        nb = label[-1] + 1
        c = np.bincount(label, y - offset, nb) / np.bincount(label, None, nb)
        z = c[label] + offset
        if np.any(np.diff(z) < 1.0 / n - 1e-13):
            continue
        d = float(np.sum((z - y) ** 2))
        if d < best_d:
            best, best_d = z, d
    return best


def brute_force_jko(xk, potential, interaction=None, tau=1e-3, newton_iters=60):
    """Minimizer of the one-step objective over K_N by contact-set enumeration."""
    xk = np.asarray(xk, dtype=float)
    n = xk.size

    def objective(x):
        val = np.sum(potential.value(x)) / n + np.sum((x - xk) ** 2) / (2 * n * tau)
        if interaction is not None:
            val += np.sum(interaction.value(x[:, None] - x[None, :])) / (2 * n * n)
        return float(val)

    def gradient(x):
        g = (potential.grad(x) + (x - xk) / tau) / n
        if interaction is not None:
            g = g + np.sum(interaction.grad(x[:, None] - x[None, :]), axis=1) / (n * n)
        return g

    def hessian(x):
        h = np.diag((potential.hess(x) + 1.0 / tau) / n)
        if interaction is not None:
            pair = interaction.hess(x[:, None] - x[None, :]) / (n * n)
            off = pair - np.diag(np.diag(pair))
            h = h - off + np.diag(off.sum(axis=1))
        return h

    best, best_f = None, np.inf
    for pattern in _patterns(n):
        label, offset = _blocks(pattern, n)
        nb = label[-1] + 1
        basis = np.zeros((n, nb))
        basis[np.arange(n), label] = 1.0
        c = np.linalg.lstsq(basis, xk - offset, rcond=None)[0]
        for _ in range(newton_iters):
            x = basis @ c + offset
            step = np.linalg.solve(basis.T @ hessian(x) @ basis, basis.T @ gradient(x))
            c = c - step
            if np.max(np.abs(step)) < 1e-15:
                break
        x = basis @ c + offset
        if np.any(np.diff(x) < 1.0 / n - 1e-12):
            continue
        f = objective(x)
        if f < best_f:
            best, best_f = x, f
    return best
