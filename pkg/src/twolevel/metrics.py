"""Distances between laws on a common grid."""

from __future__ import annotations

import numpy as np


def _on_grid(f, grid: np.ndarray) -> np.ndarray:
    v = f(grid) if callable(f) else f
    v = np.asarray(v, dtype=float)
    if v.shape != grid.shape:
        raise ValueError("CDF values must match the grid shape")
    return v


def ks_distance(cdf_a, cdf_b, grid) -> float:
    """max |F_a - F_b| over the grid; CDFs may be callables or arrays on the grid."""
    grid = np.asarray(grid, dtype=float)
    return float(np.max(np.abs(_on_grid(cdf_a, grid) - _on_grid(cdf_b, grid))))


def wasserstein1(cdf_a, cdf_b, grid) -> float:
    """Integral of |F_a - F_b|, with right-continuous step interpolation between grid points."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    d = np.abs(_on_grid(cdf_a, grid) - _on_grid(cdf_b, grid))
    return float(np.sum(d[:-1] * np.diff(grid)))


def tv_distance(pmf_a, pmf_b, tol: float = 1e-9) -> float:
    """Half the L1 distance; shorter input is zero-padded."""
    a = np.asarray(pmf_a, dtype=float)
    b = np.asarray(pmf_b, dtype=float)
    for p in (a, b):
        if np.any(p < -tol) or abs(p.sum() - 1.0) > tol:
            raise ValueError("pmf must be nonnegative and sum to 1")
    m = max(len(a), len(b))
    a = np.pad(a, (0, m - len(a)))
    b = np.pad(b, (0, m - len(b)))
    return float(0.5 * np.abs(a - b).sum())


def lattice_grid(r: float, x_max: float, per_atom: int = 4) -> np.ndarray:
    """Grid with step r/per_atom that also holds the left limit just below each atom r*k."""
    if per_atom < 4:
        raise ValueError("step must be at most r/4")
    step = r / per_atom
    g = np.arange(0.0, x_max + step / 2, step)
    atoms = np.arange(0.0, x_max + r / 2, r)
    left = atoms[1:] - 1e-9 * r
    return np.unique(np.concatenate([g, left]))


def ks_lattice(pmf, r: float, cdf) -> float:
    """Exact sup over the reals between the step CDF of r*L and a continuous CDF.

    On [r k, r (k+1)) the step CDF is flat, so the sup is attained at the interval ends.
    """
    cum = np.cumsum(np.asarray(pmf, dtype=float))
    x = r * np.arange(len(cum) + 1)
    f = np.asarray(cdf(x), dtype=float)
    return float(max(np.max(np.abs(cum - f[:-1])), np.max(np.abs(cum - f[1:]))))
