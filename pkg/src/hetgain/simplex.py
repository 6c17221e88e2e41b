"""Simplex utilities: Euclidean projection, sampling, lattice enumeration."""

from __future__ import annotations

import numpy as np


def project_rows(v: np.ndarray) -> np.ndarray:
    """Project each row of ``v`` onto the unit simplex (sorting method).

    Standard exact algorithm: sort descending, find the largest prefix whose
    shifted average stays below its last element, subtract the threshold.
    """
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    n = v.shape[1]
    u = np.sort(v, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = np.count_nonzero(cond, axis=1)
    theta = css[np.arange(v.shape[0]), rho - 1] / rho
    return np.maximum(v - theta[:, None], 0.0)


def project(v: np.ndarray) -> np.ndarray:
    """Project a single vector onto the unit simplex."""
    return project_rows(np.asarray(v)[None, :])[0]


def sample(dim: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform samples from the unit simplex (flat Dirichlet)."""
    if size is None:
        return rng.dirichlet(np.ones(dim))
    return rng.dirichlet(np.ones(dim), size=size)


def lattice(dim: int, resolution: float) -> np.ndarray:
    """All points of the unit simplex whose coordinates are multiples of
    ``resolution``.  Requires 1/resolution to be integral."""
    k = round(1.0 / resolution)
    if abs(k * resolution - 1.0) > 1e-9:
        raise ValueError(f"1/resolution must be integral, got {resolution}")
    return _compositions(k, dim) / float(k)


def lattice_size(dim: int, resolution: float) -> int:
    from math import comb

    k = round(1.0 / resolution)
    return comb(k + dim - 1, dim - 1)


def _compositions(total: int, parts: int) -> np.ndarray:
    """All length-``parts`` tuples of nonnegative ints summing to ``total``."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for first in range(total + 1):
        rest = _compositions(total - first, parts - 1)
        block = np.empty((rest.shape[0], parts), dtype=np.int64)
        block[:, 0] = first
        block[:, 1:] = rest
        rows.append(block)
    return np.concatenate(rows, axis=0)


def compositions(total: int, parts: int) -> np.ndarray:
    """Public wrapper kept separate so callers can enumerate task counts."""
    return _compositions(total, parts)
