"""Independent brute-force references used to check the optimized paths.

Everything here re-implements its own evaluation loops on purpose: lattice
search over row simplices, exhaustive discrete enumeration without symmetry
reduction, and central finite differences.  None of it shares code with the
aggregators/gains modules it validates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SizeGuardError
from .gains import GainReport, RewardStructure

LATTICE_GUARD = 10**8
EXHAUSTIVE_GUARD = 10**6


@dataclass(frozen=True)
class GridSpec:
    resolution: float
    n_agents: int
    n_tasks: int

    def __post_init__(self):
        k = round(1.0 / self.resolution)
        if abs(k * self.resolution - 1.0) > 1e-9:
            raise DomainError("1/resolution must be integral")


def _own_eval(name: str, t: float, values: np.ndarray, axis: int) -> np.ndarray:
    """Oracle-local aggregator formulas (kept separate from the library's)."""
    if name == "min":
        return values.min(axis=axis)
    if name == "mean":
        return values.sum(axis=axis) / values.shape[axis]
    if name == "max":
        return values.max(axis=axis)
    if name == "power-sum":
        return (values**t).sum(axis=axis)
    if name == "power-mean":
        with np.errstate(divide="ignore", over="ignore"):
            return ((values**t).sum(axis=axis) / values.shape[axis]) ** (1.0 / t)
    if name == "lse":
        shifted = t * values - (t * values).max(axis=axis, keepdims=True)
        inner = np.log(np.exp(shifted).sum(axis=axis))
        return (inner + (t * values).max(axis=axis)) / t
    if name == "softmax":
        shifted = t * values - (t * values).max(axis=axis, keepdims=True)
        w = np.exp(shifted)
        return (w * values).sum(axis=axis) / w.sum(axis=axis)
    raise DomainError(f"oracle cannot evaluate family {name!r}")


def _reward_rows(structure: RewardStructure, stack: np.ndarray) -> np.ndarray:
    """Rewards of a (B, N, M) stack via the oracle-local formulas."""
    scores = _own_eval(structure.inner.family.value, structure.inner.t, stack, axis=1)
    return _own_eval(structure.outer.family.value, structure.outer.t, scores, axis=1)


def _simplex_lattice(dim: int, resolution: float) -> np.ndarray:
    k = round(1.0 / resolution)
    pts = [
        np.array(c, dtype=np.float64) / k
        for c in _int_compositions(k, dim)
    ]
    return np.asarray(pts)


def _int_compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _int_compositions(total - first, parts - 1):
            yield (first,) + rest


def grid_gain(structure: RewardStructure, grid: GridSpec, chunk: int = 200_000) -> GainReport:
    """Exhaustive lattice maxima for R_hom and R_het.

    R_hom sweeps the lattice of the task simplex; R_het sweeps the full
    product of per-row lattices (no symmetry reduction).
    """
    n, m = structure.n_agents, structure.n_tasks
    if (n, m) != (grid.n_agents, grid.n_tasks):
        raise DomainError("grid dims must match the structure")
    points = _simplex_lattice(m, grid.resolution)
    p = points.shape[0]
    total = p**n
    if total > LATTICE_GUARD:
        raise SizeGuardError(f"lattice product size {total} exceeds {LATTICE_GUARD}")

    hom_stack = np.repeat(points[:, None, :], n, axis=1)
    hom_vals = _reward_rows(structure, hom_stack)
    r_hom = float(hom_vals.max())

    r_het = -np.inf
    index_iter = itertools.product(range(p), repeat=n)
    while True:
        block = list(itertools.islice(index_iter, chunk))
        if not block:
            break
        stack = points[np.asarray(block)]  # (B, N, M)
        vals = _reward_rows(structure, stack)
        r_het = max(r_het, float(vals.max()))

    return GainReport(
        r_hom=r_hom,
        r_het=r_het,
        delta_r_optimized=r_het - r_hom,
        method="grid-oracle",
        iterations=total + p,
    )


def exhaustive_discrete_gain(structure: RewardStructure) -> GainReport:
    """Exact discrete gain enumerating all M^N assignments directly."""
    n, m = structure.n_agents, structure.n_tasks
    total = m**n
    if total > EXHAUSTIVE_GUARD:
        raise SizeGuardError(f"{total} assignments exceed {EXHAUSTIVE_GUARD}")
    eye = np.eye(m)
    r_het = -math.inf
    r_hom = -math.inf
    for assignment in itertools.product(range(m), repeat=n):
        a = eye[np.asarray(assignment)]
        val = float(_reward_rows(structure, a[None])[0])
        r_het = max(r_het, val)
        if len(set(assignment)) == 1:
            r_hom = max(r_hom, val)
    return GainReport(
        r_hom=r_hom,
        r_het=r_het,
        delta_r_bruteforce=r_het - r_hom,
        method="exhaustive-enumeration",
        iterations=total,
    )


def finite_difference(fn, point, step: float = 1e-5):
    """Central finite differences of a scalar function, per coordinate.

    Scalar points get a scalar derivative back; vector points a gradient.
    """
    arr = np.asarray(point, dtype=np.float64)
    if arr.ndim == 0:
        x = float(arr)
        return (fn(x + step) - fn(x - step)) / (2.0 * step)
    grad = np.empty_like(arr)
    for i in range(arr.size):
        hi = arr.copy()
        lo = arr.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (fn(hi) - fn(lo)) / (2.0 * step)
    return grad
