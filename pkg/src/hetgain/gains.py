"""Heterogeneity gains: closed forms, discrete brute force, and continuous
optimization of R_hom / R_het for nested-aggregator reward structures.

The heterogeneity gain of a reward structure is the best reward attainable
when every agent may choose its own effort allocation, minus the best reward
when all agents must share one allocation.  Also includes the proof-style
constructive heterogenization, the softmax lower bounds, and the two case
studies (force-allocation contest and threshold foraging).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import simplex
from ._kernels import batch_reward
from .aggregators import AggregatorSpec, evaluate, gradient_input
from .errors import DomainError, SizeGuardError

CONTINUOUS = "continuous"
DISCRETE = "discrete"

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class AllocationMatrix:
    """N x M matrix of efforts; rows on the unit simplex (or one-hot)."""

    values: np.ndarray
    mode: str = CONTINUOUS

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        check_admissible(v, self.mode)

    @property
    def n_agents(self) -> int:
        return self.values.shape[0]

    @property
    def n_tasks(self) -> int:
        return self.values.shape[1]


def check_admissible(values: np.ndarray, mode: str, tol: float = ROW_SUM_TOL):
    values = np.asarray(values)
    if values.ndim != 2:
        raise DomainError("allocation matrix must be two-dimensional")
    if np.any(values < -tol):
        raise DomainError("allocation entries must be nonnegative")
    if mode == CONTINUOUS:
        if np.any(np.abs(values.sum(axis=1) - 1.0) > tol):
            raise DomainError("each row must sum to 1")
    elif mode == DISCRETE:
        if not np.all(np.isin(values, (0.0, 1.0))) or np.any(values.sum(axis=1) != 1.0):
            raise DomainError("discrete rows must be one-hot")
    else:
        raise DomainError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class RewardStructure:
    """Outer aggregator U over the M per-task scores of inner aggregator T."""

    outer: AggregatorSpec
    inner: AggregatorSpec
    n_agents: int
    n_tasks: int

    def __post_init__(self):
        if self.n_agents < 1 or self.n_tasks < 1:
            raise DomainError("need N >= 1 and M >= 1")


@dataclass
class GainReport:
    """All values of the gain obtained for one structure, with provenance."""

    r_hom: float
    r_het: float
    delta_r_theory: Optional[float] = None
    delta_r_bruteforce: Optional[float] = None
    delta_r_optimized: Optional[float] = None
    hom_argmax: Optional[np.ndarray] = None
    het_argmax: Optional[AllocationMatrix] = None
    method: str = ""
    seeds: tuple = ()
    iterations: int = 0

    def to_json_dict(self) -> dict:
        return {
            "delta_r_theory": self.delta_r_theory,
            "delta_r_bruteforce": self.delta_r_bruteforce,
            "delta_r_optimized": self.delta_r_optimized,
            "r_hom": self.r_hom,
            "r_het": self.r_het,
            "seeds": list(self.seeds),
            "method": self.method,
            "iterations": self.iterations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def aggregate_reward(structure: RewardStructure, allocation) -> float:
    """Team reward U(T(a_1), ..., T(a_M)) of one allocation matrix."""
    if isinstance(allocation, AllocationMatrix):
        values = allocation.values
    else:
        values = np.asarray(allocation, dtype=np.float64)
        check_admissible(values, CONTINUOUS if not _is_onehot(values) else DISCRETE)
    if values.shape != (structure.n_agents, structure.n_tasks):
        raise DomainError(
            f"allocation shape {values.shape} does not match structure "
            f"({structure.n_agents}, {structure.n_tasks})"
        )
    scores = [evaluate(structure.inner, values[:, j]) for j in range(structure.n_tasks)]
    return evaluate(structure.outer, np.asarray(scores))


def _is_onehot(values: np.ndarray) -> bool:
    return bool(
        np.all(np.isin(values, (0.0, 1.0))) and np.all(values.sum(axis=1) == 1.0)
    )


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

_PLAIN = {"min", "mean", "max"}


def closed_form_gain(u_name: str, t_name: str, mode: str, n_agents: int, n_tasks: int) -> float:
    """Exact gain for U, T in {min, mean, max} (continuous or discrete)."""
    u, t = str(u_name).lower(), str(t_name).lower()
    if u not in _PLAIN or t not in _PLAIN:
        raise DomainError(f"no closed form for U={u_name}, T={t_name}")
    n, m = int(n_agents), int(n_tasks)
    if n < 1 or m < 1:
        raise DomainError("need N >= 1 and M >= 1")
    if mode == CONTINUOUS:
        if (u, t) in {("min", "max"), ("mean", "max")}:
            return (m - 1) / m
        return 0.0
    if mode == DISCRETE:
        if (u, t) == ("min", "mean"):
            return (n // m) / n
        if (u, t) == ("min", "max"):
            return 1.0 if n >= m else 0.0
        if (u, t) == ("mean", "max"):
            return (min(m, n) - 1) / m
        return 0.0
    raise DomainError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# discrete brute force (composition enumeration)
# ---------------------------------------------------------------------------

BRUTE_FORCE_GUARD = 10**7


def brute_force_gain_discrete(structure: RewardStructure) -> GainReport:
    """Exact discrete gain by enumerating task-count compositions.

    Agent identity is irrelevant because the inner aggregator is symmetric,
    so assignments are enumerated as compositions of N into M task counts.
    """
    n, m = structure.n_agents, structure.n_tasks
    count = math.comb(n + m - 1, m - 1)
    if count > BRUTE_FORCE_GUARD:
        raise SizeGuardError(
            f"{count} compositions exceed the {BRUTE_FORCE_GUARD} guard"
        )
    # score of a column holding k ones and N-k zeros, for k = 0..N
    score_table = np.array(
        [
            evaluate(structure.inner, np.concatenate([np.ones(k), np.zeros(n - k)]))
            if 0 < k < n
            else evaluate(structure.inner, np.ones(n) if k == n else np.zeros(n))
            for k in range(n + 1)
        ]
    )
    counts = simplex.compositions(n, m)
    scores = score_table[counts]
    rewards = np.array([evaluate(structure.outer, row) for row in scores])
    best = int(np.argmax(rewards))
    r_het = float(rewards[best])

    hom_rewards = []
    for j in range(m):
        comp = np.zeros(m, dtype=np.int64)
        comp[j] = n
        hom_rewards.append(evaluate(structure.outer, score_table[comp]))
    hom_best = int(np.argmax(hom_rewards))
    r_hom = float(hom_rewards[hom_best])

    hom_argmax = np.zeros(m)
    hom_argmax[hom_best] = 1.0
    return GainReport(
        r_hom=r_hom,
        r_het=r_het,
        delta_r_bruteforce=r_het - r_hom,
        hom_argmax=hom_argmax,
        het_argmax=AllocationMatrix(_composition_matrix(counts[best], n), DISCRETE),
        method="composition-enumeration",
        iterations=count,
    )


def _composition_matrix(counts: np.ndarray, n_agents: int) -> np.ndarray:
    a = np.zeros((n_agents, counts.size))
    i = 0
    for j, k in enumerate(counts):
        a[i : i + k, j] = 1.0
        i += k
    return a


# ---------------------------------------------------------------------------
# continuous optimization
# ---------------------------------------------------------------------------


def _pga(objective, gradient, project_fn, x0, step0=0.1, max_iters=2000, min_step=1e-9):
    """Projected (sub)gradient ascent with backtracking halving.

    Accepts only strictly improving steps, so warm starts placed on an
    optimum never leave it.
    """
    x = np.array(x0, dtype=np.float64)
    f = objective(x)
    total = 0
    for _ in range(max_iters):
        total += 1
        g = gradient(x)
        step = step0
        improved = False
        while step >= min_step:
            cand = project_fn(x + step * g)
            fc = objective(cand)
            if fc > f + 1e-13:
                x, f = cand, fc
                improved = True
                break
            step /= 2.0
        if not improved:
            break
    return x, f, total


def _take_best(cand_val, cand_x, best_val, best_x):
    """Deterministic reduction: larger value wins; ties by lexicographic argmax."""
    if best_x is None or cand_val > best_val:
        return cand_val, cand_x
    if cand_val == best_val and tuple(cand_x.ravel()) < tuple(best_x.ravel()):
        return cand_val, cand_x
    return best_val, best_x


def _replicate(c: np.ndarray, n: int) -> np.ndarray:
    return np.repeat(np.asarray(c, dtype=np.float64)[None, :], n, axis=0)


def optimize_gain_continuous(
    structure: RewardStructure,
    restarts: int = 32,
    lattice_resolution: float = 0.01,
    seed: int = 0,
    max_iters: int = 2000,
) -> GainReport:
    """Continuous gain via multi-start projected-gradient ascent.

    R_hom is searched on the task simplex (plus a lattice sweep for M <= 3);
    R_het on the N row simplices, warm-started from the homogeneous optimum,
    the trivial and spread allocations, and the constructive
    heterogenization of the homogeneous optimum.
    """
    n, m = structure.n_agents, structure.n_tasks
    inner, outer = structure.inner, structure.outer
    rng = np.random.default_rng(seed)
    iterations = 0

    def hom_value(c: np.ndarray) -> float:
        return float(batch_reward(_replicate(c, n)[None, :, :], inner, outer)[0])

    def hom_grad(c: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            scores = np.array([evaluate(inner, np.full(n, cj)) for cj in c])
            gu = gradient_input(outer, scores)
            col_slope = np.array(
                [gradient_input(inner, np.full(n, cj)).sum() for cj in c]
            )
            g = gu * col_slope
        # power families have infinite slope at simplex corners; a capped
        # surrogate keeps the ascent direction without poisoning candidates
        return np.nan_to_num(g, nan=0.0, posinf=1e6, neginf=-1e6)

    starts = [np.full(m, 1.0 / m)]
    starts += [np.eye(m)[j] for j in range(m)]
    starts += [simplex.sample(m, rng) for _ in range(restarts)]

    best_hom, best_c = -np.inf, None
    for c0 in starts:
        c, f, it = _pga(hom_value, hom_grad, simplex.project, c0, max_iters=max_iters)
        iterations += it
        best_hom, best_c = _take_best(f, c, best_hom, best_c)

    if m <= 3:
        points = simplex.lattice(m, lattice_resolution)
        vals = batch_reward(
            np.repeat(points[:, None, :], n, axis=1), inner, outer
        )
        k = int(np.argmax(vals))
        c, f, it = _pga(hom_value, hom_grad, simplex.project, points[k], max_iters=max_iters)
        iterations += it
        best_hom, best_c = _take_best(f, c, best_hom, best_c)
        best_hom, best_c = _take_best(float(vals[k]), points[k], best_hom, best_c)

    def het_value(a: np.ndarray) -> float:
        return float(batch_reward(a[None, :, :], inner, outer)[0])

    def het_grad(a: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            scores = np.array([evaluate(inner, a[:, j]) for j in range(m)])
            gu = gradient_input(outer, scores)
            grad = np.empty_like(a)
            for j in range(m):
                grad[:, j] = gu[j] * gradient_input(inner, a[:, j])
        return np.nan_to_num(grad, nan=0.0, posinf=1e6, neginf=-1e6)

    def project_het(a: np.ndarray) -> np.ndarray:
        return simplex.project_rows(a)

    spread = np.zeros((n, m))
    spread[np.arange(n), np.arange(n) % m] = 1.0
    het_starts = [_replicate(best_c, n), spread, construct_het_from_hom(best_c, n)]
    het_starts += [_replicate(np.eye(m)[j], n) for j in range(m)]  # trivial allocations
    het_starts += [simplex.sample(m, rng, size=n) for _ in range(restarts)]

    best_het, best_a = -np.inf, None
    for a0 in het_starts:
        a, f, it = _pga(het_value, het_grad, project_het, a0, max_iters=max_iters)
        iterations += it
        best_het, best_a = _take_best(f, a, best_het, best_a)

    # the heterogeneous feasible set contains every homogeneous point
    best_het, best_a = _take_best(best_hom, _replicate(best_c, n), best_het, best_a)

    return GainReport(
        r_hom=best_hom,
        r_het=best_het,
        delta_r_optimized=best_het - best_hom,
        hom_argmax=best_c,
        het_argmax=AllocationMatrix(best_a, CONTINUOUS),
        method="projected-gradient-ascent",
        seeds=(seed,),
        iterations=iterations,
    )


def hom_optimum_is_trivial(c: np.ndarray, tol: float = 1e-6) -> bool:
    """Heuristic triviality flag: c within tol of a one-hot vector."""
    c = np.asarray(c)
    return bool(np.max(c) >= 1.0 - tol)


def construct_het_from_hom(c, n_agents: int) -> np.ndarray:
    """Constructive heterogenization preserving column sums N*c.

    floor(N*c_j) agents devote their full budget to task j; the remaining
    fractional masses are packed agent by agent, splitting a task's leftover
    across consecutive agents whenever a budget overflows.
    """
    c = np.asarray(c, dtype=np.float64)
    if np.any(c < -1e-12) or abs(c.sum() - 1.0) > 1e-9:
        raise DomainError("c must lie on the unit simplex")
    m = c.size
    target = n_agents * c
    base = np.floor(target + 1e-12).astype(int)
    frac = target - base

    rows = []
    for j in range(m):
        for _ in range(base[j]):
            row = np.zeros(m)
            row[j] = 1.0
            rows.append(row)

    remaining = n_agents - int(base.sum())
    if remaining > 0:
        rem = frac.copy()
        row = np.zeros(m)
        budget = 1.0
        for j in range(m):
            while rem[j] > 1e-12:
                amount = min(rem[j], budget)
                row[j] += amount
                rem[j] -= amount
                budget -= amount
                if budget <= 1e-12:
                    rows.append(row)
                    row = np.zeros(m)
                    budget = 1.0
        if len(rows) < n_agents:
            rows.append(row)  # last agent absorbs fp leftovers
    a = np.asarray(rows[:n_agents])
    return a


# ---------------------------------------------------------------------------
# softmax bounds
# ---------------------------------------------------------------------------


def sigma(t: float, n: int) -> float:
    """e^t / (e^t + n - 1), computed without overflow for large t."""
    return float(1.0 / (1.0 + (n - 1) * np.exp(-t)))


def softmax_gain_bound(t: float, tau: float, n: int) -> dict:
    """Gain bound for softmax U, T with N = M agents and tasks.

    t <= 0 gives the exact value 0; otherwise a lower bound that depends on
    the sign of the outer temperature.
    """
    if n < 2:
        raise DomainError("need N >= 2")
    if t <= 0:
        return {"regime": "exact", "bound": 0.0}
    if tau <= 0:
        return {"regime": "lower-bound", "bound": sigma(t, n) - 1.0 / n}
    return {"regime": "lower-bound", "bound": max(sigma(t, n) - sigma(tau, n), 0.0)}


# ---------------------------------------------------------------------------
# case study: force-allocation contest against a fixed adversary
# ---------------------------------------------------------------------------


def blotto_task_score(team_force: float, adversary_samples, value: float = 1.0) -> float:
    """Monte-Carlo estimate of value * P(team force beats the adversary)."""
    samples = np.asarray(adversary_samples, dtype=np.float64)
    if samples.size == 0:
        raise DomainError("need at least one adversary sample")
    return float(value * np.mean(team_force > samples))


def make_adversary(kind, n_tasks: int, n_samples: int = 1, seed: int = 0) -> np.ndarray:
    """Fixed adversary sample set of shape (K, M).

    ``kind`` is either an explicit allocation vector (deterministic
    adversary) or the string "uniform" for draws from the unit simplex.
    """
    if isinstance(kind, str):
        if kind != "uniform":
            raise DomainError(f"unknown adversary kind {kind!r}")
        rng = np.random.default_rng(seed)
        return simplex.sample(n_tasks, rng, size=n_samples)
    vec = np.asarray(kind, dtype=np.float64)
    if vec.shape != (n_tasks,):
        raise DomainError("deterministic adversary must be one vector of length M")
    return np.repeat(vec[None, :], max(n_samples, 1), axis=0)


def blotto_gain(
    n_agents: int,
    n_tasks: int,
    adversary_samples: np.ndarray,
    values=None,
    resolution: float = 0.01,
    n_random_probes: int = 200,
    seed: int = 0,
) -> GainReport:
    """Gain of the contest reward: zero, because the thresholded-sum task
    score depends on each battlefield only through its column sum, which a
    homogeneous team can replicate exactly.

    Both searches therefore walk the same column-sum profiles: a lattice on
    the shared-allocation simplex plus random heterogeneous probes, each
    probe's profile being handed to the homogeneous side as well.
    """
    samples = np.asarray(adversary_samples, dtype=np.float64)
    if values is None:
        values = np.ones(n_tasks)
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < 0):
        raise DomainError("battlefield values must be nonnegative")

    def profile_value(forces: np.ndarray) -> float:
        return float(
            sum(
                blotto_task_score(forces[j], samples[:, j], values[j])
                for j in range(n_tasks)
            )
        )

    profiles = [n_agents * c for c in simplex.lattice(n_tasks, resolution)]
    rng = np.random.default_rng(seed)
    probe_profiles = [
        simplex.sample(n_tasks, rng, size=n_agents).sum(axis=0)
        for _ in range(n_random_probes)
    ]

    best_val, best_profile = -np.inf, None
    for p in profiles + probe_profiles:
        v = profile_value(np.asarray(p))
        best_val, best_profile = _take_best(v, np.asarray(p), best_val, best_profile)

    c_star = best_profile / n_agents
    return GainReport(
        r_hom=best_val,
        r_het=best_val,
        delta_r_optimized=0.0,
        hom_argmax=c_star,
        het_argmax=AllocationMatrix(_replicate(c_star, n_agents), CONTINUOUS),
        method="column-sum-profile-search",
        seeds=(seed,),
        iterations=len(profiles) + len(probe_profiles),
    )


# ---------------------------------------------------------------------------
# case study: threshold foraging with item level L
# ---------------------------------------------------------------------------


def lbf_gain(n_agents: int, n_tasks: int, level: int = 1) -> float:
    """Closed-form per-item-scaled gain for equally-leveled items.

    Level-1 items make the inner aggregator a column max and the outer a
    scaled mean, giving (min(M, N) - 1) / M.  For L > 1 with L dividing N,
    agents act as N/L bundles and the same formula applies to the bundles.
    """
    if level < 1:
        raise DomainError("need level >= 1")
    if n_agents < 1 or n_tasks < 1:
        raise DomainError("need N >= 1 and M >= 1")
    if level == 1:
        return (min(n_tasks, n_agents) - 1) / n_tasks
    if n_agents % level != 0:
        raise DomainError(f"level {level} must divide the team size {n_agents}")
    bundles = n_agents // level
    return (min(n_tasks, bundles) - 1) / n_tasks
