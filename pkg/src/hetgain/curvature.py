"""Schur-curvature classification via majorization sampling.

A function is Schur-convex if it never decreases along the majorization
order (more unequal input at equal sum -> value at least as large), and
Schur-concave in the reverse direction.  Classification here is empirical
evidence over sampled majorization pairs, not proof; verdicts carry the
sample count so reports can say so.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import simplex
from .aggregators import AggregatorSpec, Family, evaluate
from .errors import DomainError

# Differences within EQ_TOL count as equality; strictness needs STRICT_TOL.
EQ_TOL = 1e-10
STRICT_TOL = 1e-8


class Curvature(str, Enum):
    SCHUR_CONVEX = "schur-convex"
    SCHUR_CONCAVE = "schur-concave"
    BOTH = "both"
    NEITHER = "neither"


@dataclass(frozen=True)
class MajorizationPair:
    """A pair x ≻ y with equal sums, x not a permutation of y."""

    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class CurvatureVerdict:
    classification: Curvature
    strict: bool
    evidence_count: int
    convexity_counterexample: Optional[MajorizationPair] = None
    concavity_counterexample: Optional[MajorizationPair] = None


def majorizes(x, y, sum_tol: float = 1e-9) -> bool:
    """True iff x majorizes y: descending prefix sums of x dominate y's."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("majorization needs two equal-length vectors")
    if abs(x.sum() - y.sum()) > sum_tol:
        raise DomainError(
            f"majorization needs equal sums, got {x.sum()} vs {y.sum()}"
        )
    px = np.cumsum(np.sort(x)[::-1])
    py = np.cumsum(np.sort(y)[::-1])
    return bool(np.all(px >= py - 1e-12))


def sample_majorization_pair(
    dim: int, rng: np.random.Generator, transfers: int = 1
) -> MajorizationPair:
    """Draw x uniformly on the simplex, derive y by Robin-Hood transfers.

    Each transfer moves mass from a larger coordinate to a smaller one
    without letting them cross, which preserves the sum and guarantees
    x ≻ y strictly.
    """
    if dim < 2:
        raise DomainError("need dim >= 2")
    x = simplex.sample(dim, rng)
    y = x.copy()
    for _ in range(transfers):
        hi, lo = int(np.argmax(y)), int(np.argmin(y))
        gap = y[hi] - y[lo]
        if gap <= 0:  # constant vector; cannot happen for a Dirichlet draw
            raise DomainError("degenerate draw with no transferable gap")
        eps = rng.uniform(0.0, gap / 2.0)
        eps = max(eps, gap * 1e-3)  # keep the pair strictly apart
        y[hi] -= eps
        y[lo] += eps
    return MajorizationPair(x=x, y=y)


def _classify_differences(
    diffs, pairs, evidence_count: int
) -> CurvatureVerdict:
    diffs = np.asarray(diffs)
    convex_violations = np.where(diffs < -EQ_TOL)[0]
    concave_violations = np.where(diffs > EQ_TOL)[0]
    cx = MajorizationPair(*pairs[convex_violations[0]]) if convex_violations.size else None
    cc = MajorizationPair(*pairs[concave_violations[0]]) if concave_violations.size else None
    if convex_violations.size and concave_violations.size:
        return CurvatureVerdict(Curvature.NEITHER, False, evidence_count, cx, cc)
    if not convex_violations.size and not concave_violations.size:
        return CurvatureVerdict(Curvature.BOTH, False, evidence_count)
    if convex_violations.size == 0:
        # f(x) >= f(y) throughout, with at least one strict instance
        if np.any(diffs > STRICT_TOL):
            strict = bool(np.all(diffs > STRICT_TOL))
            return CurvatureVerdict(Curvature.SCHUR_CONVEX, strict, evidence_count)
        return CurvatureVerdict(Curvature.BOTH, False, evidence_count)
    if np.any(diffs < -STRICT_TOL):
        strict = bool(np.all(diffs < -STRICT_TOL))
        return CurvatureVerdict(Curvature.SCHUR_CONCAVE, strict, evidence_count)
    return CurvatureVerdict(Curvature.BOTH, False, evidence_count)


def classify_empirical(
    spec: AggregatorSpec, dim: int, n_pairs: int, seed: int = 0
) -> CurvatureVerdict:
    """Classify by evaluating the aggregator on sampled majorization pairs."""
    if n_pairs < 1:
        raise DomainError("need n_pairs >= 1")
    rng = np.random.default_rng(seed)
    diffs = np.empty(n_pairs)
    pairs = []
    for k in range(n_pairs):
        pair = sample_majorization_pair(dim, rng, transfers=1 + k % 3)
        diffs[k] = evaluate(spec, pair.x) - evaluate(spec, pair.y)
        pairs.append((pair.x, pair.y))
    return _classify_differences(diffs, pairs, n_pairs)


def classify_analytic(spec: AggregatorSpec) -> CurvatureVerdict:
    """Known closed-form classification per family and parameter."""
    fam, t = spec.family, spec.t
    if fam is Family.MIN:
        return CurvatureVerdict(Curvature.SCHUR_CONCAVE, False, 0)
    if fam is Family.MAX:
        return CurvatureVerdict(Curvature.SCHUR_CONVEX, False, 0)
    if fam is Family.MEAN:
        return CurvatureVerdict(Curvature.BOTH, False, 0)
    if fam in (Family.POWER_SUM, Family.POWER_MEAN):
        if t > 1:
            return CurvatureVerdict(Curvature.SCHUR_CONVEX, True, 0)
        if t == 1:
            return CurvatureVerdict(Curvature.BOTH, False, 0)
        return CurvatureVerdict(Curvature.SCHUR_CONCAVE, True, 0)
    if fam in (Family.LOG_SUM_EXP, Family.SOFTMAX):
        if t > 0:
            return CurvatureVerdict(Curvature.SCHUR_CONVEX, True, 0)
        if t == 0:
            return CurvatureVerdict(Curvature.BOTH, False, 0)
        return CurvatureVerdict(Curvature.SCHUR_CONCAVE, True, 0)
    raise DomainError(f"unknown family {fam}")


def sum_form_classify(
    g: Callable[[float], float], n_probes: int, seed: int = 0
) -> CurvatureVerdict:
    """Classify the sum-form aggregator sum_i g(x_i) via convexity of g.

    Midpoint convexity of g on [0, 1] decides the Schur property of the
    sum form, so each probe compares g(a) + g(b) against 2 g((a+b)/2).
    """
    rng = np.random.default_rng(seed)
    diffs = np.empty(n_probes)
    pairs = []
    for k in range(n_probes):
        a, b = rng.uniform(0.0, 1.0, size=2)
        ga, gb, gm = g(a), g(b), g((a + b) / 2.0)
        for v in (ga, gb, gm):
            if not np.isfinite(v):
                raise DomainError("g must be finite on [0, 1]")
        diffs[k] = ga + gb - 2.0 * gm
        pairs.append((np.array([a, b]), np.array([(a + b) / 2.0] * 2)))
    return _classify_differences(diffs, pairs, n_probes)


def verify_constant_sum(
    inner: AggregatorSpec, n_agents: int, n_tasks: int, n_samples: int, seed: int = 0
) -> tuple[bool, float]:
    """Check whether task scores sum to a constant over admissible matrices.

    Returns (is_constant, max |sum - mean sum|).  Constant-sum inner
    aggregators are the precondition for the Schur-convex-outer result.
    """
    if n_agents < 2 or n_tasks < 2:
        raise DomainError("need N, M >= 2")
    rng = np.random.default_rng(seed)
    sums = np.empty(n_samples)
    for k in range(n_samples):
        a = simplex.sample(n_tasks, rng, size=n_agents)
        sums[k] = sum(evaluate(inner, a[:, j]) for j in range(n_tasks))
    max_dev = float(np.max(np.abs(sums - sums.mean())))
    return bool(np.std(sums) <= 1e-9), max_dev
