"""Generalized aggregator families and their exact derivatives.

An aggregator maps a vector of nonnegative efforts to a scalar score.  All
families implemented here are symmetric and coordinate-wise non-decreasing
on nonnegative inputs.  The parametric families (power-sum, power-mean,
log-sum-exp, softmax) take a scalar parameter ``t`` that sweeps them between
min-like, mean-like, and max-like behavior:

* power-sum       f_t(x)  = sum_i x_i^t                      (t > 0)
* power-mean      M_t(x)  = (mean_i x_i^t)^(1/t)             (t != 0)
* log-sum-exp     LSE_t(x) = (1/t) * log(sum_i exp(t x_i))   (t != 0)
* softmax         S_t(x)  = sum_i softmax(t x)_i * x_i       (any t)

Exponent-based families subtract the max coordinate before exponentiating so
that evaluation stays finite for |t| up to at least 50.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError

__all__ = [
    "Family",
    "AggregatorSpec",
    "evaluate",
    "gradient_input",
    "gradient_parameter",
    "limit_identity_check",
]

_TIE_ATOL = 1e-12


class Family(str, Enum):
    MIN = "min"
    MEAN = "mean"
    MAX = "max"
    POWER_SUM = "power-sum"
    POWER_MEAN = "power-mean"
    LOG_SUM_EXP = "lse"
    SOFTMAX = "softmax"


# Families whose scalar parameter actually matters.
PARAMETRIC = frozenset(
    {Family.POWER_SUM, Family.POWER_MEAN, Family.LOG_SUM_EXP, Family.SOFTMAX}
)


@dataclass(frozen=True)
class AggregatorSpec:
    """One concrete aggregator: a family tag plus its scalar parameter.

    The parameter is ignored for min/mean/max.  Domain restrictions:
    power-sum needs t > 0, power-mean and log-sum-exp need t != 0.
    """

    family: Family
    t: float = field(default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "t", float(self.t))
        if self.family is Family.POWER_SUM and not self.t > 0:
            raise DomainError(f"power-sum requires t > 0, got t={self.t}")
        if self.family is Family.POWER_MEAN and self.t == 0:
            raise DomainError("power-mean requires t != 0")
        if self.family is Family.LOG_SUM_EXP and self.t == 0:
            raise DomainError("log-sum-exp requires t != 0")

    @property
    def is_parametric(self) -> bool:
        return self.family in PARAMETRIC


def _as_effort_vector(x, family: Family | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("effort vector must be one-dimensional and non-empty")
    if family in (Family.POWER_SUM, Family.POWER_MEAN) and np.any(x < 0):
        # only the power families are restricted to nonnegative inputs; the
        # others also aggregate score vectors, which may dip below zero
        # (log-sum-exp carries a -log(N)/|t| offset)
        raise DomainError("power aggregators need nonnegative entries")
    return x


def _softmax_weights(t: float, x: np.ndarray) -> np.ndarray:
    z = t * x
    z = z - z.max()
    w = np.exp(z)
    return w / w.sum()


def evaluate(spec: AggregatorSpec, x) -> float:
    """Evaluate the aggregator on an effort vector.

    The input is sorted first so that evaluation is exactly invariant under
    permutations (floating-point sums are order-dependent at the ulp level).
    """
    x = np.sort(_as_effort_vector(x, spec.family))
    fam, t = spec.family, spec.t
    if fam is Family.MIN:
        return float(x.min())
    if fam is Family.MAX:
        return float(x.max())
    if fam is Family.MEAN:
        return float(x.mean())
    if fam is Family.POWER_SUM:
        return float(np.sum(x**t))
    if fam is Family.POWER_MEAN:
        if t == 1.0:
            return float(x.mean())  # exact neutral element
        if t < 0 and np.any(x == 0):
            return 0.0  # limit of (mean x^t)^(1/t) as any coordinate -> 0
        return float(np.mean(x**t) ** (1.0 / t))
    if fam is Family.LOG_SUM_EXP:
        z = t * x
        m = z.max()
        return float((m + np.log(np.sum(np.exp(z - m)))) / t)
    if fam is Family.SOFTMAX:
        if t == 0.0:
            return float(x.mean())  # exact neutral element
        return float(_softmax_weights(t, x) @ x)
    raise DomainError(f"unknown family {fam}")


def gradient_input(spec: AggregatorSpec, x) -> np.ndarray:
    """Analytic gradient of evaluate(spec, x) with respect to x.

    Min/max return the tie-splitting subgradient: the indicator of the
    extremal coordinate, with mass split equally among ties.
    """
    x = _as_effort_vector(x, spec.family)
    fam, t, n = spec.family, spec.t, x.size
    if fam is Family.MIN or fam is Family.MAX:
        extreme = x.min() if fam is Family.MIN else x.max()
        mask = np.abs(x - extreme) <= _TIE_ATOL
        return mask / mask.sum()
    if fam is Family.MEAN:
        return np.full(n, 1.0 / n)
    if fam is Family.POWER_SUM:
        return t * x ** (t - 1.0)
    if fam is Family.POWER_MEAN:
        m = evaluate(spec, x)
        return m ** (1.0 - t) * x ** (t - 1.0) / n
    if fam is Family.LOG_SUM_EXP:
        return _softmax_weights(t, x)
    if fam is Family.SOFTMAX:
        w = _softmax_weights(t, x)
        f = w @ x
        return w * (1.0 + t * (x - f))
    raise DomainError(f"unknown family {fam}")


def gradient_parameter(spec: AggregatorSpec, x) -> float:
    """Analytic derivative of evaluate(spec, x) with respect to t.

    Only defined for the parametric families.  Terms of the form
    0^t * log(0) are taken as 0 (the t > 0 limit).
    """
    if not spec.is_parametric:
        raise DomainError(f"family {spec.family.value} has no parameter")
    x = _as_effort_vector(x, spec.family)
    fam, t = spec.family, spec.t
    if fam is Family.POWER_SUM:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(x > 0, x**t * np.log(np.where(x > 0, x, 1.0)), 0.0)
        return float(terms.sum())
    if fam is Family.POWER_MEAN:
        if np.any(x == 0) and t < 0:
            return 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            logx = np.log(np.where(x > 0, x, 1.0))
            xt = x**t
            s = xt.mean()
            s_dot = np.where(x > 0, xt * logx, 0.0).mean()
        m = s ** (1.0 / t)
        return float(m * (-np.log(s) / t**2 + s_dot / (t * s)))
    if fam is Family.LOG_SUM_EXP:
        f = evaluate(spec, x)
        w = _softmax_weights(t, x)
        return float((w @ x - f) / t)
    if fam is Family.SOFTMAX:
        w = _softmax_weights(t, x)
        f = w @ x
        return float(w @ (x**2) - f**2)  # weighted variance of x
    raise DomainError(f"unknown family {fam}")


_NEUTRAL = {Family.SOFTMAX: 0.0, Family.POWER_MEAN: 1.0}
_LIMIT_T = 50.0


def _nearest_label(value: float, x: np.ndarray, tol: float = 1e-6) -> str:
    candidates = {"min": float(x.min()), "mean": float(x.mean()), "max": float(x.max())}
    for label, target in candidates.items():
        if abs(value - target) <= tol:
            return label
    return min(candidates, key=lambda k: abs(value - candidates[k]))


def limit_identity_check(family: Family, x) -> dict:
    """Classify where a parametric family lands at t -> -inf / neutral / +inf.

    Evaluates at t = +/-50 and at the family's neutral parameter (if any),
    labelling each as min/mean/max.  Values within 1e-6 of a candidate match
    it exactly; otherwise the nearest candidate is reported (power-mean
    approaches its limits only polynomially in t, so at |t| = 50 it sits
    around 1e-2 from the true extreme).
    """
    family = Family(family)
    x = _as_effort_vector(x)
    if x.max() - x.min() <= _TIE_ATOL:
        raise DomainError("limit identity check requires a non-constant vector")
    if family not in (Family.SOFTMAX, Family.POWER_MEAN, Family.LOG_SUM_EXP):
        raise DomainError(f"family {family.value} has no min/mean/max limits in t")
    out = {
        "t->+inf": _nearest_label(evaluate(AggregatorSpec(family, _LIMIT_T), x), x),
        "t->-inf": _nearest_label(evaluate(AggregatorSpec(family, -_LIMIT_T), x), x),
    }
    if family in _NEUTRAL:
        out["neutral"] = _nearest_label(
            evaluate(AggregatorSpec(family, _NEUTRAL[family]), x), x
        )
    else:
        out["neutral"] = None
    return out
