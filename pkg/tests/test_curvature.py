"""Majorization machinery and Schur-curvature classification."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetgain.aggregators import AggregatorSpec, Family
from hetgain.curvature import (
    Curvature,
    classify_analytic,
    classify_empirical,
    majorizes,
    sample_majorization_pair,
    sum_form_classify,
    verify_constant_sum,
)
from hetgain.errors import DomainError


class TestMajorizes:
    def test_extreme_majorizes_uniform(self):
        assert majorizes([1, 0], [0.5, 0.5])

    def test_small_transfer(self):
        assert majorizes([0.7, 0.3], [0.6, 0.4])
        assert not majorizes([0.6, 0.4], [0.7, 0.3])

    def test_reflexive(self):
        assert majorizes([0.5, 0.5], [0.5, 0.5])

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            majorizes([0.5, 0.5], [0.3, 0.3, 0.4])

    def test_sum_mismatch(self):
        with pytest.raises(DomainError):
            majorizes([0.5, 0.5], [0.6, 0.6])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(2, 6))
    def test_onehot_and_uniform_bracket_everything(self, seed, dim):
        """Any simplex vector sits between the one-hot and uniform vectors."""
        rng = np.random.default_rng(seed)
        x = rng.dirichlet(np.ones(dim))
        onehot = np.zeros(dim)
        onehot[0] = 1.0
        assert majorizes(onehot, x)
        assert majorizes(x, np.full(dim, 1.0 / dim))


class TestSampling:
    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(2, 6))
    def test_pair_postconditions(self, seed, dim):
        rng = np.random.default_rng(seed)
        pair = sample_majorization_pair(dim, rng)
        assert majorizes(pair.x, pair.y)
        assert abs(pair.x.sum() - pair.y.sum()) < 1e-12
        # not a permutation: sorted vectors differ
        assert not np.allclose(np.sort(pair.x), np.sort(pair.y), atol=1e-15)

    def test_transitivity_of_chained_transfers(self):
        """x > y and y > z built by chained transfers imply x > z."""
        rng = np.random.default_rng(42)
        for _ in range(1000):
            dim = int(rng.integers(2, 6))
            pair = sample_majorization_pair(dim, rng)
            x, y = pair.x, pair.y
            z = y.copy()
            hi, lo = int(np.argmax(z)), int(np.argmin(z))
            gap = z[hi] - z[lo]
            eps = rng.uniform(0, gap / 2) if gap > 0 else 0.0
            z[hi] -= eps
            z[lo] += eps
            assert majorizes(x, y) and majorizes(y, z)
            assert majorizes(x, z)


ANALYTIC_SWEEP = [
    (Family.MIN, None, Curvature.SCHUR_CONCAVE),
    (Family.MEAN, None, Curvature.BOTH),
    (Family.MAX, None, Curvature.SCHUR_CONVEX),
    (Family.POWER_SUM, 0.5, Curvature.SCHUR_CONCAVE),
    (Family.POWER_SUM, 1.0, Curvature.BOTH),
    (Family.POWER_SUM, 2.0, Curvature.SCHUR_CONVEX),
    (Family.POWER_MEAN, -2.0, Curvature.SCHUR_CONCAVE),
    (Family.POWER_MEAN, 0.5, Curvature.SCHUR_CONCAVE),
    (Family.POWER_MEAN, 1.0, Curvature.BOTH),
    (Family.POWER_MEAN, 3.0, Curvature.SCHUR_CONVEX),
    (Family.LOG_SUM_EXP, -2.0, Curvature.SCHUR_CONCAVE),
    (Family.LOG_SUM_EXP, 2.0, Curvature.SCHUR_CONVEX),
    (Family.SOFTMAX, -1.0, Curvature.SCHUR_CONCAVE),
    (Family.SOFTMAX, 0.0, Curvature.BOTH),
    (Family.SOFTMAX, 1.0, Curvature.SCHUR_CONVEX),
]


class TestClassification:
    @pytest.mark.parametrize("family,t,expected", ANALYTIC_SWEEP)
    def test_analytic_table(self, family, t, expected):
        spec = AggregatorSpec(family, t if t is not None else 0.0)
        assert classify_analytic(spec).classification is expected

    def test_power_sum_convex_strict(self):
        v = classify_empirical(AggregatorSpec(Family.POWER_SUM, 2.0), 3, 1000, seed=0)
        assert v.classification is Curvature.SCHUR_CONVEX
        assert v.strict
        assert v.evidence_count == 1000

    def test_power_sum_concave_strict(self):
        v = classify_empirical(AggregatorSpec(Family.POWER_SUM, 0.5), 3, 1000, seed=0)
        assert v.classification is Curvature.SCHUR_CONCAVE
        assert v.strict

    def test_mean_both(self):
        v = classify_empirical(AggregatorSpec(Family.MEAN), 4, 1000, seed=1)
        assert v.classification is Curvature.BOTH

    def test_neither_collects_counterexamples(self):
        """A non-monotone-in-majorization function lands in Neither with a
        counterexample per direction."""
        from hetgain.curvature import _classify_differences

        diffs = np.array([1.0, -1.0, 0.5])
        pairs = [
            (np.array([1.0, 0.0]), np.array([0.5, 0.5])),
            (np.array([0.9, 0.1]), np.array([0.6, 0.4])),
            (np.array([0.8, 0.2]), np.array([0.7, 0.3])),
        ]
        v = _classify_differences(diffs, pairs, 3)
        assert v.classification is Curvature.NEITHER
        assert v.convexity_counterexample is not None
        assert v.concavity_counterexample is not None


class TestSumForm:
    def test_square_is_convex(self):
        v = sum_form_classify(lambda x: x**2, 500, seed=0)
        assert v.classification is Curvature.SCHUR_CONVEX

    def test_sqrt_is_concave(self):
        v = sum_form_classify(np.sqrt, 500, seed=0)
        assert v.classification is Curvature.SCHUR_CONCAVE

    def test_affine_is_both(self):
        v = sum_form_classify(lambda x: 3.0 * x, 500, seed=0)
        assert v.classification is Curvature.BOTH

    def test_nonfinite_rejected(self):
        with pytest.raises(DomainError):
            sum_form_classify(lambda x: float("inf") if x < 0.5 else x, 100, seed=0)

    @pytest.mark.parametrize("t", [0.3, 0.5, 1.0, 2.0, 4.0])
    def test_agrees_with_power_sum_analytic(self, t):
        """g(x) = x^t decides the power-sum family's Schur property."""
        got = sum_form_classify(lambda x, t=t: x**t, 500, seed=3)
        want = classify_analytic(AggregatorSpec(Family.POWER_SUM, t))
        assert got.classification is want.classification


class TestConstantSum:
    def test_linear_inner_constant(self):
        ok, dev = verify_constant_sum(AggregatorSpec(Family.POWER_SUM, 1.0), 2, 2, 1000)
        assert ok and dev < 1e-9

    def test_mean_inner_constant(self):
        ok, dev = verify_constant_sum(AggregatorSpec(Family.MEAN), 3, 2, 1000)
        assert ok and dev < 1e-9

    def test_square_inner_not_constant(self):
        """[[1,0],[0,1]] scores sum to 2 but the uniform matrix sums to 1."""
        ok, dev = verify_constant_sum(AggregatorSpec(Family.POWER_SUM, 2.0), 2, 2, 1000)
        assert not ok
        assert dev > 0.01
