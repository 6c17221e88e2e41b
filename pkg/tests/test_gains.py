"""Gain computation: closed forms, brute force, optimizer, constructions."""

import math

import numpy as np
import pytest

from hetgain.aggregators import AggregatorSpec, Family
from hetgain.errors import DomainError, SizeGuardError
from hetgain.gains import (
    CONTINUOUS,
    DISCRETE,
    AllocationMatrix,
    RewardStructure,
    aggregate_reward,
    blotto_gain,
    blotto_task_score,
    brute_force_gain_discrete,
    closed_form_gain,
    construct_het_from_hom,
    hom_optimum_is_trivial,
    lbf_gain,
    make_adversary,
    optimize_gain_continuous,
    sigma,
    softmax_gain_bound,
)

MIN, MEAN, MAX = Family.MIN, Family.MEAN, Family.MAX
PLAIN = ("min", "mean", "max")


def structure(u, t, n, m, tu=0.0, tt=0.0):
    return RewardStructure(AggregatorSpec(u, tu), AggregatorSpec(t, tt), n, m)


class TestAggregateReward:
    def test_min_max_covered(self):
        assert aggregate_reward(structure(MIN, MAX, 2, 2), [[1, 0], [0, 1]]) == 1.0

    def test_min_max_uncovered(self):
        assert aggregate_reward(structure(MIN, MAX, 2, 2), [[1, 0], [1, 0]]) == 0.0

    def test_mean_mean_is_constant(self):
        rng = np.random.default_rng(0)
        st = structure(MEAN, MEAN, 2, 2)
        for _ in range(20):
            a = rng.dirichlet(np.ones(2), size=2)
            assert aggregate_reward(st, a) == pytest.approx(0.5, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            aggregate_reward(structure(MIN, MAX, 3, 2), [[1, 0], [0, 1]])

    def test_inadmissible_matrix(self):
        with pytest.raises(DomainError):
            AllocationMatrix(np.array([[0.7, 0.7], [0.5, 0.5]]), CONTINUOUS)
        with pytest.raises(DomainError):
            AllocationMatrix(np.array([[1.0, 1.0], [0.0, 1.0]]), DISCRETE)


class TestClosedForm:
    def test_continuous_table(self):
        for m in (2, 3, 5):
            for u in PLAIN:
                for t in PLAIN:
                    want = (m - 1) / m if (u, t) in (("min", "max"), ("mean", "max")) else 0.0
                    assert closed_form_gain(u, t, CONTINUOUS, 3, m) == want

    def test_discrete_values(self):
        assert closed_form_gain("min", "max", CONTINUOUS, 2, 2) == 0.5
        assert closed_form_gain("min", "mean", DISCRETE, 4, 4) == 0.25
        assert closed_form_gain("max", "max", DISCRETE, 8, 8) == 0.0
        assert closed_form_gain("min", "mean", DISCRETE, 11, 2) == pytest.approx(
            5 / 11, abs=1e-15
        )
        assert closed_form_gain("min", "max", DISCRETE, 2, 5) == 0.0
        assert closed_form_gain("mean", "max", DISCRETE, 3, 2) == 0.5

    def test_unknown_name(self):
        with pytest.raises(DomainError):
            closed_form_gain("median", "max", DISCRETE, 2, 2)


class TestBruteForce:
    def test_appendix_values(self):
        assert brute_force_gain_discrete(structure(MIN, MAX, 2, 2)).delta_r_bruteforce == 1.0
        assert brute_force_gain_discrete(structure(MEAN, MAX, 2, 2)).delta_r_bruteforce == 0.5
        assert brute_force_gain_discrete(structure(MIN, MEAN, 8, 8)).delta_r_bruteforce == 0.125

    @pytest.mark.parametrize("n,m", [(2, 2), (4, 4), (3, 2), (2, 3), (11, 2)])
    def test_matches_closed_form_everywhere(self, n, m):
        for u in PLAIN:
            for t in PLAIN:
                got = brute_force_gain_discrete(
                    structure(Family(u), Family(t), n, m)
                ).delta_r_bruteforce
                want = closed_form_gain(u, t, DISCRETE, n, m)
                assert got == pytest.approx(want, abs=1e-12), (u, t, n, m)

    def test_size_guard(self):
        with pytest.raises(SizeGuardError):
            brute_force_gain_discrete(structure(MIN, MAX, 600, 12))

    def test_het_argmax_is_admissible_onehot(self):
        rep = brute_force_gain_discrete(structure(MIN, MEAN, 4, 4))
        assert rep.het_argmax.mode == DISCRETE
        assert rep.het_argmax.values.sum() == 4


class TestOptimizer:
    def test_min_max_2x2(self):
        rep = optimize_gain_continuous(structure(MIN, MAX, 2, 2), restarts=8)
        assert rep.delta_r_optimized == pytest.approx(0.5, abs=1e-3)

    def test_max_min_2x2_zero(self):
        rep = optimize_gain_continuous(structure(MAX, MIN, 2, 2), restarts=8)
        assert abs(rep.delta_r_optimized) <= 1e-3

    def test_containment_r_het_at_least_r_hom(self):
        rng = np.random.default_rng(4)
        fams = [
            AggregatorSpec(Family.SOFTMAX, rng.uniform(-3, 3)),
            AggregatorSpec(Family.POWER_SUM, rng.uniform(0.3, 3)),
            AggregatorSpec(MEAN),
        ]
        for u in fams:
            for t in fams:
                rep = optimize_gain_continuous(
                    RewardStructure(u, t, 2, 2), restarts=4, max_iters=300
                )
                assert rep.r_het + 1e-9 >= rep.r_hom

    def test_mean_powersum2_gain_is_zero(self):
        """A one-hot homogeneous allocation already attains the separable
        optimum N/M here, so the gain vanishes (the trivial-optimum case)."""
        rep = optimize_gain_continuous(
            structure(MEAN, Family.POWER_SUM, 2, 2, tt=2.0), restarts=8
        )
        assert hom_optimum_is_trivial(rep.hom_argmax)
        assert rep.r_hom == pytest.approx(1.0, abs=1e-6)
        assert abs(rep.delta_r_optimized) <= 1e-6

    def test_report_delta_consistency(self):
        rep = optimize_gain_continuous(structure(MIN, MAX, 2, 2), restarts=4)
        assert rep.delta_r_optimized == pytest.approx(rep.r_het - rep.r_hom, abs=1e-12)

    def test_json_fields(self):
        rep = optimize_gain_continuous(structure(MIN, MAX, 2, 2), restarts=2)
        payload = rep.to_json_dict()
        for key in (
            "delta_r_theory",
            "delta_r_bruteforce",
            "delta_r_optimized",
            "r_hom",
            "r_het",
            "seeds",
            "method",
            "iterations",
        ):
            assert key in payload


class TestConstructHetFromHom:
    def test_even_split(self):
        np.testing.assert_allclose(
            construct_het_from_hom([0.5, 0.5], 2), [[1, 0], [0, 1]]
        )

    def test_fractional_packing(self):
        np.testing.assert_allclose(
            construct_het_from_hom([0.75, 0.25], 2), [[1, 0], [0.5, 0.5]]
        )

    def test_trivial_input(self):
        np.testing.assert_allclose(
            construct_het_from_hom([1.0, 0.0], 3), [[1, 0], [1, 0], [1, 0]]
        )

    def test_column_sums_and_rows(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            m = int(rng.integers(2, 5))
            n = int(rng.integers(2, 7))
            c = rng.dirichlet(np.ones(m))
            a = construct_het_from_hom(c, n)
            assert a.shape == (n, m)
            np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-9)
            np.testing.assert_allclose(a.sum(axis=0), n * c, atol=1e-9)
            assert np.all(a >= -1e-12)

    def test_strictly_improves_for_convex_inner(self):
        """With a strictly Schur-convex inner aggregator, heterogenizing a
        non-trivial shared allocation strictly beats it."""
        rng = np.random.default_rng(3)
        st = structure(MEAN, Family.POWER_SUM, 3, 2, tt=2.0)
        for _ in range(50):
            c = rng.dirichlet(np.ones(2))
            if c.max() > 0.95:
                continue
            hom = np.repeat(c[None, :], 3, axis=0)
            het = construct_het_from_hom(c, 3)
            assert aggregate_reward(st, het) > aggregate_reward(st, hom) + 1e-9


class TestSoftmaxBound:
    def test_nonpositive_t_exact_zero(self):
        out = softmax_gain_bound(-1.0, 3.0, 4)
        assert out == {"regime": "exact", "bound": 0.0}

    def test_negative_tau_bound(self):
        out = softmax_gain_bound(math.log(3.0), -2.0, 2)
        assert out["bound"] == pytest.approx(0.25, abs=1e-12)

    def test_equal_temperatures(self):
        assert softmax_gain_bound(2.0, 2.0, 2)["bound"] == 0.0

    def test_sigma_values(self):
        assert sigma(0.0, 4) == pytest.approx(0.25, abs=1e-15)
        assert sigma(math.log(3.0), 2) == pytest.approx(0.75, abs=1e-12)
        assert sigma(100.0, 5) == pytest.approx(1.0, abs=1e-12)

    def test_boundary_consistency_at_tau_zero(self):
        for t in (0.5, 1.0, 3.0):
            low = softmax_gain_bound(t, -1e-12, 2)["bound"]
            high = softmax_gain_bound(t, 1e-12, 2)["bound"]
            assert low == pytest.approx(high, abs=1e-9)


class TestBlotto:
    def test_certain_win(self):
        assert blotto_task_score(0.9, np.full(100, 0.5), 1.0) == 1.0

    def test_half_win(self):
        samples = np.array([0.4, 0.6] * 50)
        assert blotto_task_score(0.5, samples, 2.0) == 1.0

    def test_zero_force_never_wins(self):
        samples = np.abs(np.random.default_rng(0).normal(size=50))
        assert blotto_task_score(0.0, samples, 1.0) == 0.0

    def test_empty_samples(self):
        with pytest.raises(DomainError):
            blotto_task_score(0.5, [], 1.0)

    def test_deterministic_adversary_zero_gain(self):
        samples = make_adversary([0.6, 0.4], 2, 1)
        rep = blotto_gain(2, 2, samples)
        assert rep.delta_r_optimized == 0.0
        assert abs(rep.r_het - rep.r_hom) <= 1e-12

    def test_uniform_adversary_zero_gain(self):
        samples = make_adversary("uniform", 2, 500, seed=7)
        rep = blotto_gain(3, 2, samples, n_random_probes=100)
        assert abs(rep.delta_r_optimized) <= 1e-2

    def test_single_agent(self):
        samples = make_adversary([0.5, 0.5], 2, 1)
        rep = blotto_gain(1, 2, samples)
        assert rep.delta_r_optimized == 0.0


class TestLbf:
    def test_level_one(self):
        assert lbf_gain(3, 2, 1) == 0.5

    def test_bundled_levels(self):
        assert lbf_gain(4, 3, 2) == pytest.approx(1 / 3, abs=1e-15)

    def test_single_agent_zero(self):
        assert lbf_gain(1, 5, 1) == 0.0

    def test_divisibility_error(self):
        with pytest.raises(DomainError):
            lbf_gain(5, 2, 2)

    @pytest.mark.parametrize("n,m", [(2, 2), (3, 2), (4, 3)])
    def test_matches_brute_force_at_level_one(self, n, m):
        """Level-1 items reduce to the (mean, max) discrete structure."""
        got = brute_force_gain_discrete(structure(MEAN, MAX, n, m)).delta_r_bruteforce
        assert got == pytest.approx(lbf_gain(n, m, 1), abs=1e-12)
