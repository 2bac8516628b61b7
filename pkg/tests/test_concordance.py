from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdbench.concordance import (
    FailReason,
    ResultsCube,
    TestPoint,
    framework_comparison_rank,
    kendall_w,
    rank_within_seed,
    w_randomness_coefficient,
)
from cdbench.errors import AlignmentError, UndefinedInputError, ValidationError
from cdbench.metrics import MetricId

from oracles import naive_rank, naive_w_randomness


def make_cube(algorithms, seeds, tests, values):
    """values[(alg, seed, test)] = float or FailReason or None (failed)."""
    cells = {}
    for key, v in values.items():
        cells[key] = FailReason.CRASH if v is None else v
    return ResultsCube(algorithms, seeds, tests, cells)


def random_cube(rng, a, n, t):
    algorithms = [f"alg{i}" for i in range(a)]
    seeds = [int(s) for s in rng.integers(0, 10_000, size=n)]
    while len(set(seeds)) != n:
        seeds = [int(s) for s in rng.integers(0, 10_000, size=n)]
    metrics = list(MetricId)
    tests = []
    for i in range(t):
        tests.append(TestPoint(f"ds{i // len(metrics)}", metrics[i % len(metrics)]))
    cells = {}
    for alg in algorithms:
        for seed in seeds:
            for test in tests:
                r = rng.random()
                if r < 0.08:
                    cells[(alg, seed, test)] = FailReason.OOM
                elif r < 0.12:
                    # duplicate values force ties
                    cells[(alg, seed, test)] = 0.5
                else:
                    cells[(alg, seed, test)] = float(np.round(rng.random(), 3))
    return ResultsCube(algorithms, seeds, tests, cells)


class TestRankWithinSeed:
    def test_plain(self):
        assert rank_within_seed([0.9, 0.5, 0.7], True).tolist() == [1, 3, 2]

    def test_ties(self):
        assert rank_within_seed([0.9, 0.9, 0.1], True).tolist() == [1.5, 1.5, 3]

    def test_failed_lower_better(self):
        ranks = rank_within_seed([0.2, FailReason.OOM, 0.3], False)
        assert ranks.tolist() == [1, 3, 2]

    def test_all_failed(self):
        ranks = rank_within_seed([FailReason.CRASH] * 4, True)
        assert ranks.tolist() == [2.5] * 4

    def test_multiple_failed_share_worst(self):
        ranks = rank_within_seed([0.5, None, None], True)
        assert ranks.tolist() == [1, 2.5, 2.5]

    def test_nonfinite_treated_as_failed(self):
        ranks = rank_within_seed([0.5, float("nan"), 0.1], True)
        assert ranks.tolist() == [1, 3, 2]

    def test_single_algorithm_undefined(self):
        with pytest.raises(UndefinedInputError):
            rank_within_seed([0.5], True)

    @given(seed=st.integers(0, 2**20))
    @settings(max_examples=50, deadline=None)
    def test_matches_counting_oracle(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        a = int(rng.integers(2, 8))
        values = []
        for _ in range(a):
            r = rng.random()
            if r < 0.2:
                values.append(None)
            else:
                values.append(float(np.round(rng.random(), 1)))
        higher = bool(rng.random() < 0.5)
        ours = rank_within_seed(values, higher)
        oracle = naive_rank(values, higher)
        assert np.allclose(ours, oracle, atol=1e-12)


class TestKendallW:
    def test_perfect_agreement_hand_computed(self):
        # totals (2, 4, 6), S = 8, W = 12*8 / (4 * 24) = 96/96
        ranks = np.array([[1, 2, 3], [1, 2, 3]], dtype=float)
        assert kendall_w(ranks) == 1.0

    def test_perfect_disagreement(self):
        ranks = np.array([[1, 2, 3], [3, 2, 1]], dtype=float)
        assert kendall_w(ranks) == 0.0

    def test_three_seeds_agreement(self):
        ranks = np.array([[2, 1, 3]] * 3, dtype=float)
        assert kendall_w(ranks) == 1.0

    def test_undefined(self):
        with pytest.raises(UndefinedInputError):
            kendall_w(np.array([[1.0, 2.0]]))
        with pytest.raises(UndefinedInputError):
            kendall_w(np.array([[1.0], [1.0]]))

    def test_column_permutation_invariance(self):
        rng = np.random.Generator(np.random.PCG64(3))
        for _ in range(20):
            n, a = int(rng.integers(2, 6)), int(rng.integers(2, 7))
            ranks = np.vstack([
                rank_within_seed(list(rng.random(a)), True) for _ in range(n)
            ])
            perm = rng.permutation(a)
            assert kendall_w(ranks) == pytest.approx(kendall_w(ranks[:, perm]), abs=1e-12)

    def test_duplicated_seed_rows_invariance(self):
        rng = np.random.Generator(np.random.PCG64(4))
        ranks = np.vstack([rank_within_seed(list(rng.random(5)), True) for _ in range(3)])
        doubled = np.vstack([ranks, ranks])
        assert kendall_w(ranks) == pytest.approx(kendall_w(doubled), abs=1e-12)

    def test_tie_correction_raises_w(self):
        ranks = np.array([[1.5, 1.5, 3], [1.5, 1.5, 3]], dtype=float)
        assert kendall_w(ranks, tie_correction=True) >= kendall_w(ranks)


class TestWRandomness:
    def test_identical_rankings_zero(self):
        tests = [TestPoint("d", MetricId.F1), TestPoint("d", MetricId.NMI)]
        values = {}
        for test in tests:
            for seed in (1, 2, 3):
                for i, alg in enumerate(("a", "b", "c")):
                    values[(alg, seed, test)] = float(i)
        cube = make_cube(["a", "b", "c"], [1, 2, 3], tests, values)
        report = w_randomness_coefficient(cube)
        assert report.w_randomness == 0.0

    def test_reversed_rankings_one(self):
        tests = [TestPoint("d", MetricId.F1)]
        values = {}
        for i, alg in enumerate(("a", "b", "c")):
            values[(alg, 1, tests[0])] = float(i)
            values[(alg, 2, tests[0])] = float(-i)
        cube = make_cube(["a", "b", "c"], [1, 2], tests, values)
        assert w_randomness_coefficient(cube).w_randomness == 1.0

    def test_half_and_half(self):
        t1 = TestPoint("d1", MetricId.F1)
        t2 = TestPoint("d2", MetricId.F1)
        values = {}
        for i, alg in enumerate(("a", "b", "c")):
            # t1: same ranking both seeds (W=1)
            values[(alg, 1, t1)] = float(i)
            values[(alg, 2, t1)] = float(i)
            # t2: reversed between seeds (W=0)
            values[(alg, 1, t2)] = float(i)
            values[(alg, 2, t2)] = float(-i)
        cube = make_cube(["a", "b", "c"], [1, 2], [t1, t2], values)
        assert w_randomness_coefficient(cube).w_randomness == pytest.approx(0.5)

    def test_empty_suite(self):
        with pytest.raises((UndefinedInputError, ValidationError)):
            cube = ResultsCube(["a", "b"], [1, 2], [], {})
            w_randomness_coefficient(cube)

    def test_oracle_equivalence_200_random_cubes(self):
        rng = np.random.Generator(np.random.PCG64(2024))
        for _ in range(200):
            a = int(rng.integers(2, 7))
            n = int(rng.integers(2, 11))
            t = int(rng.integers(1, 9))
            cube = random_cube(rng, a, n, t)
            report = w_randomness_coefficient(cube)
            flat = {}
            for alg in cube.algorithms:
                for seed in cube.seeds:
                    for test in cube.tests:
                        cell = cube.cell(alg, seed, test)
                        flat[(alg, seed, (test.dataset, test.metric.value))] = (
                            None if isinstance(cell, FailReason) else cell
                        )
            oracle = naive_w_randomness(
                flat,
                list(cube.algorithms),
                list(cube.seeds),
                [(t_.dataset, t_.metric.value) for t_ in cube.tests],
                {"conductance"},
            )
            assert report.w_randomness == pytest.approx(oracle, abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.Generator(np.random.PCG64(11))
        tests = [TestPoint("d", MetricId.F1)]
        v1, v2 = {}, {}
        for alg in ("a", "b", "c", "d"):
            for seed in (1, 2, 3):
                x = float(rng.random())
                v1[(alg, seed, tests[0])] = x
                v2[(alg, seed, tests[0])] = float(np.exp(3 * x) + 1)
        c1 = make_cube(list("abcd"), [1, 2, 3], tests, v1)
        c2 = make_cube(list("abcd"), [1, 2, 3], tests, v2)
        r1 = w_randomness_coefficient(c1)
        r2 = w_randomness_coefficient(c2)
        assert r1.w_randomness == pytest.approx(r2.w_randomness, abs=1e-12)


class TestFrameworkComparisonRank:
    def _pair(self, rng, shift=0.0):
        tests = [TestPoint("d", m) for m in MetricId]
        algs = ["a", "b"]
        seeds = [1, 2]
        va, vb = {}, {}
        for alg in algs:
            for seed in seeds:
                for test in tests:
                    base = float(rng.random())
                    va[(alg, seed, test)] = base
                    vb[(alg, seed, test)] = base + shift
        return (
            make_cube(algs, seeds, tests, va),
            make_cube(algs, seeds, tests, vb),
        )

    def test_a_wins_everywhere(self):
        rng = np.random.Generator(np.random.PCG64(1))
        tests = [TestPoint("d", MetricId.F1), TestPoint("d", MetricId.NMI)]
        va, vb = {}, {}
        for alg in ("x", "y"):
            for seed in (1, 2):
                for test in tests:
                    va[(alg, seed, test)] = 0.9
                    vb[(alg, seed, test)] = 0.1
        ca = make_cube(["x", "y"], [1, 2], tests, va)
        cb = make_cube(["x", "y"], [1, 2], tests, vb)
        report = framework_comparison_rank(ca, cb)
        assert report.mean_rank == (1.0, 2.0)

    def test_orientation_aware(self):
        tests = [TestPoint("d", MetricId.CONDUCTANCE)]
        va = {("x", 1, tests[0]): 0.9, ("y", 1, tests[0]): 0.9}
        vb = {("x", 1, tests[0]): 0.1, ("y", 1, tests[0]): 0.1}
        ca = make_cube(["x", "y"], [1], tests, va)
        cb = make_cube(["x", "y"], [1], tests, vb)
        report = framework_comparison_rank(ca, cb)
        # lower conductance is better, so B wins
        assert report.mean_rank == (2.0, 1.0)

    def test_all_ties(self):
        rng = np.random.Generator(np.random.PCG64(2))
        ca, cb = self._pair(rng, shift=0.0)
        report = framework_comparison_rank(ca, cb)
        assert report.mean_rank == (1.5, 1.5)

    def test_means_sum_to_three_random(self):
        rng = np.random.Generator(np.random.PCG64(17))
        for _ in range(50):
            a = int(rng.integers(2, 6))
            n = int(rng.integers(2, 6))
            t = int(rng.integers(1, 8))
            ca = random_cube(rng, a, n, t)
            cb = ResultsCube(
                ca.algorithms,
                ca.seeds,
                ca.tests,
                {
                    (alg, seed, test): (
                        ca.cell(alg, seed, test)
                        if not isinstance(ca.cell(alg, seed, test), FailReason)
                        else FailReason.CRASH
                    )
                    if rng.random() < 0.5
                    else float(rng.random())
                    for alg in ca.algorithms
                    for seed in ca.seeds
                    for test in ca.tests
                },
            )
            report = framework_comparison_rank(ca, cb)
            assert report.mean_rank[0] + report.mean_rank[1] == pytest.approx(3.0, abs=1e-12)

    def test_axis_mismatch(self):
        rng = np.random.Generator(np.random.PCG64(3))
        ca = random_cube(rng, 2, 2, 2)
        cb = random_cube(rng, 3, 2, 2)
        with pytest.raises(AlignmentError):
            framework_comparison_rank(ca, cb)

    def test_all_failed_side_loses(self):
        tests = [TestPoint("d", MetricId.F1)]
        va = {("x", 1, tests[0]): 0.2, ("y", 1, tests[0]): 0.3}
        vb = {("x", 1, tests[0]): FailReason.OOM, ("y", 1, tests[0]): 0.9}
        ca = make_cube(["x", "y"], [1], tests, va)
        cb = make_cube(["x", "y"], [1], tests, vb)
        report = framework_comparison_rank(ca, cb)
        # x: A wins (B failed); y: B wins
        assert report.assignments[("x", tests[0])] == (1.0, 2.0)
        assert report.assignments[("y", tests[0])] == (2.0, 1.0)


class TestCubeValidation:
    def test_dense_required(self):
        tests = [TestPoint("d", MetricId.F1)]
        with pytest.raises(ValidationError):
            ResultsCube(["a", "b"], [1], tests, {("a", 1, tests[0]): 0.5})

    def test_unknown_cell_rejected(self):
        tests = [TestPoint("d", MetricId.F1)]
        with pytest.raises(ValidationError):
            ResultsCube(
                ["a"], [1], tests,
                {("a", 1, tests[0]): 0.5, ("zz", 1, tests[0]): 0.1},
            )

    def test_nonfinite_becomes_failure(self):
        tests = [TestPoint("d", MetricId.F1)]
        cube = ResultsCube(
            ["a", "b"], [1], tests,
            {("a", 1, tests[0]): float("inf"), ("b", 1, tests[0]): 0.5},
        )
        assert cube.cell("a", 1, tests[0]) == FailReason.NONFINITE
