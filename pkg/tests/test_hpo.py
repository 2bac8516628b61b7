from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdbench.errors import BudgetError, ConfigError, SelectionError, ValidationError
from cdbench.hpo import (
    COMPLETE,
    SearchSpace,
    StudyState,
    TpeConfig,
    Trial,
    TrialFailed,
    categorical,
    history_to_jsonl,
    int_uniform,
    log_uniform,
    nondominated_split,
    run_study,
    select_best,
    suggest,
    uniform,
)


def trial(index, params, objectives, status=COMPLETE):
    return Trial(index=index, params=params, objectives=objectives, status=status, seed=0)


class TestSearchSpace:
    def test_unique_names(self):
        with pytest.raises(ConfigError):
            SearchSpace([uniform("x", 0, 1), uniform("x", 1, 2)])

    def test_unknown_parent(self):
        with pytest.raises(ConfigError):
            SearchSpace([uniform("x", 0, 1, parent=("nope", 1))])

    def test_cycle_detection(self):
        with pytest.raises(ConfigError):
            SearchSpace(
                [
                    categorical("a", [0, 1], parent=("b", 0)),
                    categorical("b", [0, 1], parent=("a", 0)),
                ]
            )

    def test_empty_categorical(self):
        with pytest.raises(ConfigError):
            categorical("c", [])

    def test_log_uniform_positive(self):
        with pytest.raises(ConfigError):
            log_uniform("lr", 0.0, 1.0)

    def test_conditional_sampling(self):
        space = SearchSpace(
            [
                categorical("model", ["a", "b"]),
                uniform("alpha", 0, 1, parent=("model", "a")),
            ]
        )
        rng = np.random.Generator(np.random.PCG64(0))
        seen_with = seen_without = False
        for _ in range(50):
            params = space.sample_uniform(rng)
            if params["model"] == "a":
                assert "alpha" in params
                seen_with = True
            else:
                assert "alpha" not in params
                seen_without = True
        assert seen_with and seen_without

    def test_validate_params(self):
        space = SearchSpace([int_uniform("n", 1, 5)])
        space.validate_params({"n": 3})
        with pytest.raises(ValidationError):
            space.validate_params({"n": 9})
        with pytest.raises(ValidationError):
            space.validate_params({"n": 3, "extra": 1})
        with pytest.raises(ValidationError):
            space.validate_params({})


SPACES = st.sampled_from(
    [
        SearchSpace([uniform("x", -1, 1), uniform("y", 0, 5)]),
        SearchSpace([log_uniform("lr", 1e-4, 1.0), int_uniform("n", 1, 16)]),
        SearchSpace(
            [
                categorical("kind", ["p", "q"]),
                uniform("depth", 0, 2, parent=("kind", "p")),
                categorical("width", [1, 2, 4], parent=("kind", "q")),
            ]
        ),
        SearchSpace([]),
    ]
)


class TestSuggest:
    def test_startup_uniform_in_domain(self):
        space = SearchSpace([uniform("x", 2.0, 3.0)])
        state = StudyState(max_trials=10, seed=1)
        params = suggest(state, space)
        assert 2.0 <= params["x"] <= 3.0

    def test_budget_exhausted(self):
        space = SearchSpace([uniform("x", 0, 1)])
        state = StudyState(max_trials=1, seed=1)
        state.record({"x": 0.5}, (1.0,), COMPLETE)
        with pytest.raises(BudgetError):
            suggest(state, space)

    def test_degenerate_history_falls_back_to_uniform(self):
        space = SearchSpace([uniform("x", 0, 1)])
        state = StudyState(max_trials=100, seed=1)
        for i in range(20):
            state.record({"x": i / 20}, (0.5,), COMPLETE)
        params = suggest(state, space)
        assert 0.0 <= params["x"] <= 1.0

    @given(space=SPACES, seed=st.integers(0, 2**20))
    @settings(max_examples=40, deadline=None)
    def test_suggestions_respect_space(self, space, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        state = StudyState(max_trials=1000, seed=seed, tpe=TpeConfig(n_startup=5))
        for i in range(25):
            params = suggest(state, space)
            space.validate_params(params)
            state.record(params, tuple(rng.random(2)), COMPLETE)

    def test_good_category_oversampled(self):
        space = SearchSpace([categorical("lr", [0.1, 0.01, 0.001, 0.0001])])
        state = StudyState(max_trials=10_000, seed=3, tpe=TpeConfig(n_startup=4))
        # 20 trials: lr=0.01 always good, everything else bad
        for i in range(20):
            lr = 0.01 if i % 4 == 1 else [0.1, 0.001, 0.0001][i % 3]
            state.record({"lr": lr}, (1.0 if lr == 0.01 else 0.0,), COMPLETE)
        hits = 0
        draws = 1000
        for _ in range(draws):
            if suggest(state, space)["lr"] == 0.01:
                hits += 1
        assert hits / draws > 0.25  # strictly above the uniform prior rate

    def test_conditional_only_when_parent_matches(self):
        space = SearchSpace(
            [
                categorical("kind", ["p", "q"]),
                uniform("alpha", 0, 1, parent=("kind", "p")),
            ]
        )
        state = StudyState(max_trials=10_000, seed=5, tpe=TpeConfig(n_startup=4))
        rng = np.random.Generator(np.random.PCG64(0))
        for i in range(30):
            params = space.sample_uniform(rng)
            score = params.get("alpha", 0.3) + (0.1 if params["kind"] == "p" else 0.0)
            state.record(params, (float(score),), COMPLETE)
        for _ in range(100):
            params = suggest(state, space)
            if params["kind"] == "p":
                assert "alpha" in params
            else:
                assert "alpha" not in params


class TestNondominatedSplit:
    def test_single_objective_top1(self):
        trials = [
            trial(0, {"x": 0}, (3.0,)),
            trial(1, {"x": 1}, (1.0,)),
            trial(2, {"x": 2}, (2.0,)),
        ]
        split = nondominated_split(trials, 0.34)
        assert split.good == {0}
        assert split.bad == {1, 2}

    def test_two_objectives_first_front(self):
        trials = [
            trial(0, {}, (1.0, 0.0)),
            trial(1, {}, (0.0, 1.0)),
            trial(2, {}, (0.0, 0.0)),
        ]
        split = nondominated_split(trials, 0.67)
        assert split.good == {0, 1}
        assert split.bad == {2}

    def test_gamma_out_of_range(self):
        with pytest.raises(ConfigError):
            nondominated_split([trial(0, {}, (1.0,))], 1.5)

    def test_no_complete_trials(self):
        with pytest.raises(ValidationError):
            nondominated_split([trial(0, {}, None, status="failed")], 0.5)

    def test_dominance_scan_random(self):
        rng = np.random.Generator(np.random.PCG64(8))
        for _ in range(20):
            trials = [
                trial(i, {}, tuple(np.round(rng.random(2), 2)))
                for i in range(int(rng.integers(5, 100)))
            ]
            split = nondominated_split(trials, 0.25)
            for b in split.bad:
                for g in split.good:
                    if g in split.tie_break:
                        continue
                    b_obj, g_obj = trials[b].objectives, trials[g].objectives
                    dominates = all(x >= y for x, y in zip(b_obj, g_obj)) and any(
                        x > y for x, y in zip(b_obj, g_obj)
                    )
                    assert not dominates, (b_obj, g_obj)

    def test_failed_trials_excluded(self):
        trials = [
            trial(0, {}, (1.0,)),
            trial(1, {}, None, status="failed"),
            trial(2, {}, (0.5,)),
        ]
        split = nondominated_split(trials, 0.5)
        assert 1 not in split.good | split.bad


class TestRunStudy:
    def test_zero_budget(self):
        state = run_study(lambda p: (1.0,), SearchSpace([uniform("x", 0, 1)]), 0, seed=1)
        assert state.history == []

    def test_deterministic_histories(self):
        space = SearchSpace([uniform("x", -2, 2), uniform("y", -2, 2)])

        def objective(p):
            return (-(p["x"] ** 2) - p["y"] ** 2,)

        s1 = run_study(objective, space, 100, seed=42)
        s2 = run_study(objective, space, 100, seed=42)
        assert history_to_jsonl(s1) == history_to_jsonl(s2)
        assert len(s1.history) == 100

    def test_failures_recorded_and_continue(self):
        space = SearchSpace([uniform("x", 0, 1)])
        calls = []

        def objective(p):
            calls.append(p)
            if len(calls) % 3 == 0:
                raise TrialFailed("boom")
            return (p["x"],)

        state = run_study(objective, space, 30, seed=9)
        assert len(state.history) == 30
        assert sum(1 for t in state.history if t.status == "failed") == 10

    def test_nonfinite_objectives_fail_trial(self):
        space = SearchSpace([uniform("x", 0, 1)])
        state = run_study(lambda p: (float("nan"),), space, 5, seed=2)
        assert all(t.status == "failed" for t in state.history)


class TestSelectBest:
    def test_single_trial(self):
        state = StudyState(max_trials=5, seed=1)
        state.record({"x": 1}, (0.5,), COMPLETE)
        assert select_best(state, 0) == {"x": 1}

    def test_highest_wins(self):
        state = StudyState(max_trials=5, seed=1)
        state.record({"x": 1}, (0.4,), COMPLETE)
        state.record({"x": 2}, (0.9,), COMPLETE)
        assert select_best(state, 0) == {"x": 2}

    def test_tie_earliest_wins(self):
        state = StudyState(max_trials=5, seed=1)
        state.record({"x": 1}, (0.9,), COMPLETE)
        state.record({"x": 2}, (0.9,), COMPLETE)
        assert select_best(state, 0) == {"x": 1}

    def test_no_complete(self):
        state = StudyState(max_trials=5, seed=1)
        with pytest.raises(SelectionError):
            select_best(state, 0)

    def test_per_objective_selection(self):
        state = StudyState(max_trials=5, seed=1)
        state.record({"x": 1}, (0.9, 0.1), COMPLETE)
        state.record({"x": 2}, (0.1, 0.9), COMPLETE)
        assert select_best(state, 0) == {"x": 1}
        assert select_best(state, 1) == {"x": 2}


def bandit_objective(table):
    def objective(params):
        return (sum(table[name][params[name]] for name in table),)

    return objective


def make_bandit(seed):
    """Additive categorical bandit with a decoy arm close to the best in
    every dimension; the summed structure is what a per-dimension density
    model can exploit and pure uniform sampling cannot."""
    rng = np.random.Generator(np.random.PCG64(seed))
    table = {}
    for d in range(4):
        arms = {}
        for a in range(6):
            arms[f"a{a}"] = float(np.round(rng.uniform(0.0, 0.4), 3))
        arms["good"] = 1.0
        arms["decoy"] = 0.8
        table[f"dim{d}"] = arms
    space = SearchSpace(
        [categorical(f"dim{d}", sorted(table[f"dim{d}"])) for d in range(4)]
    )
    return table, space


def best_found(state):
    return max(t.objectives[0] for t in state.completed())


def random_search(objective, space, budget, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    best = -math.inf
    for _ in range(budget):
        best = max(best, objective(space.sample_uniform(rng))[0])
    return best


class TestOptimizerQuality:
    def test_tpe_beats_random_on_bandit(self):
        table, space = make_bandit(606)
        objective = bandit_objective(table)
        tpe_scores, random_scores = [], []
        for rep in range(20):
            state = run_study(objective, space, 100, seed=rep)
            tpe_scores.append(best_found(state))
            random_scores.append(random_search(objective, space, 100, seed=10_000 + rep))
        assert float(np.median(tpe_scores)) > float(np.median(random_scores))

    def test_sphere_converges(self):
        space = SearchSpace([uniform("x", -5, 5), uniform("y", -5, 5)])

        def objective(p):
            return (-(p["x"] ** 2 + p["y"] ** 2),)

        gaps = []
        for rep in range(20):
            state = run_study(objective, space, 100, seed=rep)
            gaps.append(-best_found(state))
        assert float(np.median(gaps)) < 0.05
