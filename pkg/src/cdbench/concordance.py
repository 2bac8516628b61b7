"""Rank concordance across random seeds.

A *test* is one metric on one dataset. For each test, every seed produces a
ranking of the algorithms; Kendall's W measures how much those rankings
agree, and one minus the mean W across the whole test suite quantifies how
strongly randomness shuffles the leaderboard (lower = more trustworthy).

The head-to-head comparison of two result cubes (e.g. tuned vs default
hyperparameters) reduces each (algorithm, test) cell to its seed mean and
ranks the two contenders 1/2 on every cell.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import AlignmentError, UndefinedInputError, ValidationError
from .metrics import MetricId


class FailReason(enum.Enum):
    OOM = "oom"
    TIMEOUT = "timeout"
    CRASH = "crash"
    NONFINITE = "nonfinite"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


FAILED = FailReason  # alias for readability at call sites

Cell = float | FailReason


@dataclass(frozen=True)
class TestPoint:
    dataset: str
    metric: MetricId

    __test__ = False  # keep pytest from collecting this as a test class

    def __str__(self) -> str:
        return f"{self.dataset}/{self.metric.value}"


class ResultsCube:
    """Dense (algorithm, seed, test) tensor of performance values.

    Failed cells carry a :class:`FailReason`; non-finite values are coerced
    to ``nonfinite`` failures at construction. Instances are immutable.
    """

    def __init__(
        self,
        algorithms: Sequence[str],
        seeds: Sequence[int],
        tests: Sequence[TestPoint],
        cells: Mapping[tuple[str, int, TestPoint], Cell],
    ) -> None:
        self.algorithms = tuple(algorithms)
        self.seeds = tuple(int(s) for s in seeds)
        self.tests = tuple(tests)
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ValidationError("duplicate algorithm names in cube")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValidationError("duplicate seeds in cube")
        if len(set(self.tests)) != len(self.tests):
            raise ValidationError("duplicate tests in cube")
        values = np.full(
            (len(self.algorithms), len(self.seeds), len(self.tests)),
            np.nan,
            dtype=np.float64,
        )
        failures: dict[tuple[int, int, int], FailReason] = {}
        seen = 0
        for (alg, seed, test), cell in cells.items():
            try:
                i = self.algorithms.index(alg)
                j = self.seeds.index(int(seed))
                t = self.tests.index(test)
            except ValueError:
                raise ValidationError(
                    f"cell ({alg}, {seed}, {test}) outside the declared axes"
                ) from None
            seen += 1
            if isinstance(cell, FailReason):
                failures[(i, j, t)] = cell
            else:
                v = float(cell)
                if math.isfinite(v):
                    values[i, j, t] = v
                else:
                    failures[(i, j, t)] = FailReason.NONFINITE
        expected = values.size
        if seen != expected:
            raise ValidationError(
                f"cube must be dense: got {seen} cells, expected {expected}"
            )
        self.values = values
        self.values.setflags(write=False)
        self.failures = failures

    def cell(self, alg: str, seed: int, test: TestPoint) -> Cell:
        i = self.algorithms.index(alg)
        j = self.seeds.index(seed)
        t = self.tests.index(test)
        reason = self.failures.get((i, j, t))
        if reason is not None:
            return reason
        return float(self.values[i, j, t])

    def column(self, seed_idx: int, test_idx: int) -> list[Cell]:
        """Per-algorithm values for one (seed, test) slice."""
        out: list[Cell] = []
        for i in range(len(self.algorithms)):
            reason = self.failures.get((i, seed_idx, test_idx))
            out.append(reason if reason is not None else float(self.values[i, seed_idx, test_idx]))
        return out

    def same_axes(self, other: "ResultsCube") -> bool:
        return (
            self.algorithms == other.algorithms
            and self.seeds == other.seeds
            and self.tests == other.tests
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ResultsCube):
            return NotImplemented
        return (
            self.same_axes(other)
            and self.failures == other.failures
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return (
            f"ResultsCube(algorithms={len(self.algorithms)}, "
            f"seeds={len(self.seeds)}, tests={len(self.tests)}, "
            f"failures={len(self.failures)})"
        )


def rank_within_seed(values: Sequence[Cell | None], higher_is_better: bool) -> np.ndarray:
    """Average ranks with 1 = best; failed entries share the worst ranks.

    ``None``, non-finite floats and :class:`FailReason` all count as failed.
    """
    a = len(values)
    if a < 2:
        raise UndefinedInputError("ranking needs at least two algorithms")
    finite_idx = []
    failed_idx = []
    for i, v in enumerate(values):
        if v is None or isinstance(v, FailReason) or not math.isfinite(float(v)):
            failed_idx.append(i)
        else:
            finite_idx.append(i)
    ranks = np.zeros(a, dtype=np.float64)
    if failed_idx:
        worst = (len(finite_idx) + 1 + a) / 2.0
        for i in failed_idx:
            ranks[i] = worst
    if finite_idx:
        vals = np.array([float(values[i]) for i in finite_idx])
        order = np.argsort(-vals if higher_is_better else vals, kind="stable")
        sorted_vals = vals[order]
        pos = 0
        while pos < len(order):
            end = pos
            while end + 1 < len(order) and sorted_vals[end + 1] == sorted_vals[pos]:
                end += 1
            avg = (pos + 1 + end + 1) / 2.0
            for t in range(pos, end + 1):
                ranks[finite_idx[order[t]]] = avg
            pos = end + 1
    return ranks


def _tie_stats(row: np.ndarray) -> tuple[float, int]:
    """(sum of t^3 - t over tie groups, number of tied pairs) for one row."""
    _, counts = np.unique(row, return_counts=True)
    correction = float(((counts**3) - counts).sum())
    tied_pairs = int((counts * (counts - 1) // 2).sum())
    return correction, tied_pairs


def kendall_w(ranks: np.ndarray, tie_correction: bool = False) -> float:
    """Kendall's coefficient of concordance for an (n seeds, a algorithms)
    rank matrix, clamped to [0, 1].

    The plain form divides the sum of squared rank-total deviations S by
    n^2 (a^3 - a) / 12; the tie-corrected form subtracts the usual per-row
    tie term from the denominator.
    """
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.ndim != 2:
        raise ValidationError("rank matrix must be 2-d (seeds x algorithms)")
    n, a = ranks.shape
    if n < 2 or a < 2:
        raise UndefinedInputError("Kendall's W needs >= 2 seeds and >= 2 algorithms")
    totals = ranks.sum(axis=0)
    mean_total = n * (a + 1) / 2.0
    s = float(((totals - mean_total) ** 2).sum())
    denom = n * n * (a**3 - a)
    if tie_correction:
        denom -= n * sum(_tie_stats(row)[0] for row in ranks)
    if denom <= 0:
        return 0.0
    return min(max(12.0 * s / denom, 0.0), 1.0)


@dataclass(frozen=True)
class ConcordanceReport:
    """Per-test Kendall W plus the aggregate randomness coefficient."""

    per_test_w: dict[TestPoint, float]
    per_test_s: dict[TestPoint, float]
    w_randomness: float
    tie_fraction: float
    w_randomness_tie_corrected: float | None = None
    all_failed_rows: int = 0


def w_randomness_coefficient(
    cube: ResultsCube, tie_correction: bool = False
) -> ConcordanceReport:
    """One minus the mean per-test Kendall W across the suite.

    Lower means seeds agree on the leaderboard. When more than 10% of the
    within-seed comparisons are ties (common once failures share ranks), the
    tie-corrected aggregate is reported alongside the plain one.
    """
    if not cube.tests:
        raise UndefinedInputError("cannot rank an empty test suite")
    n, a = len(cube.seeds), len(cube.algorithms)
    if n < 2 or a < 2:
        raise UndefinedInputError("need >= 2 seeds and >= 2 algorithms")
    per_w: dict[TestPoint, float] = {}
    per_s: dict[TestPoint, float] = {}
    per_w_corrected: dict[TestPoint, float] = {}
    tied_pairs = 0
    total_pairs = 0
    all_failed_rows = 0
    for t, test in enumerate(cube.tests):
        rows = []
        for j in range(n):
            column = cube.column(j, t)
            if all(isinstance(v, FailReason) for v in column):
                all_failed_rows += 1
            row = rank_within_seed(column, test.metric.higher_is_better)
            correction, pairs = _tie_stats(row)
            tied_pairs += pairs
            total_pairs += a * (a - 1) // 2
            rows.append(row)
        matrix = np.vstack(rows)
        totals = matrix.sum(axis=0)
        per_s[test] = float(((totals - n * (a + 1) / 2.0) ** 2).sum())
        per_w[test] = kendall_w(matrix, tie_correction=tie_correction)
        per_w_corrected[test] = kendall_w(matrix, tie_correction=True)
    w_rand = 1.0 - float(np.mean(list(per_w.values())))
    tie_fraction = tied_pairs / total_pairs if total_pairs else 0.0
    corrected = None
    if tie_fraction > 0.10 and not tie_correction:
        corrected = 1.0 - float(np.mean(list(per_w_corrected.values())))
    return ConcordanceReport(
        per_test_w=per_w,
        per_test_s=per_s,
        w_randomness=min(max(w_rand, 0.0), 1.0),
        tie_fraction=tie_fraction,
        w_randomness_tie_corrected=corrected,
        all_failed_rows=all_failed_rows,
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Head-to-head mean ranks of two contender parameter regimes."""

    names: tuple[str, str]
    mean_rank: tuple[float, float]
    std_rank: tuple[float, float]
    assignments: dict[tuple[str, TestPoint], tuple[float, float]] = field(repr=False, default_factory=dict)


def _reduce_mean_over_seeds(cube: ResultsCube, alg_idx: int, test_idx: int) -> float | None:
    vals = cube.values[alg_idx, :, test_idx]
    ok = np.isfinite(vals)
    if not ok.any():
        return None
    return float(vals[ok].mean())


def framework_comparison_rank(
    cube_a: ResultsCube,
    cube_b: ResultsCube,
    reduce: str = "mean-over-seeds",
    names: tuple[str, str] = ("A", "B"),
) -> ComparisonReport:
    """Rank the two cubes 1/2 on every (algorithm, test) cell after reducing
    seeds to their mean; ties score 1.5 each, and a cell where only one side
    has any successful seed goes to that side. Mean ranks always sum to 3.
    """
    if reduce != "mean-over-seeds":
        raise ValidationError(f"unknown reduce rule {reduce!r}")
    if not cube_a.same_axes(cube_b):
        raise AlignmentError("cubes do not share algorithm/seed/test axes")
    ranks_a: list[float] = []
    ranks_b: list[float] = []
    assignments: dict[tuple[str, TestPoint], tuple[float, float]] = {}
    for t, test in enumerate(cube_a.tests):
        better_high = test.metric.higher_is_better
        for i, alg in enumerate(cube_a.algorithms):
            va = _reduce_mean_over_seeds(cube_a, i, t)
            vb = _reduce_mean_over_seeds(cube_b, i, t)
            if va is None and vb is None:
                ra, rb = 1.5, 1.5
            elif va is None:
                ra, rb = 2.0, 1.0
            elif vb is None:
                ra, rb = 1.0, 2.0
            elif va == vb:
                ra, rb = 1.5, 1.5
            elif (va > vb) == better_high:
                ra, rb = 1.0, 2.0
            else:
                ra, rb = 2.0, 1.0
            ranks_a.append(ra)
            ranks_b.append(rb)
            assignments[(alg, test)] = (ra, rb)
    if not ranks_a:
        raise UndefinedInputError("comparison over an empty test suite")
    arr_a = np.array(ranks_a)
    arr_b = np.array(ranks_b)
    return ComparisonReport(
        names=names,
        mean_rank=(float(arr_a.mean()), float(arr_b.mean())),
        std_rank=(float(arr_a.std()), float(arr_b.std())),
        assignments=assignments,
    )
