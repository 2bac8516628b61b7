"""Multi-objective Tree Parzen Estimator over mixed search spaces.

The sampler models the parameter density of the good trials l(x) and of the
bad trials g(x) separately and proposes the candidate that maximises their
ratio. "Good" is decided by peeling Pareto fronts of the (maximised)
objective vectors until a gamma fraction of the history is collected, with
crowding distance breaking ties on the last front. Categorical dimensions
use smoothed counts; continuous dimensions use truncated Gaussian kernels
with a data-driven bandwidth. Conditional dimensions are only sampled when
their parent takes the triggering value.

Everything is driven by one ``numpy`` generator owned by the study, so a
study is a pure function of (seed, space, objective callback).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import BudgetError, ConfigError, SelectionError, ValidationError

CATEGORICAL = "categorical"
UNIFORM = "uniform"
LOG_UNIFORM = "log-uniform"
INT_UNIFORM = "int-uniform"

_KINDS = (CATEGORICAL, UNIFORM, LOG_UNIFORM, INT_UNIFORM)


@dataclass(frozen=True)
class Dimension:
    """One search dimension; ``parent`` = (dimension name, triggering value)
    makes it conditional."""

    name: str
    kind: str
    choices: tuple[Any, ...] = ()
    low: float = 0.0
    high: float = 0.0
    parent: tuple[str, Any] | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown dimension kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.choices:
                raise ConfigError(f"categorical dimension {self.name!r} is empty")
        else:
            if not (self.low < self.high):
                raise ConfigError(
                    f"dimension {self.name!r} needs low < high, got "
                    f"[{self.low}, {self.high}]"
                )
            if self.kind == LOG_UNIFORM and self.low <= 0:
                raise ConfigError(
                    f"log-uniform dimension {self.name!r} needs low > 0"
                )

    def contains(self, value: Any) -> bool:
        if self.kind == CATEGORICAL:
            return value in self.choices
        if self.kind == INT_UNIFORM:
            return (
                isinstance(value, (int, np.integer))
                and self.low <= value <= self.high
            )
        return (
            isinstance(value, (int, float, np.floating, np.integer))
            and math.isfinite(float(value))
            and self.low <= float(value) <= self.high
        )


def categorical(name: str, choices: Iterable[Any], parent: tuple[str, Any] | None = None) -> Dimension:
    return Dimension(name, CATEGORICAL, choices=tuple(choices), parent=parent)


def uniform(name: str, low: float, high: float, parent: tuple[str, Any] | None = None) -> Dimension:
    return Dimension(name, UNIFORM, low=float(low), high=float(high), parent=parent)


def log_uniform(name: str, low: float, high: float, parent: tuple[str, Any] | None = None) -> Dimension:
    return Dimension(name, LOG_UNIFORM, low=float(low), high=float(high), parent=parent)


def int_uniform(name: str, low: int, high: int, parent: tuple[str, Any] | None = None) -> Dimension:
    return Dimension(name, INT_UNIFORM, low=int(low), high=int(high), parent=parent)


class SearchSpace:
    """An ordered set of dimensions whose conditionals form a forest."""

    def __init__(self, dimensions: Sequence[Dimension] = ()) -> None:
        self.dimensions = tuple(dimensions)
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ConfigError("dimension names must be unique")
        by_name = {d.name: d for d in self.dimensions}
        for dim in self.dimensions:
            seen = {dim.name}
            cursor = dim
            while cursor.parent is not None:
                pname = cursor.parent[0]
                if pname not in by_name:
                    raise ConfigError(
                        f"dimension {cursor.name!r} references unknown parent {pname!r}"
                    )
                if pname in seen:
                    raise ConfigError(f"conditional cycle through {pname!r}")
                seen.add(pname)
                cursor = by_name[pname]
        self._by_name = by_name
        # parents before children
        order: list[Dimension] = []
        placed: set[str] = set()
        pending = list(self.dimensions)
        while pending:
            progressed = False
            for dim in list(pending):
                if dim.parent is None or dim.parent[0] in placed:
                    order.append(dim)
                    placed.add(dim.name)
                    pending.remove(dim)
                    progressed = True
            if not progressed:  # unreachable given the cycle check
                raise ConfigError("conditional dimensions do not form a forest")
        self.topo_order = tuple(order)

    def __len__(self) -> int:
        return len(self.dimensions)

    def dimension(self, name: str) -> Dimension:
        return self._by_name[name]

    def is_active(self, dim: Dimension, params: dict[str, Any]) -> bool:
        if dim.parent is None:
            return True
        pname, pval = dim.parent
        return params.get(pname) == pval

    def sample_uniform(self, rng: np.random.Generator) -> dict[str, Any]:
        params: dict[str, Any] = {}
        for dim in self.topo_order:
            if self.is_active(dim, params):
                params[dim.name] = _sample_prior(dim, rng)
        return params

    def validate_params(self, params: dict[str, Any]) -> None:
        """Raise unless every active dimension is present with an in-domain
        value, inactive dimensions are absent, and no stray keys exist."""
        expected: set[str] = set()
        for dim in self.topo_order:
            if self.is_active(dim, params):
                expected.add(dim.name)
                if dim.name not in params:
                    raise ValidationError(f"missing value for {dim.name!r}")
                if not dim.contains(params[dim.name]):
                    raise ValidationError(
                        f"value {params[dim.name]!r} outside the domain of {dim.name!r}"
                    )
        stray = set(params) - expected
        if stray:
            raise ValidationError(f"parameters not in the space: {sorted(stray)}")


def _sample_prior(dim: Dimension, rng: np.random.Generator) -> Any:
    if dim.kind == CATEGORICAL:
        return dim.choices[int(rng.integers(0, len(dim.choices)))]
    if dim.kind == UNIFORM:
        return float(rng.uniform(dim.low, dim.high))
    if dim.kind == LOG_UNIFORM:
        return float(math.exp(rng.uniform(math.log(dim.low), math.log(dim.high))))
    return int(rng.integers(int(dim.low), int(dim.high) + 1))


COMPLETE = "complete"
FAILED = "failed"
PRUNED = "pruned"


@dataclass(frozen=True)
class Trial:
    index: int
    params: dict[str, Any]
    objectives: tuple[float, ...] | None
    status: str
    seed: int


@dataclass(frozen=True)
class TpeConfig:
    """Sampler knobs; the defaults follow common practice and are exposed
    rather than baked in."""

    gamma: float = 0.25
    n_startup: int = 10
    n_candidates: int = 24
    prior_weight: float = 1.0


class StudyState:
    """Append-only trial history plus the study's deterministic generator."""

    def __init__(self, max_trials: int, seed: int, tpe: TpeConfig | None = None) -> None:
        if max_trials < 0:
            raise ConfigError("max_trials must be >= 0")
        self.max_trials = max_trials
        self.seed = int(seed)
        self.rng = np.random.Generator(np.random.PCG64(self.seed))
        self.tpe = tpe or TpeConfig()
        self.history: list[Trial] = []
        self.n_objectives: int | None = None

    def record(self, params: dict[str, Any], objectives: Sequence[float] | None, status: str) -> Trial:
        if objectives is not None:
            if self.n_objectives is None:
                self.n_objectives = len(objectives)
            elif len(objectives) != self.n_objectives:
                raise ValidationError(
                    "objective vector length must stay fixed within a study"
                )
        trial = Trial(
            index=len(self.history),
            params=dict(params),
            objectives=None if objectives is None else tuple(float(v) for v in objectives),
            status=status,
            seed=self.seed,
        )
        self.history.append(trial)
        return trial

    def completed(self) -> list[Trial]:
        return [t for t in self.history if t.status == COMPLETE and t.objectives]


def _dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Pareto dominance for maximisation."""
    return all(x >= y for x, y in zip(a, b)) and any(x > y for x, y in zip(a, b))


def _pareto_fronts(objective_rows: list[tuple[float, ...]]) -> list[list[int]]:
    n = len(objective_rows)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if _dominates(objective_rows[i], objective_rows[j]):
                dominated_by[i].append(j)
                count[j] += 1
            elif _dominates(objective_rows[j], objective_rows[i]):
                dominated_by[j].append(i)
                count[i] += 1
    fronts = [[i for i in range(n) if count[i] == 0]]
    while fronts[-1]:
        nxt = []
        for p in fronts[-1]:
            for q in dominated_by[p]:
                count[q] -= 1
                if count[q] == 0:
                    nxt.append(q)
        fronts.append(nxt)
    fronts.pop()
    return fronts


def _crowding_distance(rows: list[tuple[float, ...]]) -> list[float]:
    n = len(rows)
    if n <= 2:
        return [math.inf] * n
    dims = len(rows[0])
    dist = [0.0] * n
    for d in range(dims):
        order = sorted(range(n), key=lambda i: rows[i][d])
        lo, hi = rows[order[0]][d], rows[order[-1]][d]
        dist[order[0]] = dist[order[-1]] = math.inf
        if hi == lo:
            continue
        for pos in range(1, n - 1):
            gap = rows[order[pos + 1]][d] - rows[order[pos - 1]][d]
            dist[order[pos]] += gap / (hi - lo)
    return dist


@dataclass(frozen=True)
class SplitResult:
    """Indices (into the passed trial list) of the good and bad sets; the
    members of ``tie_break`` entered the good set only through the crowding
    tie-break on the last peeled front."""

    good: frozenset[int]
    bad: frozenset[int]
    tie_break: frozenset[int]


def nondominated_split(trials: Sequence[Trial], gamma: float) -> SplitResult:
    """Peel Pareto fronts into the good set until ceil(gamma * n) complete
    trials are collected; ties on the last front break by crowding distance."""
    if not (0.0 < gamma < 1.0):
        raise ConfigError(f"gamma must lie in (0, 1), got {gamma}")
    complete = [i for i, t in enumerate(trials) if t.status == COMPLETE and t.objectives]
    if not complete:
        raise ValidationError("nondominated split needs at least one complete trial")
    rows = [trials[i].objectives for i in complete]
    n_good = max(1, math.floor(gamma * len(complete)))
    fronts = _pareto_fronts(list(rows))
    good: list[int] = []
    ties: list[int] = []
    for front in fronts:
        if len(good) + len(front) <= n_good:
            good.extend(front)
            if len(good) == n_good:
                break
        else:
            want = n_good - len(good)
            front_rows = [rows[i] for i in front]
            dist = _crowding_distance(front_rows)
            chosen = sorted(range(len(front)), key=lambda p: (-dist[p], front[p]))[:want]
            picked = [front[p] for p in chosen]
            good.extend(picked)
            ties.extend(picked)
            break
    good_ids = frozenset(complete[i] for i in good)
    tie_ids = frozenset(complete[i] for i in ties)
    bad_ids = frozenset(complete) - good_ids
    return SplitResult(good=good_ids, bad=bad_ids, tie_break=tie_ids)


class _CategoricalEstimator:
    """Smoothed counts: P(c) = (n_c + w) / (n + K w)."""

    def __init__(self, dim: Dimension, observations: list[Any], prior_weight: float) -> None:
        self.dim = dim
        k = len(dim.choices)
        counts = np.full(k, prior_weight, dtype=np.float64)
        index = {c: i for i, c in enumerate(dim.choices)}
        for obs in observations:
            counts[index[obs]] += 1.0
        self.probs = counts / counts.sum()
        self._index = index

    def sample(self, rng: np.random.Generator) -> Any:
        return self.dim.choices[int(rng.choice(len(self.probs), p=self.probs))]

    def log_pdf(self, value: Any) -> float:
        return float(np.log(self.probs[self._index[value]]))


def _phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


class _NumericEstimator:
    """Adaptive Parzen estimator: truncated Gaussian kernels at the
    observations with per-point bandwidths from neighbour gaps (clipped to
    [span/min(100, n+1), span]) plus one uniform prior component.

    The floor on the bandwidth is what prevents the sampler from collapsing
    onto an early cluster of near-identical good trials. Log-uniform
    dimensions are modelled in log space; int-uniform ones on the continuous
    relaxation of their range.
    """

    def __init__(self, dim: Dimension, observations: list[Any], prior_weight: float) -> None:
        self.dim = dim
        if dim.kind == LOG_UNIFORM:
            self.lo, self.hi = math.log(dim.low), math.log(dim.high)
            pts = [math.log(float(v)) for v in observations]
        else:
            self.lo, self.hi = float(dim.low), float(dim.high)
            pts = [float(v) for v in observations]
        span = self.hi - self.lo
        order = np.argsort(pts) if pts else np.empty(0, dtype=np.int64)
        self.points = np.array(sorted(pts), dtype=np.float64)
        n = self.points.size
        if n:
            extended = np.concatenate([[self.lo], self.points, [self.hi]])
            left = extended[1 : n + 1] - extended[:n]
            right = extended[2 : n + 2] - extended[1 : n + 1]
            sigmas = np.maximum(left, right)
            min_sigma = span / min(100.0, n + 1.0)
            self.sigmas = np.clip(sigmas, min_sigma, span)
        else:
            self.sigmas = np.empty(0, dtype=np.float64)
        del order
        self.weights = np.concatenate([np.ones(n), [prior_weight]])
        self.weights = self.weights / self.weights.sum()

    def _truncnorm_sample(self, rng: np.random.Generator, mu: float, sigma: float) -> float:
        for _ in range(64):
            x = rng.normal(mu, sigma)
            if self.lo <= x <= self.hi:
                return x
        return float(rng.uniform(self.lo, self.hi))

    def sample(self, rng: np.random.Generator) -> Any:
        comp = int(rng.choice(len(self.weights), p=self.weights))
        if comp == len(self.points):
            x = float(rng.uniform(self.lo, self.hi))
        else:
            x = self._truncnorm_sample(rng, float(self.points[comp]), float(self.sigmas[comp]))
        return self._to_value(x)

    def _to_value(self, x: float) -> Any:
        if self.dim.kind == LOG_UNIFORM:
            return float(math.exp(x))
        if self.dim.kind == INT_UNIFORM:
            return int(min(max(int(round(x)), int(self.dim.low)), int(self.dim.high)))
        return float(x)

    def _to_internal(self, value: Any) -> float:
        if self.dim.kind == LOG_UNIFORM:
            return math.log(float(value))
        return float(value)

    def log_pdf(self, value: Any) -> float:
        x = self._to_internal(value)
        span = self.hi - self.lo
        dens = self.weights[-1] / span
        for w, mu, sigma in zip(self.weights[:-1], self.points, self.sigmas):
            z = (x - mu) / sigma
            kern = math.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))
            norm = max(_phi((self.hi - mu) / sigma) - _phi((self.lo - mu) / sigma), 1e-12)
            dens += w * kern / norm
        return math.log(max(dens, 1e-300))


def _make_estimator(dim: Dimension, observations: list[Any], prior_weight: float):
    if dim.kind == CATEGORICAL:
        return _CategoricalEstimator(dim, observations, prior_weight)
    return _NumericEstimator(dim, observations, prior_weight)


def suggest(state: StudyState, space: SearchSpace) -> dict[str, Any]:
    """Propose the next parameter set.

    Uniform during startup or degenerate histories; otherwise draw candidates
    from the good-set density and keep the one with the best l(x)/g(x).
    """
    if len(state.history) >= state.max_trials:
        raise BudgetError(f"study budget of {state.max_trials} trials is exhausted")
    cfg = state.tpe
    complete = state.completed()
    if len(complete) < cfg.n_startup:
        return space.sample_uniform(state.rng)
    distinct = {t.objectives for t in complete}
    if len(distinct) == 1:
        return space.sample_uniform(state.rng)

    split = nondominated_split(complete, cfg.gamma)
    good = [complete[i] for i in sorted(split.good)]
    bad = [complete[i] for i in sorted(split.bad)]
    if not bad:
        return space.sample_uniform(state.rng)

    l_est: dict[str, Any] = {}
    g_est: dict[str, Any] = {}
    for dim in space.topo_order:
        good_obs = [t.params[dim.name] for t in good if dim.name in t.params]
        bad_obs = [t.params[dim.name] for t in bad if dim.name in t.params]
        l_est[dim.name] = _make_estimator(dim, good_obs, cfg.prior_weight)
        g_est[dim.name] = _make_estimator(dim, bad_obs, cfg.prior_weight)

    best_params: dict[str, Any] | None = None
    best_score = -math.inf
    for _ in range(cfg.n_candidates):
        params: dict[str, Any] = {}
        for dim in space.topo_order:
            if space.is_active(dim, params):
                params[dim.name] = l_est[dim.name].sample(state.rng)
        score = 0.0
        for dim in space.topo_order:
            if dim.name in params:
                score += l_est[dim.name].log_pdf(params[dim.name])
                score -= g_est[dim.name].log_pdf(params[dim.name])
        if score > best_score:
            best_score = score
            best_params = params
    assert best_params is not None or len(space) == 0
    return best_params if best_params is not None else {}


class TrialFailed(Exception):
    """Raised by an objective callback to mark the current trial failed."""


def run_study(
    objective: Callable[[dict[str, Any]], Sequence[float]],
    space: SearchSpace,
    budget: int | Any,
    seed: int,
    tpe: TpeConfig | None = None,
) -> StudyState:
    """Run up to ``budget`` sequential trials; failures are recorded and the
    study continues. Deterministic for a fixed seed and callback."""
    max_trials = budget if isinstance(budget, int) else int(budget.max_trials)
    state = StudyState(max_trials=max_trials, seed=seed, tpe=tpe)
    while len(state.history) < state.max_trials:
        params = suggest(state, space)
        try:
            objectives = tuple(float(v) for v in objective(params))
        except TrialFailed:
            state.record(params, None, FAILED)
            continue
        if not objectives or any(not math.isfinite(v) for v in objectives):
            state.record(params, None, FAILED)
            continue
        state.record(params, objectives, COMPLETE)
    return state


def select_best(state: StudyState, objective_index: int) -> dict[str, Any]:
    """Parameters of the completed trial maximising one objective; ties go to
    the earliest trial."""
    best: Trial | None = None
    for trial in state.completed():
        if objective_index >= len(trial.objectives):
            raise SelectionError(
                f"objective index {objective_index} out of range"
            )
        if best is None or trial.objectives[objective_index] > best.objectives[objective_index]:
            best = trial
    if best is None:
        raise SelectionError("study has no complete trials")
    return dict(best.params)


def history_to_jsonl(state: StudyState) -> str:
    """One JSON record per trial, for offline analysis."""
    lines = []
    for t in state.history:
        lines.append(
            json.dumps(
                {
                    "index": t.index,
                    "params": t.params,
                    "objectives": list(t.objectives) if t.objectives else None,
                    "status": t.status,
                    "seed": t.seed,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")
