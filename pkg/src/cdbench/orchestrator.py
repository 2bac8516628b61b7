"""End-to-end benchmark execution.

For every (algorithm, dataset) pair: optionally tune hyperparameters on the
first configured seed only (validation metrics as the objectives, test
labels never reach the tuning loop), then train under every seed with the
selected parameters and fill the (algorithm, seed, dataset x metric) results
cube. Failures become FAILED cells instead of aborting the run.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .concordance import (
    Cell,
    ComparisonReport,
    ConcordanceReport,
    FailReason,
    ResultsCube,
    TestPoint,
    framework_comparison_rank,
    w_randomness_coefficient,
)
from .errors import CdbenchError, ConfigError, ValidationError
from .graphs import Graph, NodeSplits, load_dataset, split_nodes
from .hpo import (
    SearchSpace,
    StudyState,
    TpeConfig,
    TrialFailed,
    run_study,
    select_best,
)
from .metrics import (
    MetricId,
    MetricValue,
    Partition,
    conductance,
    macro_f1,
    modularity,
    nmi,
)
from .runner import RunnerSpec, TrainRequest, TrainResponse, train_and_predict

log = logging.getLogger(__name__)

MODE_HPO = "hpo"
MODE_DEFAULT = "default-params"


@dataclass(frozen=True)
class ResourceConfig:
    """Shared resource allocation; the defaults are the benchmark's
    canonical budget."""

    learning_rates: tuple[float, ...] = (0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001)
    weight_decays: tuple[float, ...] = (0.05, 0.005, 0.0005, 0.0)
    max_epochs: int = 5000
    patience_options: tuple[int, ...] = (25, 100, 500, 1000)
    max_trials: int = 300
    seeds: tuple[int, ...] = (42, 24, 976, 12345, 98765, 7, 856, 90, 672, 785)
    train_split: float = 0.8
    val_split: float = 0.8
    timeout: float = 300.0
    optimizer: str = "adam"
    default_patience: int = 100

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.max_trials < 0:
            raise ConfigError("max_trials must be >= 0")
        if self.default_patience not in self.patience_options:
            raise ConfigError("default_patience must be one of patience_options")


@dataclass(frozen=True)
class BenchmarkConfig:
    datasets: tuple[str, ...]
    runners: tuple[RunnerSpec, ...]
    metrics: tuple[MetricId, ...] = tuple(MetricId)
    resources: ResourceConfig = field(default_factory=ResourceConfig)
    mode: str = MODE_HPO
    workers: int = 1
    study_per_test: bool = False
    tpe: TpeConfig = field(default_factory=TpeConfig)

    def __post_init__(self) -> None:
        if self.mode not in (MODE_HPO, MODE_DEFAULT):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not self.datasets:
            raise ConfigError("no datasets configured")
        if not self.runners:
            raise ConfigError("no runners configured")
        if not self.metrics:
            raise ConfigError("no metrics configured")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        names = [r.name for r in self.runners]
        if len(set(names)) != len(names):
            raise ConfigError("runner names must be unique")


def study_seed(first_seed: int, runner: str, dataset: str) -> int:
    """Deterministic per-(runner, dataset) study seed derived from the first
    configured seed."""
    digest = hashlib.sha256(f"{first_seed}:{runner}:{dataset}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**31)


def _params_key(params: dict[str, Any]) -> tuple:
    return tuple(sorted((k, repr(v)) for k, v in params.items()))


def _metric_value(
    metric: MetricId,
    g: Graph,
    pred: Partition,
    splits: NodeSplits,
    subset: np.ndarray | None = None,
) -> MetricValue:
    """Supervised metrics on the given node subset (test by default),
    unsupervised on the full graph."""
    if metric is MetricId.F1:
        return macro_f1(pred, g.labels, splits.test if subset is None else subset)
    if metric is MetricId.NMI:
        return nmi(pred, g.labels, splits.test if subset is None else subset)
    if metric is MetricId.MODULARITY:
        return modularity(g, pred)
    return conductance(g, pred)


def _request(
    cfg: BenchmarkConfig,
    dataset_path: str,
    g: Graph,
    params: dict[str, Any],
    seed: int,
    splits: NodeSplits,
) -> TrainRequest:
    patience = params.get("patience", cfg.resources.default_patience)
    return TrainRequest(
        dataset_path=dataset_path,
        params=dict(params),
        seed=seed,
        max_epochs=cfg.resources.max_epochs,
        patience=int(patience),
        k=g.k,
        train_nodes=tuple(int(v) for v in splits.train),
        val_nodes=tuple(int(v) for v in splits.validation),
    )


def _validation_objectives(
    cfg: BenchmarkConfig, g: Graph, resp: TrainResponse, splits: NodeSplits
) -> list[float]:
    """Objective vector for the tuner: the configured metrics evaluated on
    the validation nodes (supervised) or full graph, orientation-normalised
    so larger is always better."""
    if not resp.ok:
        raise TrialFailed(resp.status)
    pred = Partition(resp.partition, g.k)
    out: list[float] = []
    for metric in cfg.metrics:
        mv = _metric_value(metric, g, pred, splits, subset=splits.validation)
        value = mv.value if metric.higher_is_better else -mv.value
        out.append(value)
    return out


def _select_params(
    cfg: BenchmarkConfig,
    spec: RunnerSpec,
    dataset_path: str,
    g: Graph,
) -> dict[MetricId, dict[str, Any]]:
    """Parameters to evaluate per metric: the runner's published defaults,
    or per-metric selections from the tuning study on the first seed."""
    if cfg.mode == MODE_DEFAULT:
        return {m: dict(spec.defaults) for m in cfg.metrics}
    first = cfg.resources.seeds[0]
    splits = split_nodes(g, cfg.resources.train_split, cfg.resources.val_split, first)

    def objective(params: dict[str, Any]) -> list[float]:
        req = _request(cfg, dataset_path, g, params, first, splits)
        resp = train_and_predict(spec, req, timeout=cfg.resources.timeout)
        return _validation_objectives(cfg, g, resp, splits)

    if cfg.study_per_test:
        selected: dict[MetricId, dict[str, Any]] = {}
        for i, metric in enumerate(cfg.metrics):
            def single(params: dict[str, Any], _i: int = i) -> list[float]:
                return [objective(params)[_i]]

            state = run_study(
                single,
                spec.search_space,
                cfg.resources.max_trials,
                study_seed(first, spec.name, f"{g.name}:{metric.value}"),
                tpe=cfg.tpe,
            )
            selected[metric] = _best_or_defaults(state, 0, spec)
        return selected

    state = run_study(
        objective,
        spec.search_space,
        cfg.resources.max_trials,
        study_seed(first, spec.name, g.name),
        tpe=cfg.tpe,
    )
    return {
        metric: _best_or_defaults(state, i, spec)
        for i, metric in enumerate(cfg.metrics)
    }


def _best_or_defaults(state: StudyState, index: int, spec: RunnerSpec) -> dict[str, Any]:
    try:
        return select_best(state, index)
    except CdbenchError:
        log.warning("study for %s had no successful trials; using defaults", spec.name)
        return dict(spec.defaults)


def _evaluate_pair(
    cfg: BenchmarkConfig,
    spec: RunnerSpec,
    dataset_path: str,
    g: Graph,
    params_by_metric: dict[MetricId, dict[str, Any]],
    seed: int,
) -> dict[TestPoint, Cell]:
    """Train once per distinct parameter set for this seed and score every
    metric from the partition trained under its own selected parameters."""
    splits = split_nodes(g, cfg.resources.train_split, cfg.resources.val_split, seed)
    groups: dict[tuple, list[MetricId]] = {}
    params_of: dict[tuple, dict[str, Any]] = {}
    for metric, params in params_by_metric.items():
        key = _params_key(params)
        groups.setdefault(key, []).append(metric)
        params_of[key] = params
    cells: dict[TestPoint, Cell] = {}
    for key, metrics_for in groups.items():
        req = _request(cfg, dataset_path, g, params_of[key], seed, splits)
        resp = train_and_predict(spec, req, timeout=cfg.resources.timeout)
        for metric in metrics_for:
            test = TestPoint(g.name, metric)
            if not resp.ok:
                cells[test] = FailReason(resp.status)
                continue
            try:
                pred = Partition(resp.partition, g.k)
                cells[test] = _metric_value(metric, g, pred, splits).value
            except CdbenchError as exc:
                log.warning("metric %s failed on %s: %s", metric, g.name, exc)
                cells[test] = FailReason.CRASH
    return cells


def run_benchmark(cfg: BenchmarkConfig) -> ResultsCube:
    """Execute the whole benchmark and return the dense results cube."""
    graphs: dict[str, Graph] = {}
    for path in cfg.datasets:
        try:
            g = load_dataset(path)
        except CdbenchError as exc:
            log.warning("dataset %s failed to load, dropping its tests: %s", path, exc)
            continue
        if g.name in graphs:
            raise ConfigError(f"duplicate dataset name {g.name!r}")
        if any(m.supervised for m in cfg.metrics) and g.labels is None:
            raise ConfigError(
                f"dataset {g.name!r} has no labels but supervised metrics are configured"
            )
        graphs[path] = g
    if not graphs:
        raise ConfigError("no dataset could be loaded")

    tests = [
        TestPoint(graphs[path].name, metric)
        for path in graphs
        for metric in cfg.metrics
    ]
    algorithms = [spec.name for spec in cfg.runners]
    seeds = cfg.resources.seeds

    def tune(job: tuple[RunnerSpec, str]) -> tuple[tuple[str, str], dict[MetricId, dict[str, Any]]]:
        spec, path = job
        g = graphs[path]
        try:
            selected = _select_params(cfg, spec, path, g)
        except CdbenchError as exc:
            log.warning("tuning failed for %s on %s: %s", spec.name, g.name, exc)
            selected = {m: dict(spec.defaults) for m in cfg.metrics}
        return (spec.name, path), selected

    tuning_jobs = [(spec, path) for spec in cfg.runners for path in graphs]
    selections: dict[tuple[str, str], dict[MetricId, dict[str, Any]]] = {}
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for key, sel in pool.map(tune, tuning_jobs):
                selections[key] = sel
    else:
        for job in tuning_jobs:
            key, sel = tune(job)
            selections[key] = sel

    def evaluate(job: tuple[RunnerSpec, str, int]) -> tuple[tuple[str, int, str], dict[TestPoint, Cell]]:
        spec, path, seed = job
        g = graphs[path]
        cells = _evaluate_pair(
            cfg, spec, path, g, selections[(spec.name, path)], seed
        )
        return (spec.name, seed, path), cells

    eval_jobs = [
        (spec, path, seed) for spec in cfg.runners for path in graphs for seed in seeds
    ]
    cells: dict[tuple[str, int, TestPoint], Cell] = {}

    def collect(key: tuple[str, int, str], result: dict[TestPoint, Cell]) -> None:
        alg, seed, _path = key
        for test, cell in result.items():
            cells[(alg, seed, test)] = cell

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for key, result in pool.map(evaluate, eval_jobs):
                collect(key, result)
    else:
        for job in eval_jobs:
            key, result = evaluate(job)
            collect(key, result)

    return ResultsCube(algorithms, seeds, tests, cells)


def _config_shape(cfg: BenchmarkConfig) -> tuple:
    return (
        cfg.datasets,
        tuple(r.name for r in cfg.runners),
        cfg.metrics,
        cfg.resources,
        cfg.workers,
        cfg.study_per_test,
    )


def compare_regimes(
    cfg_default: BenchmarkConfig, cfg_hpo: BenchmarkConfig
) -> tuple[ComparisonReport, ConcordanceReport, ConcordanceReport]:
    """Run both parameter regimes and compare them head to head."""
    if _config_shape(cfg_default) != _config_shape(cfg_hpo):
        raise ValidationError("configs must differ only in mode")
    if cfg_default.mode != MODE_DEFAULT or cfg_hpo.mode != MODE_HPO:
        raise ValidationError("pass the default-params config first, hpo second")
    cube_default = run_benchmark(cfg_default)
    cube_hpo = run_benchmark(cfg_hpo)
    return compare_cubes(cube_default, cube_hpo)


def compare_cubes(
    cube_default: ResultsCube, cube_hpo: ResultsCube
) -> tuple[ComparisonReport, ConcordanceReport, ConcordanceReport]:
    report = framework_comparison_rank(
        cube_default, cube_hpo, names=("default", "hpo")
    )
    return (
        report,
        w_randomness_coefficient(cube_default),
        w_randomness_coefficient(cube_hpo),
    )
