"""The four performance metrics: macro F1 and NMI against ground truth,
modularity and conductance from the graph structure alone.

All four are invariant under permutation of cluster ids. Supervised metrics
are evaluated on a node subset (the held-out test or validation nodes);
unsupervised metrics always see the full weighted graph.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import UnsupportedMetricError, ValidationError
from .graphs import Graph


class MetricId(enum.Enum):
    F1 = "f1"
    NMI = "nmi"
    MODULARITY = "modularity"
    CONDUCTANCE = "conductance"

    @property
    def higher_is_better(self) -> bool:
        return self is not MetricId.CONDUCTANCE

    @property
    def supervised(self) -> bool:
        return self in (MetricId.F1, MetricId.NMI)

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


def metric_from_name(name: str) -> MetricId:
    try:
        return MetricId(name.strip().lower())
    except ValueError:
        raise ValidationError(f"unknown metric {name!r}") from None


OK = "ok"
DEGENERATE = "undefined-degenerate"


@dataclass(frozen=True)
class MetricValue:
    value: float
    status: str = OK
    note: str | None = None

    @property
    def degenerate(self) -> bool:
        return self.status == DEGENERATE


@dataclass(frozen=True)
class Partition:
    """Hard cluster assignment: one cluster id in [0, k) per node."""

    assignment: np.ndarray
    k: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.assignment, dtype=np.int64)
        object.__setattr__(self, "assignment", arr)
        if arr.ndim != 1:
            raise ValidationError("partition assignment must be a 1-d vector")
        if self.k < 1:
            raise ValidationError("partition must allow at least one cluster")
        if arr.size and (arr.min() < 0 or arr.max() >= self.k):
            raise ValidationError(
                f"cluster ids must lie in [0, {self.k}); saw "
                f"[{arr.min()}, {arr.max()}]"
            )

    @property
    def n(self) -> int:
        return int(self.assignment.size)


def _contingency(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Contingency table over the ids actually present in each vector, so
    clusters/classes absent from the evaluation subset occupy no slot."""
    _, pred_c = np.unique(pred, return_inverse=True)
    _, truth_c = np.unique(truth, return_inverse=True)
    r = int(pred_c.max()) + 1 if pred_c.size else 0
    c = int(truth_c.max()) + 1 if truth_c.size else 0
    table = np.zeros((r, c), dtype=np.int64)
    np.add.at(table, (pred_c, truth_c), 1)
    return table


def _best_alignment_f1(table: np.ndarray) -> float:
    """Macro F1 under maximum-total-overlap cluster-to-class matching.

    Among matchings that tie on total overlap the one with the best macro F1
    is used, so the value is a deterministic function of the table. The tie
    set is enumerated with an admissible branch-and-bound; the optimal overlap
    itself comes from the Hungarian algorithm.
    """
    r, c = table.shape
    size = max(r, c)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[:r, :c] = table
    rows, cols = linear_sum_assignment(padded, maximize=True)
    best_overlap = int(padded[rows, cols].sum())

    pred_counts = table.sum(axis=1)
    true_counts = table.sum(axis=0)

    def macro_f1_of(assign: list[int]) -> float:
        # assign[i] = class matched to cluster i, or -1 for unmatched
        tp = np.zeros(c, dtype=np.int64)
        pred_per_class = np.zeros(c, dtype=np.int64)
        for i, j in enumerate(assign):
            if 0 <= j < c and i < r:
                tp[j] = table[i, j]
                pred_per_class[j] = pred_counts[i]
        present = (true_counts > 0) | (pred_per_class > 0)
        if not present.any():
            return 0.0
        denom = pred_per_class + true_counts
        f1 = np.zeros(c, dtype=np.float64)
        nz = denom > 0
        f1[nz] = 2.0 * tp[nz] / denom[nz]
        return float(f1[present].mean())

    # DFS over cluster rows; suffix_bound[i] = sum of row maxima from row i on
    row_max = padded.max(axis=1)
    suffix_bound = np.concatenate([np.cumsum(row_max[::-1])[::-1], [0]])

    best_f1 = -1.0
    budget = 200_000  # safety valve; never reached for the k<=10 desk scale

    def dfs(i: int, used: int, overlap: int, assign: list[int]) -> None:
        nonlocal best_f1, budget
        if budget <= 0:
            return
        budget -= 1
        if overlap + suffix_bound[i] < best_overlap:
            return
        if i == size:
            if overlap == best_overlap:
                best_f1 = max(best_f1, macro_f1_of(assign))
            return
        for j in range(size):
            if used & (1 << j):
                continue
            assign.append(j)
            dfs(i + 1, used | (1 << j), overlap + int(padded[i, j]), assign)
            assign.pop()

    dfs(0, 0, 0, [])
    if best_f1 < 0.0:
        # budget exhausted before any optimal leaf: fall back to Hungarian
        assign = [-1] * size
        for i, j in zip(rows, cols):
            assign[i] = j
        best_f1 = macro_f1_of(list(assign))
    return best_f1


def _require_subset(subset: np.ndarray | None, n: int) -> np.ndarray:
    if subset is None:
        return np.arange(n, dtype=np.int64)
    idx = np.asarray(subset, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValidationError("subset contains node ids outside the graph")
    return idx


def macro_f1(
    pred: Partition, labels: np.ndarray | None, subset: np.ndarray | None = None
) -> MetricValue:
    """Unweighted mean of per-class F1 after optimal cluster-class alignment.

    Alignment and scoring are restricted to ``subset``; unmatched classes
    score zero.
    """
    if labels is None:
        raise UnsupportedMetricError("macro F1 requires ground-truth labels")
    labels = np.asarray(labels, dtype=np.int64)
    idx = _require_subset(subset, pred.n)
    if idx.size == 0:
        return MetricValue(0.0, DEGENERATE, "empty evaluation subset")
    table = _contingency(pred.assignment[idx], labels[idx])
    return MetricValue(_best_alignment_f1(table))


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def nmi(
    pred: Partition, labels: np.ndarray | None, subset: np.ndarray | None = None
) -> MetricValue:
    """Mutual information normalised by the arithmetic mean of entropies."""
    if labels is None:
        raise UnsupportedMetricError("NMI requires ground-truth labels")
    labels = np.asarray(labels, dtype=np.int64)
    idx = _require_subset(subset, pred.n)
    if idx.size == 0:
        return MetricValue(0.0, DEGENERATE, "empty evaluation subset")
    table = _contingency(pred.assignment[idx], labels[idx]).astype(np.float64)
    n = table.sum()
    row = table.sum(axis=1)
    col = table.sum(axis=0)
    h_pred = _entropy(row)
    h_true = _entropy(col)
    if h_pred == 0.0 or h_true == 0.0:
        if h_pred == 0.0 and h_true == 0.0:
            # both sides are a single block: identical partitions of the subset
            return MetricValue(1.0)
        return MetricValue(0.0, DEGENERATE, "zero-entropy partition")
    nz = table > 0
    outer = np.outer(row, col)
    mi = float((table[nz] / n * np.log(n * table[nz] / outer[nz])).sum())
    value = mi / ((h_pred + h_true) / 2.0)
    return MetricValue(min(max(value, 0.0), 1.0))


def _cluster_volumes(g: Graph, assignment: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """(intra-cluster weight L_c, weighted volume D_c, total weight m)."""
    k = int(assignment.max()) + 1 if assignment.size else 1
    cu = assignment[g.edge_u]
    cv = assignment[g.edge_v]
    intra = np.zeros(k, dtype=np.float64)
    same = cu == cv
    np.add.at(intra, cu[same], g.edge_w[same])
    vol = np.zeros(k, dtype=np.float64)
    np.add.at(vol, cu, g.edge_w)
    np.add.at(vol, cv, g.edge_w)
    return intra, vol, g.total_weight


def modularity(g: Graph, pred: Partition) -> MetricValue:
    """Weighted Newman modularity: sum over clusters of
    intra_weight/m - (volume/2m)^2."""
    if pred.n != g.n:
        raise ValidationError("partition length does not match graph size")
    if g.edge_count == 0:
        return MetricValue(0.0, DEGENERATE, "graph has no edges")
    intra, vol, m = _cluster_volumes(g, pred.assignment)
    q = float((intra / m - (vol / (2.0 * m)) ** 2).sum())
    return MetricValue(q)


def conductance(
    g: Graph, pred: Partition, volume_weighted: bool = False
) -> MetricValue:
    """Mean over clusters of cut(C, complement) / vol(C), weighted volumes.

    Clusters with zero volume are skipped (noted); ``volume_weighted=True``
    switches the aggregation to total-cut / total-volume.
    """
    if pred.n != g.n:
        raise ValidationError("partition length does not match graph size")
    if g.edge_count == 0:
        return MetricValue(0.0, DEGENERATE, "graph has no edges")
    intra, vol, _ = _cluster_volumes(g, pred.assignment)
    occupied = np.bincount(pred.assignment, minlength=intra.size) > 0
    cut = vol - 2.0 * intra
    usable = occupied & (vol > 0)
    skipped = int(occupied.sum() - usable.sum())
    note = f"{skipped} zero-volume cluster(s) skipped" if skipped else None
    if not usable.any():
        return MetricValue(0.0, DEGENERATE, "every cluster has zero volume")
    if volume_weighted:
        value = float(cut[usable].sum() / vol[usable].sum())
    else:
        value = float((cut[usable] / vol[usable]).mean())
    return MetricValue(value, note=note)


@dataclass(frozen=True)
class EvaluationResult:
    """Per-metric outcomes; metrics that could not be computed land in
    ``errors`` instead of aborting the rest."""

    values: dict[MetricId, MetricValue] = field(default_factory=dict)
    errors: dict[MetricId, str] = field(default_factory=dict)


def evaluate_all(
    g: Graph,
    pred: Partition,
    labels: np.ndarray | None = None,
    subset: np.ndarray | None = None,
    which: tuple[MetricId, ...] = tuple(MetricId),
) -> EvaluationResult:
    """Evaluate the requested metrics: supervised ones on ``subset``,
    unsupervised ones on the full graph."""
    values: dict[MetricId, MetricValue] = {}
    errors: dict[MetricId, str] = {}
    for metric in which:
        try:
            if metric is MetricId.F1:
                values[metric] = macro_f1(pred, labels, subset)
            elif metric is MetricId.NMI:
                values[metric] = nmi(pred, labels, subset)
            elif metric is MetricId.MODULARITY:
                values[metric] = modularity(g, pred)
            elif metric is MetricId.CONDUCTANCE:
                values[metric] = conductance(g, pred)
        except (UnsupportedMetricError, ValidationError) as exc:
            errors[metric] = str(exc)
    return EvaluationResult(values=values, errors=errors)
