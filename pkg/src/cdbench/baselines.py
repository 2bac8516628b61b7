"""Built-in baseline clusterers: deterministic functions of
(graph, params, seed) that honour the epoch/patience budget.

These are desk-scale stand-ins so the whole pipeline runs without any
deep-learning dependency: k-means on the feature matrix, label propagation
on the adjacency, greedy modularity agglomeration down to k clusters, and a
random-assignment control.
"""

from __future__ import annotations

import heapq
from typing import Any

import numpy as np

from .errors import ValidationError
from .graphs import Graph


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _check_params(params: dict[str, Any], allowed: dict[str, type]) -> None:
    for key, value in params.items():
        if key not in allowed:
            raise ValidationError(f"unknown parameter {key!r}")
        if allowed[key] is int and not isinstance(value, (int, np.integer)):
            raise ValidationError(f"parameter {key!r} must be an integer")
        if allowed[key] is float and not isinstance(value, (int, float, np.integer, np.floating)):
            raise ValidationError(f"parameter {key!r} must be numeric")


def _kmeans_plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(0, n))
    centers[0] = x[first]
    closest = ((x - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = int(rng.integers(0, n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[c] = x[idx]
        closest = np.minimum(closest, ((x - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans_features(
    g: Graph, k: int, params: dict[str, Any], seed: int, max_epochs: int, patience: int
) -> tuple[np.ndarray, int]:
    """Lloyd's k-means on the node features; best inertia over restarts."""
    _check_params(params, {"n_restarts": int, "max_iter": int})
    n_restarts = int(params.get("n_restarts", 3))
    max_iter = int(params.get("max_iter", 100))
    if n_restarts < 1 or max_iter < 1:
        raise ValidationError("n_restarts and max_iter must be >= 1")
    x = g.features
    if x.shape[1] == 0:
        raise ValidationError("k-means needs at least one feature dimension")
    rng = _rng(seed)
    max_iter = min(max_iter, max_epochs)
    best_labels: np.ndarray | None = None
    best_inertia = np.inf
    epochs = 0
    for _ in range(n_restarts):
        centers = _kmeans_plusplus(x, k, rng)
        labels = np.zeros(g.n, dtype=np.int64)
        prev_inertia = np.inf
        stall = 0
        for _ in range(max_iter):
            epochs += 1
            dists = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            labels = dists.argmin(axis=1)
            inertia = float(dists[np.arange(g.n), labels].sum())
            for c in range(k):
                mask = labels == c
                if mask.any():
                    centers[c] = x[mask].mean(axis=0)
                else:
                    # re-seed empty clusters at the farthest point
                    far = int(dists.min(axis=1).argmax())
                    centers[c] = x[far]
            if prev_inertia - inertia <= 1e-12:
                stall += 1
                if stall >= patience:
                    break
            else:
                stall = 0
            prev_inertia = inertia
        if prev_inertia < best_inertia:
            best_inertia = prev_inertia
            best_labels = labels.copy()
    assert best_labels is not None
    return best_labels, epochs


def label_propagation(
    g: Graph, k: int, params: dict[str, Any], seed: int, max_epochs: int, patience: int
) -> tuple[np.ndarray, int]:
    """Asynchronous weighted label propagation, then reduce to k clusters by
    merging the smallest communities into their most-connected survivor."""
    _check_params(params, {"max_rounds": int})
    max_rounds = int(params.get("max_rounds", 30))
    if max_rounds < 1:
        raise ValidationError("max_rounds must be >= 1")
    rng = _rng(seed)
    indptr, indices, weights = g.csr()
    labels = np.arange(g.n, dtype=np.int64)
    rounds = min(max_rounds, max_epochs)
    best_changes = np.inf
    stall = 0
    used = 0
    for _ in range(rounds):
        used += 1
        changes = 0
        for v in rng.permutation(g.n):
            lo, hi = indptr[v], indptr[v + 1]
            if lo == hi:
                continue
            nbr_labels = labels[indices[lo:hi]]
            w = weights[lo:hi]
            totals: dict[int, float] = {}
            for lab, wt in zip(nbr_labels, w):
                totals[int(lab)] = totals.get(int(lab), 0.0) + float(wt)
            best = max(totals.values())
            candidates = sorted(lab for lab, wt in totals.items() if wt == best)
            pick = candidates[int(rng.integers(0, len(candidates)))]
            if pick != labels[v]:
                labels[v] = pick
                changes += 1
        if changes == 0:
            break
        if changes >= best_changes:
            stall += 1
            if stall >= patience:
                break
        else:
            stall = 0
            best_changes = changes
    return _constrain_to_k(g, labels, k), used


def _constrain_to_k(g: Graph, labels: np.ndarray, k: int) -> np.ndarray:
    """Relabel communities to [0, k): the k largest keep their identity and
    every smaller one is merged into the kept community it shares the most
    edge weight with (falling back to the largest kept)."""
    uniq, counts = np.unique(labels, return_counts=True)
    order = sorted(range(len(uniq)), key=lambda i: (-counts[i], uniq[i]))
    if len(uniq) <= k:
        remap = {int(uniq[i]): rank for rank, i in enumerate(order)}
        return np.array([remap[int(l)] for l in labels], dtype=np.int64)
    kept_rank = {int(uniq[i]): rank for rank, i in enumerate(order[:k])}
    # edge weight from each dropped community to each kept community
    link: dict[int, dict[int, float]] = {}
    for u, v, w in zip(g.edge_u, g.edge_v, g.edge_w):
        lu, lv = int(labels[u]), int(labels[v])
        if lu == lv:
            continue
        for a, b in ((lu, lv), (lv, lu)):
            if a not in kept_rank and b in kept_rank:
                targets = link.setdefault(a, {})
                targets[b] = targets.get(b, 0.0) + float(w)
    out = np.empty(g.n, dtype=np.int64)
    for i, lab in enumerate(labels):
        lab = int(lab)
        if lab in kept_rank:
            out[i] = kept_rank[lab]
        else:
            ties = link.get(lab)
            if ties:
                best_w = max(ties.values())
                target = min(b for b, wt in ties.items() if wt == best_w)
                out[i] = kept_rank[target]
            else:
                out[i] = 0  # no edges to any kept community: largest absorbs it
    return out


def greedy_modularity(
    g: Graph, k: int, params: dict[str, Any], seed: int, max_epochs: int, patience: int
) -> tuple[np.ndarray, int]:
    """Agglomerative modularity maximisation: merge the cluster pair with the
    best modularity gain until exactly k clusters remain."""
    _check_params(params, {})
    if g.edge_count == 0:
        # nothing to agglomerate; spread nodes over k clusters round-robin
        return np.arange(g.n, dtype=np.int64) % k, 0
    m = g.total_weight
    comm = np.arange(g.n, dtype=np.int64)
    degree = g.weighted_degrees().astype(np.float64)
    inter: dict[int, dict[int, float]] = {v: {} for v in range(g.n)}
    for u, v, w in zip(g.edge_u, g.edge_v, g.edge_w):
        inter[int(u)][int(v)] = inter[int(u)].get(int(v), 0.0) + float(w)
        inter[int(v)][int(u)] = inter[int(v)].get(int(u), 0.0) + float(w)
    alive = set(range(g.n))
    deg = {v: float(degree[v]) for v in alive}

    def gain(a: int, b: int) -> float:
        w_ab = inter[a].get(b, 0.0)
        return w_ab / m - deg[a] * deg[b] / (2.0 * m * m)

    heap: list[tuple[float, int, int]] = []
    for a in sorted(alive):
        for b in sorted(inter[a]):
            if a < b:
                heapq.heappush(heap, (-gain(a, b), a, b))
    merges = 0
    n_clusters = len(alive)
    while n_clusters > k:
        pair: tuple[int, int] | None = None
        while heap:
            negg, a, b = heapq.heappop(heap)
            if a in alive and b in alive and inter[a].get(b) is not None:
                if abs(-negg - gain(a, b)) > 1e-12:
                    heapq.heappush(heap, (-gain(a, b), a, b))
                    continue
                pair = (a, b)
                break
        if pair is None:
            # disconnected remainder: merge the two clusters with the
            # smallest degree product (the least-negative gain)
            rest = sorted(alive, key=lambda v: (deg[v], v))
            pair = (min(rest[0], rest[1]), max(rest[0], rest[1]))
        a, b = pair
        # merge b into a
        for c, w in inter[b].items():
            if c == a:
                continue
            inter[a][c] = inter[a].get(c, 0.0) + w
            inter[c][a] = inter[a][c]
            inter[c].pop(b, None)
        inter[a].pop(b, None)
        deg[a] += deg[b]
        alive.discard(b)
        del inter[b]
        for c in sorted(inter[a]):
            if c in alive and c != a:
                lo, hi = (a, c) if a < c else (c, a)
                heapq.heappush(heap, (-gain(lo, hi), lo, hi))
        comm[comm == b] = a
        merges += 1
        n_clusters -= 1
    # compact ids to [0, k)
    uniq = sorted(set(int(c) for c in comm))
    remap = {lab: i for i, lab in enumerate(uniq)}
    return np.array([remap[int(c)] for c in comm], dtype=np.int64), merges


def random_partition(
    g: Graph, k: int, params: dict[str, Any], seed: int, max_epochs: int, patience: int
) -> tuple[np.ndarray, int]:
    """Uniform random assignment; the control baseline."""
    _check_params(params, {})
    return _rng(seed).integers(0, k, size=g.n).astype(np.int64), 0


BUILTINS = {
    "kmeans": kmeans_features,
    "label_propagation": label_propagation,
    "greedy_modularity": greedy_modularity,
    "random": random_partition,
}
