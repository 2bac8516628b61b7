"""Graph data model, dataset bundle ingestion, node splits, and the two
summary statistics used to characterise datasets.

A dataset bundle is a directory containing:

    meta.txt        key/value lines: name, n, d, k, classes
    edges.txt       one edge per line: "u v" or "u v w" (w defaults to 1.0)
    features.txt    n rows of d whitespace-separated numbers, or
    features.bin    the same matrix as a NumPy ``.npy`` container
    labels.txt      optional, n integer labels, one per line

The byte-exact format is documented in docs/formats.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    LoadError,
    ShapeError,
    SplitError,
    UndefinedInputError,
    ValidationError,
)


@dataclass(frozen=True)
class IngestStats:
    """Bookkeeping from edge-list normalisation.

    ``raw_edge_entries`` is the number of edge records as published (lines in
    edges.txt, or tuples passed to :func:`make_graph`); dataset tables in the
    wild mix directed-entry and undirected counts, so the raw count is what a
    published row can be checked against.
    """

    raw_edge_entries: int
    self_loops_dropped: int
    duplicates_merged: int


@dataclass(frozen=True)
class Graph:
    """Immutable attributed weighted graph, stored undirected.

    Edges are canonicalised to ``u < v`` with weights in (0, 1]; self-loops
    and duplicates are removed at construction time by :func:`make_graph`.
    """

    n: int
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None
    k: int
    name: str = "graph"
    n_classes: int = 0
    directed: bool = False
    ingest: IngestStats = field(default_factory=lambda: IngestStats(0, 0, 0))

    @property
    def edge_count(self) -> int:
        """Number of undirected edges after normalisation."""
        return int(self.edge_u.size)

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def total_weight(self) -> float:
        """Sum of edge weights, each undirected edge counted once."""
        return float(self.edge_w.sum())

    def weighted_degrees(self) -> np.ndarray:
        degs = np.zeros(self.n, dtype=np.float64)
        np.add.at(degs, self.edge_u, self.edge_w)
        np.add.at(degs, self.edge_v, self.edge_w)
        return degs

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Adjacency in CSR form: (indptr, indices, weights).

        Neighbour lists are sorted ascending. Cached after first build; the
        graph is immutable so concurrent readers are safe.
        """
        cached = getattr(self, "_csr_cache", None)
        if cached is not None:
            return cached
        src = np.concatenate([self.edge_u, self.edge_v])
        dst = np.concatenate([self.edge_v, self.edge_u])
        wts = np.concatenate([self.edge_w, self.edge_w])
        order = np.lexsort((dst, src))
        src, dst, wts = src[order], dst[order], wts[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(np.bincount(src, minlength=self.n))
        cached = (indptr, dst, wts)
        object.__setattr__(self, "_csr_cache", cached)
        return cached

    def neighbors(self, v: int) -> np.ndarray:
        indptr, indices, _ = self.csr()
        return indices[indptr[v] : indptr[v + 1]]


@dataclass(frozen=True)
class NodeSplits:
    """Disjoint train/validation/test node sets covering all nodes."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int

    def check(self, n: int) -> None:
        parts = [self.train, self.validation, self.test]
        total = np.concatenate(parts)
        if total.size != n or np.unique(total).size != n:
            raise ValidationError("splits must partition all node ids exactly")


@dataclass(frozen=True)
class DatasetSummary:
    """Counts plus the two per-dataset statistics.

    ``edges`` reports the raw entry count from ingestion (the convention the
    dataset was published under); ``undirected_edges`` is the normalised
    count.
    """

    name: str
    nodes: int
    edges: int
    undirected_edges: int
    features: int
    classes: int
    avg_clustering_coefficient: float
    mean_closeness_centrality: float


def make_graph(
    n: int,
    edges: Iterable[tuple[int, int, float] | tuple[int, int]],
    features: np.ndarray | Sequence[Sequence[float]],
    labels: Sequence[int] | np.ndarray | None = None,
    k: int = 2,
    name: str = "graph",
    n_classes: int | None = None,
) -> Graph:
    """Normalising constructor: validates ids/weights, drops self-loops,
    merges duplicate undirected edges keeping the maximum weight."""
    if n < 0:
        raise ValidationError("node count must be non-negative")
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim == 1:
        feats = feats.reshape(n, -1) if n else feats.reshape(0, 0)
    if feats.shape[0] != n:
        raise ShapeError(
            f"feature matrix has {feats.shape[0]} rows for {n} nodes"
        )

    raw = 0
    loops = 0
    merged: dict[tuple[int, int], float] = {}
    dup = 0
    for entry in edges:
        if len(entry) == 2:
            u, v = entry  # type: ignore[misc]
            w = 1.0
        else:
            u, v, w = entry  # type: ignore[misc]
        raw += 1
        u, v = int(u), int(v)
        w = float(w)
        if not (0 <= u < n and 0 <= v < n):
            raise ValidationError(f"edge endpoint ({u}, {v}) outside [0, {n})")
        if not (0.0 < w <= 1.0):
            raise ValidationError(f"edge weight {w} outside (0, 1]")
        if u == v:
            loops += 1
            continue
        key = (u, v) if u < v else (v, u)
        if key in merged:
            dup += 1
            merged[key] = max(merged[key], w)
        else:
            merged[key] = w

    if merged:
        keys = sorted(merged)
        eu = np.array([a for a, _ in keys], dtype=np.int64)
        ev = np.array([b for _, b in keys], dtype=np.int64)
        ew = np.array([merged[key] for key in keys], dtype=np.float64)
    else:
        eu = np.empty(0, dtype=np.int64)
        ev = np.empty(0, dtype=np.int64)
        ew = np.empty(0, dtype=np.float64)

    lab = None
    classes = 0
    if labels is not None:
        lab = np.asarray(labels, dtype=np.int64)
        if lab.shape != (n,):
            raise ShapeError(f"label vector has shape {lab.shape}, expected ({n},)")
        classes = n_classes if n_classes is not None else (int(lab.max()) + 1 if n else 0)
        if n and (lab.min() < 0 or lab.max() >= classes):
            raise ValidationError(
                f"labels must lie in [0, {classes}); saw range "
                f"[{lab.min()}, {lab.max()}]"
            )
    if k < 1:
        raise ValidationError("target cluster count k must be >= 1")

    return Graph(
        n=n,
        edge_u=eu,
        edge_v=ev,
        edge_w=ew,
        features=feats,
        labels=lab,
        k=int(k),
        name=name,
        n_classes=classes,
        ingest=IngestStats(raw, loops, dup),
    )


def _parse_meta(path: Path) -> dict[str, str]:
    meta: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise LoadError(f"{path}:{lineno}: expected 'key value'")
        meta[parts[0]] = parts[1].strip()
    return meta


def load_dataset(path: str | Path, format: str = "edge-list-bundle") -> Graph:
    """Load a dataset bundle directory into a :class:`Graph`."""
    if format != "edge-list-bundle":
        raise LoadError(f"unknown bundle format {format!r}")
    root = Path(path)
    if not root.is_dir():
        raise LoadError(f"dataset bundle directory not found: {root}")
    meta_path = root / "meta.txt"
    edges_path = root / "edges.txt"
    if not meta_path.is_file():
        raise LoadError(f"missing meta.txt in {root}")
    if not edges_path.is_file():
        raise LoadError(f"missing edges.txt in {root}")

    meta = _parse_meta(meta_path)
    try:
        n = int(meta["n"])
        d = int(meta["d"])
        k = int(meta["k"])
        classes = int(meta.get("classes", "0"))
    except KeyError as exc:
        raise LoadError(f"meta.txt missing key {exc}") from exc
    except ValueError as exc:
        raise LoadError(f"meta.txt has a non-integer value: {exc}") from exc
    name = meta.get("name", root.name)

    edges: list[tuple[int, int, float]] = []
    for lineno, line in enumerate(edges_path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise LoadError(f"{edges_path}:{lineno}: expected 'u v [w]'")
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise LoadError(f"{edges_path}:{lineno}: {exc}") from exc
        edges.append((u, v, w))

    bin_path = root / "features.bin"
    txt_path = root / "features.txt"
    if bin_path.is_file():
        try:
            feats = np.load(bin_path, allow_pickle=False)
        except Exception as exc:
            raise LoadError(f"cannot read {bin_path}: {exc}") from exc
        feats = np.asarray(feats, dtype=np.float64)
    elif txt_path.is_file():
        try:
            feats = np.loadtxt(txt_path, dtype=np.float64, ndmin=2)
        except Exception as exc:
            raise LoadError(f"cannot read {txt_path}: {exc}") from exc
        if feats.size == 0:
            feats = feats.reshape(0, d)
    else:
        raise LoadError(f"missing features.txt/features.bin in {root}")
    if feats.ndim != 2 or feats.shape != (n, d):
        raise ShapeError(
            f"feature matrix shape {feats.shape} does not match meta (n={n}, d={d})"
        )

    labels = None
    labels_path = root / "labels.txt"
    if labels_path.is_file():
        try:
            labels = np.loadtxt(labels_path, dtype=np.int64, ndmin=1)
        except Exception as exc:
            raise LoadError(f"cannot read {labels_path}: {exc}") from exc
        if labels.shape != (n,):
            raise ShapeError(
                f"label vector has {labels.shape[0]} rows for {n} nodes"
            )

    return make_graph(
        n,
        edges,
        feats,
        labels=labels,
        k=k,
        name=name,
        n_classes=classes if labels is not None else None,
    )


def split_nodes(
    g: Graph, train_frac: float, val_frac_of_train: float, seed: int
) -> NodeSplits:
    """Shuffle node ids (a pure function of ``seed``) and carve off the test
    set first, then validation from the remainder."""
    if not (0.0 < train_frac < 1.0) or not (0.0 < val_frac_of_train < 1.0):
        raise ValidationError("split fractions must lie in (0, 1)")
    n_test = int(round(g.n * (1.0 - train_frac)))
    remainder = g.n - n_test
    n_val = int(round(remainder * (1.0 - val_frac_of_train)))
    n_train = remainder - n_val
    if min(n_test, n_val, n_train) < 1:
        raise SplitError(
            f"graph with {g.n} nodes cannot give every split at least one node"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(g.n)
    test = np.sort(perm[:n_test])
    validation = np.sort(perm[n_test : n_test + n_val])
    train = np.sort(perm[n_test + n_val :])
    return NodeSplits(train=train, validation=validation, test=test, seed=seed)


def avg_clustering_coefficient(g: Graph) -> float:
    """Mean local clustering coefficient; nodes of degree < 2 contribute 0.

    Edge weights are ignored: the statistic is a property of the unweighted
    topology.
    """
    if g.n == 0:
        raise UndefinedInputError("clustering coefficient of an empty graph")
    indptr, indices, _ = g.csr()
    total = 0.0
    for v in range(g.n):
        nbrs = indices[indptr[v] : indptr[v + 1]]
        deg = nbrs.size
        if deg < 2:
            continue
        links = 0
        for a in nbrs:
            links += np.intersect1d(
                indices[indptr[a] : indptr[a + 1]], nbrs, assume_unique=True
            ).size
        # each neighbour-neighbour edge counted twice in the loop above
        total += links / (deg * (deg - 1))
    return total / g.n


def _bfs_reach(indptr: np.ndarray, indices: np.ndarray, source: int, n: int) -> tuple[int, int]:
    """(sum of shortest-path distances, reachable count incl. source)."""
    visited = np.zeros(n, dtype=bool)
    visited[source] = True
    frontier = np.array([source], dtype=np.int64)
    depth = 0
    dist_sum = 0
    reached = 1
    while frontier.size:
        depth += 1
        parts = [indices[indptr[u] : indptr[u + 1]] for u in frontier]
        nxt = np.unique(np.concatenate(parts)) if parts else np.empty(0, np.int64)
        nxt = nxt[~visited[nxt]]
        if nxt.size == 0:
            break
        visited[nxt] = True
        dist_sum += depth * int(nxt.size)
        reached += int(nxt.size)
        frontier = nxt
    return dist_sum, reached


def mean_closeness_centrality(g: Graph, reachable_only: bool = False) -> float:
    """Mean closeness centrality over all nodes, unweighted shortest paths.

    Disconnected graphs use the component-scaled convention by default:
    closeness(v) = ((r-1)/(N-1)) * ((r-1)/sum_d) with r the number of nodes
    reachable from v. ``reachable_only=True`` drops the (r-1)/(N-1) scaling.
    """
    if g.n == 0:
        raise UndefinedInputError("closeness centrality of an empty graph")
    if g.n == 1:
        return 0.0
    indptr, indices, _ = g.csr()
    total = 0.0
    for v in range(g.n):
        dist_sum, reached = _bfs_reach(indptr, indices, v, g.n)
        if reached <= 1 or dist_sum == 0:
            continue
        closeness = (reached - 1) / dist_sum
        if not reachable_only:
            closeness *= (reached - 1) / (g.n - 1)
        total += closeness
    return total / g.n


def dataset_summary(g: Graph) -> DatasetSummary:
    """Counts plus both statistics, deterministic for a given graph."""
    if g.n == 0:
        raise UndefinedInputError("summary of an empty graph")
    classes = g.n_classes if g.labels is not None else 0
    return DatasetSummary(
        name=g.name,
        nodes=g.n,
        edges=g.ingest.raw_edge_entries,
        undirected_edges=g.edge_count,
        features=g.feature_dim,
        classes=classes,
        avg_clustering_coefficient=avg_clustering_coefficient(g),
        mean_closeness_centrality=mean_closeness_centrality(g),
    )
