"""Dataset bundle generation and retrieval.

The harness core only *loads* bundles; everything that creates them lives
here: synthetic planted-partition graphs, the embedded Zachary karate club
network (the small real-world dataset that needs no download), conversion
from numpy triples (adj/feat/label) as distributed by public graph
clustering collections, and a best-effort downloader for those collections.
"""

from __future__ import annotations

import io
import urllib.error
import urllib.request
import zipfile
from pathlib import Path

import numpy as np

from .errors import LoadError

# Zachary's karate club: 34 members, 78 friendship ties, split into the two
# factions observed after the club fission (0 = instructor's side).
KARATE_EDGES = [
    (0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (0, 8), (0, 10),
    (0, 11), (0, 12), (0, 13), (0, 17), (0, 19), (0, 21), (0, 31), (1, 2),
    (1, 3), (1, 7), (1, 13), (1, 17), (1, 19), (1, 21), (1, 30), (2, 3),
    (2, 7), (2, 8), (2, 9), (2, 13), (2, 27), (2, 28), (2, 32), (3, 7),
    (3, 12), (3, 13), (4, 6), (4, 10), (5, 6), (5, 10), (5, 16), (6, 16),
    (8, 30), (8, 32), (8, 33), (9, 33), (13, 33), (14, 32), (14, 33),
    (15, 32), (15, 33), (18, 32), (18, 33), (19, 33), (20, 32), (20, 33),
    (22, 32), (22, 33), (23, 25), (23, 27), (23, 29), (23, 32), (23, 33),
    (24, 25), (24, 27), (24, 31), (25, 31), (26, 29), (26, 33), (27, 33),
    (28, 31), (28, 33), (29, 32), (29, 33), (30, 32), (30, 33), (31, 32),
    (31, 33), (32, 33),
]
KARATE_LABELS = [
    0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 1,
    1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
]

# Public dataset collection used by recent graph clustering work; each
# dataset ships as a zip of <name>_adj.npy / <name>_feat.npy / <name>_label.npy.
PUBLIC_DATASET_BASE = (
    "https://github.com/yueliu1999/Awesome-Deep-Graph-Clustering/raw/main/dataset"
)
PUBLIC_DATASETS = [
    "amac", "amap", "bat", "citeseer", "cora", "dblp", "eat", "uat",
    "texas", "wisc", "cornell",
]


def write_bundle(
    path: str | Path,
    name: str,
    n: int,
    edges: list[tuple[int, int]] | list[tuple[int, int, float]],
    features: np.ndarray,
    labels: np.ndarray | list[int] | None,
    k: int,
    binary_features: bool = False,
) -> Path:
    """Write a dataset bundle directory in the documented layout."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    features = np.asarray(features, dtype=np.float64)
    classes = 0
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        classes = int(labels.max()) + 1 if labels.size else 0
    lines = [
        f"name {name}",
        f"n {n}",
        f"d {features.shape[1]}",
        f"k {k}",
        f"classes {classes}",
    ]
    (root / "meta.txt").write_text("\n".join(lines) + "\n")
    with (root / "edges.txt").open("w") as fh:
        for entry in edges:
            if len(entry) == 3 and float(entry[2]) != 1.0:
                fh.write(f"{entry[0]} {entry[1]} {entry[2]!r}\n")
            else:
                fh.write(f"{entry[0]} {entry[1]}\n")
    if binary_features:
        np.save(root / "features.bin", features)
        # numpy appends .npy; rename to the documented file name
        (root / "features.bin.npy").rename(root / "features.bin")
    else:
        with (root / "features.txt").open("w") as fh:
            for row in features:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    if labels is not None:
        with (root / "labels.txt").open("w") as fh:
            for lab in labels:
                fh.write(f"{int(lab)}\n")
    return root


def planted_partition_graph(
    name: str,
    n_per_cluster: int,
    k: int,
    p_in: float,
    p_out: float,
    feature_dim: int,
    feature_separation: float,
    seed: int,
) -> tuple[int, list[tuple[int, int]], np.ndarray, np.ndarray]:
    """Sample a planted-partition graph with Gaussian feature blobs.

    Returns (n, edges, features, labels); ground truth is the planted block
    structure. ``feature_separation`` is the distance between blob centres
    in units of the within-blob standard deviation.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    n = n_per_cluster * k
    labels = np.repeat(np.arange(k), n_per_cluster)
    edges: list[tuple[int, int]] = []
    for u in range(n):
        for v in range(u + 1, n):
            p = p_in if labels[u] == labels[v] else p_out
            if rng.random() < p:
                edges.append((u, v))
    centers = rng.normal(0.0, 1.0, size=(k, feature_dim))
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    centers = centers / norms * feature_separation
    features = centers[labels] + rng.normal(0.0, 1.0, size=(n, feature_dim))
    return n, edges, features, labels


def make_planted_bundle(
    dest: str | Path,
    name: str,
    separable: bool,
    seed: int,
    n_per_cluster: int = 50,
    k: int = 3,
) -> Path:
    """One of the two standard synthetic instances: clearly separable
    (recoverable by both feature and structure clustering) or noisy."""
    if separable:
        n, edges, feats, labels = planted_partition_graph(
            name, n_per_cluster, k, p_in=0.30, p_out=0.01,
            feature_dim=8, feature_separation=8.0, seed=seed,
        )
    else:
        n, edges, feats, labels = planted_partition_graph(
            name, n_per_cluster, k, p_in=0.12, p_out=0.06,
            feature_dim=8, feature_separation=1.5, seed=seed,
        )
    return write_bundle(dest, name, n, edges, feats, labels, k)


def make_karate_bundle(dest: str | Path) -> Path:
    """Zachary karate club with adjacency rows as features, k = 2."""
    n = 34
    features = np.zeros((n, n), dtype=np.float64)
    for u, v in KARATE_EDGES:
        features[u, v] = 1.0
        features[v, u] = 1.0
    return write_bundle(dest, "karate", n, list(KARATE_EDGES), features, KARATE_LABELS, k=2)


def make_conformance_bundle(dest: str | Path) -> Path:
    """Tiny fixed dataset for runner conformance checks: two 5-cliques
    joined by one edge, blob features."""
    edges = [(u, v) for u in range(5) for v in range(u + 1, 5)]
    edges += [(u, v) for u in range(5, 10) for v in range(u + 1, 10)]
    edges.append((4, 5))
    rng = np.random.Generator(np.random.PCG64(7))
    features = np.concatenate(
        [
            rng.normal(-3.0, 0.3, size=(5, 4)),
            rng.normal(3.0, 0.3, size=(5, 4)),
        ]
    )
    labels = [0] * 5 + [1] * 5
    return write_bundle(dest, "conformance", 10, edges, features, labels, k=2)


def convert_npy_triple(
    adj: np.ndarray, feat: np.ndarray, label: np.ndarray, name: str, dest: str | Path
) -> Path:
    """Convert an (adjacency, features, labels) numpy triple to a bundle.

    Every nonzero adjacency entry becomes one edge record, so the raw entry
    count matches the collection's published edge number; weights are
    clipped into (0, 1].
    """
    adj = np.asarray(adj)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise LoadError(f"adjacency for {name} is not square: {adj.shape}")
    n = adj.shape[0]
    rows, cols = np.nonzero(adj)
    edges: list[tuple[int, int, float]] = []
    for u, v in zip(rows, cols):
        w = float(adj[u, v])
        edges.append((int(u), int(v), min(max(w, 1e-9), 1.0)))
    label = np.asarray(label).astype(np.int64).ravel()
    uniq = np.unique(label)
    remap = {int(c): i for i, c in enumerate(uniq)}
    label = np.array([remap[int(c)] for c in label], dtype=np.int64)
    k = len(uniq)
    return write_bundle(
        dest, name, n, edges, np.asarray(feat, dtype=np.float64), label, k,
        binary_features=True,
    )


def generate_offline_datasets(dest_dir: str | Path) -> list[Path]:
    """The three desk-scale benchmark datasets that need no network."""
    dest = Path(dest_dir)
    return [
        make_planted_bundle(dest / "planted_easy", "planted_easy", separable=True, seed=1001),
        make_planted_bundle(dest / "planted_hard", "planted_hard", separable=False, seed=1002),
        make_karate_bundle(dest / "karate"),
    ]


def fetch_public_dataset(name: str, dest_dir: str | Path, base_url: str = PUBLIC_DATASET_BASE) -> Path:
    """Download one public dataset zip and convert it to a bundle.

    Network access is required; failures raise LoadError with the cause so
    the CLI can report which datasets could not be retrieved.
    """
    url = f"{base_url}/{name}.zip"
    try:
        with urllib.request.urlopen(url, timeout=60) as resp:
            payload = resp.read()
    except (urllib.error.URLError, OSError) as exc:
        raise LoadError(f"cannot download {url}: {exc}") from exc
    try:
        archive = zipfile.ZipFile(io.BytesIO(payload))
        members = {Path(m).name: m for m in archive.namelist()}
        adj = np.load(io.BytesIO(archive.read(members[f"{name}_adj.npy"])), allow_pickle=False)
        feat = np.load(io.BytesIO(archive.read(members[f"{name}_feat.npy"])), allow_pickle=False)
        label = np.load(io.BytesIO(archive.read(members[f"{name}_label.npy"])), allow_pickle=False)
    except (KeyError, zipfile.BadZipFile, ValueError) as exc:
        raise LoadError(f"unexpected archive layout for {name}: {exc}") from exc
    return convert_npy_triple(adj, feat, label, name, Path(dest_dir) / name)
