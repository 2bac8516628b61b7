from __future__ import annotations

import numpy as np
import pytest

from cdbench.graphs import Graph, make_graph


def graph_from_edges(n: int, edges, k: int = 2, labels=None, d: int = 2, seed: int = 0) -> Graph:
    rng = np.random.Generator(np.random.PCG64(seed))
    feats = rng.normal(size=(n, d))
    return make_graph(n, edges, feats, labels=labels, k=k)


def random_graph(rng: np.random.Generator, n: int, p: float = 0.4, weighted: bool = False):
    """(n, edge list) for a G(n, p) sample; weights in (0, 1] when asked."""
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                w = float(rng.uniform(0.05, 1.0)) if weighted else 1.0
                edges.append((u, v, w))
    return edges


@pytest.fixture
def triangle() -> Graph:
    return graph_from_edges(3, [(0, 1), (1, 2), (0, 2)], k=2, labels=[0, 0, 1])


@pytest.fixture
def path3() -> Graph:
    return graph_from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def two_triangles_bridge() -> Graph:
    """Two triangles {0,1,2} and {3,4,5} joined by the bridge edge (2, 3)."""
    edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]
    return graph_from_edges(6, edges, k=2, labels=[0, 0, 0, 1, 1, 1])


def write_text_bundle(
    root,
    n: int,
    edges,
    features,
    labels=None,
    k: int = 2,
    name: str = "tiny",
    classes: int | None = None,
):
    """Write bundle files directly, independent of the package's writer."""
    root.mkdir(parents=True, exist_ok=True)
    features = np.asarray(features, dtype=float)
    if classes is None:
        classes = (int(max(labels)) + 1) if labels is not None else 0
    (root / "meta.txt").write_text(
        f"name {name}\nn {n}\nd {features.shape[1]}\nk {k}\nclasses {classes}\n"
    )
    lines = []
    for e in edges:
        lines.append(" ".join(str(x) for x in e))
    (root / "edges.txt").write_text("\n".join(lines) + ("\n" if lines else ""))
    (root / "features.txt").write_text(
        "\n".join(" ".join(repr(float(v)) for v in row) for row in features) + "\n"
    )
    if labels is not None:
        (root / "labels.txt").write_text("\n".join(str(int(l)) for l in labels) + "\n")
    return root
