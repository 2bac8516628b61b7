from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdbench.errors import (
    LoadError,
    ShapeError,
    SplitError,
    UndefinedInputError,
    ValidationError,
)
from cdbench.graphs import (
    avg_clustering_coefficient,
    dataset_summary,
    load_dataset,
    make_graph,
    mean_closeness_centrality,
    split_nodes,
)

from conftest import graph_from_edges, random_graph, write_text_bundle
from oracles import bfs_closeness, triangle_clustering_coefficient


class TestMakeGraph:
    def test_basic_construction(self):
        g = graph_from_edges(4, [(0, 1), (1, 2)], k=2)
        assert g.n == 4
        assert g.edge_count == 2
        assert g.feature_dim == 2

    def test_duplicate_edges_merge_with_max_weight(self):
        g = make_graph(
            3,
            [(0, 1, 0.2), (1, 0, 0.7), (1, 2, 0.5)],
            np.zeros((3, 1)),
        )
        assert g.edge_count == 2
        assert g.ingest.duplicates_merged == 1
        idx = list(zip(g.edge_u.tolist(), g.edge_v.tolist()))
        assert g.edge_w[idx.index((0, 1))] == 0.7

    def test_self_loops_dropped_and_counted(self):
        g = make_graph(3, [(0, 0), (0, 1), (2, 2)], np.zeros((3, 1)))
        assert g.edge_count == 1
        assert g.ingest.self_loops_dropped == 2
        assert g.ingest.raw_edge_entries == 3

    def test_bad_endpoint_rejected(self):
        with pytest.raises(ValidationError):
            make_graph(3, [(0, 5)], np.zeros((3, 1)))

    def test_bad_weight_rejected(self):
        with pytest.raises(ValidationError):
            make_graph(3, [(0, 1, 0.0)], np.zeros((3, 1)))
        with pytest.raises(ValidationError):
            make_graph(3, [(0, 1, 1.5)], np.zeros((3, 1)))

    def test_feature_row_mismatch(self):
        with pytest.raises(ShapeError):
            make_graph(4, [(0, 1)], np.zeros((5, 2)))

    def test_label_out_of_range(self):
        with pytest.raises(ValidationError):
            make_graph(3, [(0, 1)], np.zeros((3, 1)), labels=[0, 1, 7], n_classes=2)


class TestLoader:
    def test_round_trip_tiny_bundle(self, tmp_path):
        root = write_text_bundle(
            tmp_path / "tiny",
            4,
            [(0, 1), (1, 2)],
            np.arange(8).reshape(4, 2),
            labels=[0, 0, 1, 1],
            k=2,
        )
        g = load_dataset(root)
        assert g.n == 4
        assert g.edge_count == 2
        assert g.feature_dim == 2
        assert g.labels.tolist() == [0, 0, 1, 1]
        assert g.k == 2

    def test_missing_directory(self, tmp_path):
        with pytest.raises(LoadError):
            load_dataset(tmp_path / "nope")

    def test_missing_files(self, tmp_path):
        d = tmp_path / "partial"
        d.mkdir()
        (d / "meta.txt").write_text("name x\nn 2\nd 1\nk 2\nclasses 0\n")
        with pytest.raises(LoadError):
            load_dataset(d)

    def test_feature_shape_error(self, tmp_path):
        root = write_text_bundle(
            tmp_path / "bad", 4, [(0, 1)], np.zeros((5, 2)), k=2
        )
        # meta says n=4 but 5 feature rows were written
        (root / "meta.txt").write_text("name bad\nn 4\nd 2\nk 2\nclasses 0\n")
        with pytest.raises(ShapeError):
            load_dataset(root)

    def test_label_out_of_range(self, tmp_path):
        root = write_text_bundle(
            tmp_path / "bad2", 3, [(0, 1)], np.zeros((3, 1)), labels=[0, 1, 2], k=2,
            classes=2,
        )
        with pytest.raises(ValidationError):
            load_dataset(root)

    def test_binary_features(self, tmp_path):
        root = tmp_path / "binfeat"
        root.mkdir()
        (root / "meta.txt").write_text("name b\nn 3\nd 2\nk 2\nclasses 0\n")
        (root / "edges.txt").write_text("0 1\n1 2\n")
        feats = np.arange(6, dtype=float).reshape(3, 2)
        np.save(root / "features.bin", feats)
        (root / "features.bin.npy").rename(root / "features.bin")
        g = load_dataset(root)
        assert np.array_equal(g.features, feats)

    def test_summary_deterministic(self, tmp_path):
        root = write_text_bundle(
            tmp_path / "det", 4, [(0, 1), (1, 2), (2, 3)], np.zeros((4, 2)),
            labels=[0, 0, 1, 1],
        )
        s1 = dataset_summary(load_dataset(root))
        s2 = dataset_summary(load_dataset(root))
        assert s1 == s2


class TestSplits:
    def test_ratios(self):
        g = graph_from_edges(100, [(0, 1)])
        s = split_nodes(g, 0.8, 0.8, seed=42)
        assert len(s.test) == 20
        assert len(s.validation) == 16
        assert len(s.train) == 64

    def test_determinism(self):
        g = graph_from_edges(57, [(0, 1)])
        s1 = split_nodes(g, 0.8, 0.8, seed=24)
        s2 = split_nodes(g, 0.8, 0.8, seed=24)
        assert np.array_equal(s1.train, s2.train)
        assert np.array_equal(s1.validation, s2.validation)
        assert np.array_equal(s1.test, s2.test)

    def test_different_seeds_differ(self):
        g = graph_from_edges(57, [(0, 1)])
        s1 = split_nodes(g, 0.8, 0.8, seed=24)
        s2 = split_nodes(g, 0.8, 0.8, seed=42)
        assert not np.array_equal(s1.test, s2.test)

    def test_too_small(self):
        g = graph_from_edges(2, [(0, 1)])
        with pytest.raises(SplitError):
            split_nodes(g, 0.8, 0.8, seed=1)

    def test_bad_fractions(self):
        g = graph_from_edges(10, [(0, 1)])
        with pytest.raises(ValidationError):
            split_nodes(g, 1.0, 0.8, seed=1)

    @given(n=st.integers(10, 200), seed=st.integers(0, 2**20))
    @settings(max_examples=30, deadline=None)
    def test_partition_property(self, n, seed):
        g = graph_from_edges(n, [(0, 1)])
        s = split_nodes(g, 0.8, 0.8, seed=seed)
        everything = np.concatenate([s.train, s.validation, s.test])
        assert len(everything) == n
        assert len(np.unique(everything)) == n


class TestStatistics:
    def test_triangle_cc(self, triangle):
        assert avg_clustering_coefficient(triangle) == 1.0

    def test_path_cc(self, path3):
        assert avg_clustering_coefficient(path3) == 0.0

    def test_path_closeness(self, path3):
        assert mean_closeness_centrality(path3) == pytest.approx(7 / 9, abs=1e-12)

    def test_triangle_closeness(self, triangle):
        assert mean_closeness_centrality(triangle) == pytest.approx(1.0, abs=1e-12)

    def test_empty_graph_errors(self):
        g = make_graph(0, [], np.zeros((0, 1)))
        with pytest.raises(UndefinedInputError):
            avg_clustering_coefficient(g)
        with pytest.raises(UndefinedInputError):
            mean_closeness_centrality(g)
        with pytest.raises(UndefinedInputError):
            dataset_summary(g)

    def test_disconnected_closeness_component_scaled(self):
        # two disjoint edges on 4 nodes: every node reaches one other at
        # distance 1: closeness = (1/3) * (1/1) each
        g = graph_from_edges(4, [(0, 1), (2, 3)])
        assert mean_closeness_centrality(g) == pytest.approx(1 / 3, abs=1e-12)
        assert mean_closeness_centrality(g, reachable_only=True) == pytest.approx(1.0)

    def test_brute_force_oracles_random_graphs(self):
        rng = np.random.Generator(np.random.PCG64(7))
        for trial in range(25):
            n = int(rng.integers(2, 31))
            edges = random_graph(rng, n, p=float(rng.uniform(0.05, 0.6)))
            g = graph_from_edges(n, edges)
            eset = {(u, v) for u, v, _ in edges}
            assert avg_clustering_coefficient(g) == pytest.approx(
                triangle_clustering_coefficient(n, eset), abs=1e-12
            )
            assert mean_closeness_centrality(g) == pytest.approx(
                bfs_closeness(n, eset), abs=1e-12
            )

    @given(seed=st.integers(0, 2**20))
    @settings(max_examples=20, deadline=None)
    def test_relabeling_invariance(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        n = int(rng.integers(4, 20))
        edges = random_graph(rng, n, p=0.3)
        g = graph_from_edges(n, edges)
        perm = rng.permutation(n)
        remapped = [(int(perm[u]), int(perm[v]), w) for u, v, w in edges]
        g2 = graph_from_edges(n, remapped)
        assert avg_clustering_coefficient(g) == pytest.approx(
            avg_clustering_coefficient(g2), abs=1e-12
        )
        assert mean_closeness_centrality(g) == pytest.approx(
            mean_closeness_centrality(g2), abs=1e-12
        )

    @given(seed=st.integers(0, 2**20))
    @settings(max_examples=20, deadline=None)
    def test_bounds(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        n = int(rng.integers(1, 25))
        edges = random_graph(rng, n, p=0.3)
        g = graph_from_edges(n, edges)
        assert 0.0 <= avg_clustering_coefficient(g) <= 1.0
        assert 0.0 <= mean_closeness_centrality(g) <= 1.0


class TestSummary:
    def test_k3_summary(self, triangle):
        s = dataset_summary(triangle)
        assert s.nodes == 3
        assert s.edges == 3
        assert s.features == 2
        assert s.classes == 2
        assert s.avg_clustering_coefficient == 1.0
        assert s.mean_closeness_centrality == 1.0

    def test_raw_entry_count_reports_published_convention(self, tmp_path):
        # a bundle listing both directions of each edge keeps its raw count
        edges = [(0, 1), (1, 0), (1, 2), (2, 1)]
        root = write_text_bundle(tmp_path / "both", 3, edges, np.zeros((3, 1)))
        s = dataset_summary(load_dataset(root))
        assert s.edges == 4
        assert s.undirected_edges == 2
