import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keygraph_lab.analytic import ParameterError, SchemeParams
from keygraph_lab.keygraph import (
    CompositeGraph,
    DegreeSummary,
    InvariantViolation,
    KeyRingAssignment,
    Relation,
    build_key_graph,
    build_key_graph_naive,
    compose,
    degree_summary,
    overlap_count,
    read_edge_list,
    row_overlaps,
    sample_channel_graph,
    sample_k_subsets,
    sample_key_rings,
    write_edge_list,
)


def rings(*sets, P=10):
    return KeyRingAssignment(np.array([sorted(s) for s in sets]), P)


def relation_strategy(n_max=12):
    return st.integers(2, n_max).flatmap(
        lambda n: st.sets(
            st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda t: t[0] != t[1])
        ).map(
            lambda pairs: Relation.from_pairs(n, [a for a, _ in pairs], [b for _, b in pairs])
            if pairs
            else Relation.empty(n)
        )
    )


class TestSampling:
    def test_full_pool(self):
        a = sample_key_rings(SchemeParams(5, 7, 7, 1, 0.5), np.random.default_rng(0))
        assert np.array_equal(a.rings, np.tile(np.arange(7), (5, 1)))

    def test_single_key(self):
        a = sample_key_rings(SchemeParams(2, 1, 1, 1, 1.0), np.random.default_rng(0))
        assert a.rings.tolist() == [[0], [0]]
        assert overlap_count(a.rings[0], a.rings[1]) == 1

    @given(st.integers(1, 40).flatmap(lambda K: st.tuples(st.just(K), st.integers(K, 200))), st.integers(0, 2**32))
    @settings(max_examples=60)
    def test_canonical(self, kp, seed):
        K, P = kp
        a = KeyRingAssignment(sample_k_subsets(30, K, P, np.random.default_rng(seed)), P)
        a.validate()
        assert np.array_equal(np.sort(a.rings, axis=1), a.rings)

    def test_key_inclusion_frequency(self):
        n, K, P = 100_000, 5, 40
        r = sample_k_subsets(n, K, P, np.random.default_rng(11))
        p = K / P
        sigma = math.sqrt(n * p * (1 - p))
        for key in (0, 17, 39):
            hits = np.count_nonzero(r == key)
            assert abs(hits - n * p) < 4 * sigma

    def test_all_subsets_equally_likely(self):
        # 3-subsets of 6 keys: 20 outcomes; chi-square against uniform
        n = 60_000
        r = sample_k_subsets(n, 3, 6, np.random.default_rng(5))
        codes = (r * np.array([36, 6, 1])).sum(axis=1)
        _, counts = np.unique(codes, return_counts=True)
        assert counts.size == 20
        chi2 = ((counts - n / 20) ** 2 / (n / 20)).sum()
        assert chi2 < 50  # df = 19; 99.99th percentile is about 49

    def test_seed_determinism(self):
        a = sample_k_subsets(50, 9, 70, np.random.default_rng(3))
        b = sample_k_subsets(50, 9, 70, np.random.default_rng(3))
        assert np.array_equal(a, b)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ParameterError):
            sample_k_subsets(3, 5, 4, np.random.default_rng(0))


class TestOverlap:
    def test_examples(self):
        assert overlap_count([1, 2], [2, 3]) == 1
        assert overlap_count([1, 2], [4, 5]) == 0
        assert overlap_count([0, 3, 8], [0, 3, 8]) == 3

    @given(st.sets(st.integers(0, 50), min_size=1, max_size=10), st.sets(st.integers(0, 50), min_size=1, max_size=10))
    def test_matches_set_intersection(self, a, b):
        assert overlap_count(sorted(a), sorted(b)) == len(a & b)

    def test_row_overlaps(self):
        a = np.array([[1, 2, 3], [4, 5, 6]])
        b = np.array([[2, 3, 9], [0, 1, 7]])
        assert row_overlaps(a, b).tolist() == [2, 0]


class TestKeyGraph:
    def test_examples(self):
        a = rings({1, 2}, {2, 3}, {4, 5})
        g1 = build_key_graph(a, 1)
        assert len(g1) == 1 and (0, 1) in g1
        assert len(build_key_graph(a, 2)) == 0

    def test_matches_naive_random_instance(self):
        a = sample_key_rings(SchemeParams(50, 5, 30, 2, 1.0), np.random.default_rng(1))
        assert build_key_graph(a, 2) == build_key_graph_naive(a, 2)

    def test_matches_naive_many_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n = int(rng.integers(2, 101))
            P = int(rng.integers(1, 60))
            K = int(rng.integers(1, min(P, 8) + 1))
            q = int(rng.integers(1, K + 1))
            a = sample_key_rings(SchemeParams(n, K, P, q, 1.0), rng)
            assert build_key_graph(a, q) == build_key_graph_naive(a, q)

    def test_rejects_q0(self):
        with pytest.raises(ParameterError):
            build_key_graph(rings({1}, {1}), 0)


class TestChannel:
    def test_p_one_complete(self):
        g = sample_channel_graph(7, 1.0, np.random.default_rng(0))
        assert g == Relation.complete(7)
        assert len(sample_channel_graph(3, 1.0, np.random.default_rng(0))) == 3

    @pytest.mark.parametrize("p", [0.03, 0.3])
    def test_pair_frequency(self, p):
        rng = np.random.default_rng(8)
        draws = 100
        hits = sum(len(sample_channel_graph(46, p, rng)) for _ in range(draws))
        pairs = draws * 46 * 45 // 2
        assert abs(hits - pairs * p) < 4 * math.sqrt(pairs * p * (1 - p))

    def test_two_node_graph_frequency(self):
        rng = np.random.default_rng(9)
        T, p = 20_000, 0.7
        hits = sum(len(sample_channel_graph(2, p, rng)) for _ in range(T))
        assert abs(hits - T * p) < 4 * math.sqrt(T * p * (1 - p))

    @pytest.mark.parametrize("p", [0.01, 0.05, 0.5])
    def test_pairs_valid(self, p):
        g = sample_channel_graph(300, p, np.random.default_rng(4))
        i, j = g.pairs()
        assert np.all(i < j) and np.all(j < 300)
        assert np.all(np.diff(g.codes) > 0)

    def test_geometric_path_uniform_over_pairs(self):
        rng = np.random.default_rng(10)
        n, p = 30, 0.05
        counts = np.zeros(n * n)
        for _ in range(4000):
            np.add.at(counts, sample_channel_graph(n, p, rng).codes, 1)
        i, j = np.triu_indices(n, 1)
        per_pair = counts[i * n + j]
        assert abs(per_pair.mean() - 4000 * p) < 0.05 * 4000 * p
        assert counts.sum() == per_pair.sum()  # nothing outside the upper triangle


class TestCompose:
    def test_channel_complete_gives_key_layer(self):
        key = Relation.from_pairs(5, [0, 1], [3, 4])
        assert compose(key, Relation.complete(5)).edges == key

    def test_empty_key_layer(self):
        assert len(compose(Relation.empty(6), Relation.complete(6)).edges) == 0

    def test_complete_key_layer(self):
        ch = Relation.from_pairs(6, [0, 2, 3], [5, 4, 1])
        assert compose(Relation.complete(6), ch).edges == ch

    def test_mismatched_n(self):
        with pytest.raises(ParameterError):
            compose(Relation.empty(4), Relation.empty(5))

    def test_layers_retained(self):
        key = Relation.from_pairs(5, [0, 1, 2], [3, 4, 3])
        ch = Relation.from_pairs(5, [0, 2], [3, 1])
        g = compose(key, ch, keep_layers=True)
        g.validate()
        assert g.key_layer == key and g.channel_layer == ch
        assert g.edges == Relation.from_pairs(5, [0], [3])

    @given(relation_strategy(), st.data())
    def test_commutative_and_idempotent(self, a, data):
        b = data.draw(relation_strategy().filter(lambda r: r.n == a.n) | st.just(Relation.complete(a.n)))
        assert compose(a, b).edges == compose(b, a).edges
        assert compose(a, a).edges == a


class TestDegreeSummary:
    def test_empty(self):
        s = degree_summary(Relation.empty(5))
        assert s.phi(0) == 5 and s.min_degree == 0 and s.edge_count == 0

    def test_complete(self):
        s = degree_summary(CompositeGraph(5, Relation.complete(5)))
        assert s.phi(4) == 5 and s.min_degree == 4 and s.edge_count == 10

    def test_path(self):
        s = degree_summary(Relation.from_pairs(3, [0, 1], [1, 2]))
        assert s.phi(1) == 2 and s.phi(2) == 1 and s.min_degree == 1 and s.edge_count == 2

    @given(relation_strategy(30))
    def test_invariants(self, rel):
        s = degree_summary(rel)
        s.check()
        assert s.n == rel.n
        assert int(np.dot(np.arange(s.histogram.size), s.histogram)) == 2 * s.edge_count
        dense = rel.to_dense()
        assert np.array_equal(dense, dense.T) and not dense.diagonal().any()

    def test_check_catches_bad_summary(self):
        bad = DegreeSummary(np.array([1, 2]), min_degree=0, edge_count=5)
        with pytest.raises(InvariantViolation):
            bad.check()


class TestEdgeListIO:
    @pytest.mark.parametrize("layer", ["composite", "key", "channel"])
    def test_roundtrip(self, tmp_path, layer):
        rel = Relation.from_pairs(9, [0, 3, 2, 7], [8, 4, 6, 8])
        path = tmp_path / "g.txt"
        write_edge_list(path, rel, layer)
        lines = path.read_text().splitlines()
        assert lines[0] == f"n=9 layer={layer}"
        assert lines[1:] == ["0 8", "2 6", "3 4", "7 8"]
        back, got_layer = read_edge_list(path)
        assert back == rel and got_layer == layer

    def test_empty_roundtrip(self, tmp_path):
        path = tmp_path / "e.txt"
        write_edge_list(path, Relation.empty(4), "key")
        back, _ = read_edge_list(path)
        assert back == Relation.empty(4)

    def test_rejects_bad_layer(self, tmp_path):
        with pytest.raises(ValueError):
            write_edge_list(tmp_path / "x.txt", Relation.empty(3), "disk")

    def test_rejects_unordered_pair(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("n=4 layer=key\n2 1\n")
        with pytest.raises(ValueError):
            read_edge_list(path)
