import math

import numpy as np
import pytest

from roadcomm.errors import QueryError
from roadcomm.index import IoCounter, build_search_index
from roadcomm.patterns import mindist_point_pattern
from roadcomm.query import (assemble_candidates, baseline_topk, euclid,
                            extract_query_community, retrieve_candidates,
                            run_query, select_topk, topk_search)
from roadcomm.similarity import QueryCommunity, community_sim, dot_sim
from roadcomm.synth import generate_graph


def brute_filter(patterns, ptype, q_vecs, t):
    """Linear-scan oracle for candidate retrieval."""
    q = np.atleast_2d(np.asarray(q_vecs, dtype=np.int64))
    out = set()
    for p in patterns:
        if p.ptype != ptype:
            continue
        score = sum(dot_sim(p.vec, qv) for qv in q)
        if score >= t:
            out.add(p.id)
    return out


def oracle_answer(index, Q, v_q, k, theta):
    """From-scratch reference: score every community, filter, sort, cut."""
    g = index.graph
    items = []
    for v in range(g.vertex_count):
        s = community_sim(index.store.communities[v], Q)
        x, y = g.point(v)
        items.append((v, s, euclid(x, y, v_q[0], v_q[1])))
    qual = sorted((d, v, s) for v, s, d in items if s >= theta)
    return [(v, s, d) for d, v, s in qual[:k]]


class TestExtract:
    def test_fixture_counts(self, community_graph):
        from roadcomm.patterns import detect_unit_patterns
        pats = detect_unit_patterns(community_graph)
        Q = extract_query_community(pats, community_graph.point(3), 0.5)
        assert Q.type_counts() == {1: 1, 3: 2, 4: 1}

    def test_huge_radius_all_patterns(self, small_index):
        Q = extract_query_community(small_index.patterns, (15.0, 15.0), 1e6)
        assert sum(Q.type_counts().values()) == len(small_index.patterns)

    def test_empty_disc_raises(self, small_index):
        with pytest.raises(QueryError):
            extract_query_community(small_index.patterns, (1e5, 1e5), 0.5)

    def test_tree_and_linear_agree(self, small_index):
        rng = np.random.default_rng(0)
        for _ in range(20):
            c = tuple(rng.uniform(0, 30, 2))
            try:
                q1 = extract_query_community(small_index.patterns, c, 2.0)
            except QueryError:
                with pytest.raises(QueryError):
                    extract_query_community(small_index.patterns, c, 2.0,
                                            tree=small_index.tree)
                continue
            q2 = extract_query_community(small_index.patterns, c, 2.0,
                                         tree=small_index.tree)
            assert q1.pattern_ids == q2.pattern_ids


class TestRetrieve:
    def test_t_zero_returns_all_of_type(self, small_index):
        pats = small_index.patterns
        some_type = pats[len(pats) // 2].ptype
        got = retrieve_candidates(small_index.tree, some_type,
                                  [np.zeros(4, dtype=np.int64)], 0.0)
        assert got == {p.id for p in pats if p.ptype == some_type}

    def test_inf_sentinel_empty(self, small_index):
        got = retrieve_candidates(small_index.tree, 3,
                                  [np.ones(4, dtype=np.int64)], math.inf)
        assert got == set()

    def test_matches_linear_scan(self, small_index):
        rng = np.random.default_rng(1)
        pats = small_index.patterns
        types = sorted({p.ptype for p in pats})
        for trial in range(30):
            ptype = types[trial % len(types)]
            q_vecs = rng.integers(0, 5, size=(int(rng.integers(1, 4)), 4))
            t = float(rng.uniform(0, 60))
            got = retrieve_candidates(small_index.tree, ptype, q_vecs, t)
            assert got == brute_filter(pats, ptype, q_vecs, t)

    def test_per_pattern_thresholds_subset_and_sound(self, small_index):
        # tightened thresholds can only drop patterns, and every pattern of a
        # theta-qualifying community of that type must survive
        rng = np.random.default_rng(2)
        pats = small_index.patterns
        theta = 5.0
        for ptype in sorted({p.ptype for p in pats}):
            q_vecs = rng.integers(0, 5, size=(2, 4))
            t = theta * 2 / max(small_index.store.max_count_per_type.get(ptype, 1), 1)
            loose = retrieve_candidates(small_index.tree, ptype, q_vecs, t)
            tight = retrieve_candidates(small_index.tree, ptype, q_vecs, t,
                                        store=small_index.store, theta=theta)
            assert tight <= loose

    def test_io_counted(self, small_index):
        io = IoCounter()
        retrieve_candidates(small_index.tree, 3, [np.ones(4, dtype=np.int64)],
                            0.0, stats=io)
        assert io.count >= 1


class TestAssemble:
    def test_empty(self, small_index):
        verts, dists = assemble_candidates([], small_index.store,
                                           small_index.graph.coords, (0, 0))
        assert len(verts) == 0 and len(dists) == 0

    def test_single_pattern_lookup(self, small_index):
        pid = 0
        verts, dists = assemble_candidates([{pid}], small_index.store,
                                           small_index.graph.coords, (0.0, 0.0))
        assert verts.tolist() == sorted(
            small_index.store.inverted[pid].tolist(),
            key=lambda v: (euclid(*small_index.graph.point(v), 0.0, 0.0), v))

    def test_sorted_by_distance_then_id(self, small_index):
        pids = set(range(0, len(small_index.patterns), 3))
        v_q = (12.0, 18.0)
        verts, dists = assemble_candidates([pids], small_index.store,
                                           small_index.graph.coords, v_q)
        pairs = list(zip(dists.tolist(), verts.tolist()))
        assert pairs == sorted(pairs)
        assert len(set(verts.tolist())) == len(verts)


class TestSelectTopK:
    def test_fig5_scenario(self):
        # scores (0.7, 0.5, 0.35, 0.5), distances (0.6, 0.2, 0.55, 0.4),
        # theta=0.5, k=1: community 2 wins (qualifying and closest)
        items = [(1, 0.7, 0.6), (2, 0.5, 0.2), (3, 0.35, 0.55), (4, 0.5, 0.4)]
        assert select_topk(items, k=1, theta=0.5) == [(2, 0.5, 0.2)]

    def test_k_larger_than_qualifying(self):
        items = [(1, 0.9, 1.0), (2, 0.1, 0.1), (3, 0.8, 2.0)]
        got = select_topk(items, k=10, theta=0.5)
        assert got == [(1, 0.9, 1.0), (3, 0.8, 2.0)]

    def test_tie_break_smaller_id(self):
        items = [(9, 0.9, 1.0), (4, 0.8, 1.0)]
        assert select_topk(items, k=1, theta=0.5) == [(4, 0.8, 1.0)]


@pytest.fixture(scope="module")
def inst():
    g, _ = generate_graph(500, extent=35.0, seed=21)
    return build_search_index(g, radius=3.0)


class TestTopKSearch:
    def test_oracle_equality_random_queries(self, inst):
        rng = np.random.default_rng(3)
        for _ in range(25):
            v = int(rng.integers(0, inst.graph.vertex_count))
            center = inst.graph.point(v)
            k = int(rng.integers(1, 8))
            theta = float(rng.uniform(0, 40))
            res, _ = run_query(inst, center, k, theta)
            Q = extract_query_community(inst.patterns, center, inst.radius)
            assert res.entries == oracle_answer(inst, Q, center, k, theta)

    def test_baseline_equals_oracle(self, inst):
        rng = np.random.default_rng(4)
        for _ in range(10):
            v = int(rng.integers(0, inst.graph.vertex_count))
            center = inst.graph.point(v)
            Q = extract_query_community(inst.patterns, center, inst.radius)
            res = baseline_topk(inst.graph, inst.patterns, inst.store, Q,
                                center, 5, 10.0)
            assert res.entries == oracle_answer(inst, Q, center, 5, 10.0)

    def test_entries_sorted_and_stats_consistent(self, inst):
        rng = np.random.default_rng(5)
        for _ in range(15):
            v = int(rng.integers(0, inst.graph.vertex_count))
            res, _ = run_query(inst, inst.graph.point(v), 5, 8.0)
            d = [e[2] for e in res.entries]
            assert d == sorted(d)
            s = res.stats
            kept = len(res.entries)
            assert (kept + s.pruned_by_ub + s.pruned_by_exact
                    + s.pruned_by_distance + s.unexamined) == s.candidates_generated

    def test_pruned_never_in_oracle_answer(self, inst):
        # every community the pruning rules skip must be absent from the
        # oracle's answer set
        rng = np.random.default_rng(6)
        for _ in range(10):
            v = int(rng.integers(0, inst.graph.vertex_count))
            center = inst.graph.point(v)
            k, theta = 4, 12.0
            Q = extract_query_community(inst.patterns, center, inst.radius)
            oracle = {e[0] for e in oracle_answer(inst, Q, center, k, theta)}
            res, _ = run_query(inst, center, k, theta)
            got = {e[0] for e in res.entries}
            assert oracle == got

    def test_monotone_prefix_in_k(self, inst):
        v = 17
        center = inst.graph.point(v)
        prev = None
        for k in (1, 2, 3, 5, 8):
            res, _ = run_query(inst, center, k, 6.0)
            if prev is not None:
                assert res.entries[:len(prev)] == prev
            prev = res.entries

    def test_fewer_than_k_qualifying(self, inst):
        res, _ = run_query(inst, inst.graph.point(0), 10, 1e9)
        assert res.entries == []

    def test_arbitrary_vq(self, inst):
        center = inst.graph.point(10)
        v_q = (0.0, 0.0)
        res, _ = run_query(inst, center, 3, 5.0, v_q=v_q)
        Q = extract_query_community(inst.patterns, center, inst.radius)
        assert res.entries == oracle_answer(inst, Q, v_q, 3, 5.0)

    def test_invalid_k_theta(self, inst):
        Q = extract_query_community(inst.patterns, inst.graph.point(0), inst.radius)
        with pytest.raises(QueryError):
            topk_search(inst.graph, inst.tree, inst.store, Q,
                        inst.graph.point(0), 0, 0.5)
        with pytest.raises(QueryError):
            topk_search(inst.graph, inst.tree, inst.store, Q,
                        inst.graph.point(0), 1, -0.5)

    def test_result_json_round_trip(self, inst):
        import json
        res, _ = run_query(inst, inst.graph.point(3), 2, 5.0)
        doc = json.loads(res.to_json())
        assert [tuple(e.values()) for e in doc["entries"]] == [
            (c, s, d) for c, s, d in res.entries]
        assert doc["stats"]["io_count"] == res.stats.io_count
