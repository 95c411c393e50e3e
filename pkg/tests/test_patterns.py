import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_graph
from roadcomm.patterns import (DELTA, EDGE, HEXAGON, PENTAGON, RECTANGLE,
                               UnitPattern, classify, detect_unit_patterns,
                               fingerprint, mindist_point_pattern,
                               patterns_to_json, type_name)
from roadcomm.synth import generate_graph


def type_multiset(patterns):
    return Counter(p.ptype for p in patterns)


def find_bridges(g):
    """Tarjan bridge finding; independent of the face traversal."""
    n = g.vertex_count
    disc = [-1] * n
    low = [0] * n
    bridges = []
    timer = [0]
    stack = [(0, -1, iter(g.adjacency[0]))]
    disc[0] = low[0] = timer[0]
    timer[0] += 1
    parent_edge = {0: -1}
    while stack:
        v, pe, it = stack[-1]
        advanced = False
        for nbr, eid in it:
            if eid == pe:
                continue
            if disc[nbr] == -1:
                disc[nbr] = low[nbr] = timer[0]
                timer[0] += 1
                stack.append((nbr, eid, iter(g.adjacency[nbr])))
                advanced = True
                break
            low[v] = min(low[v], disc[nbr])
        if not advanced:
            stack.pop()
            if stack:
                pv = stack[-1][0]
                low[pv] = min(low[pv], low[v])
                if low[v] > disc[pv]:
                    bridges.append(pe)
    return bridges


class TestClassify:
    def test_definitional(self):
        assert classify(3, True) == DELTA
        assert classify(4, True) == RECTANGLE
        assert classify(5, True) == PENTAGON
        assert classify(6, True) == HEXAGON
        assert classify(1, False) == EDGE
        assert classify(9, True) == 9

    def test_cyclic_too_short(self):
        with pytest.raises(ValueError):
            classify(2, True)

    def test_names(self):
        assert type_name(DELTA) == "delta"
        assert type_name(9) == "polygon-9"


class TestFingerprint:
    def test_rotation(self):
        assert fingerprint([2, 0, 1]) == fingerprint([0, 1, 2])

    def test_reflection(self):
        assert fingerprint([0, 1, 2]) == fingerprint([0, 2, 1])

    def test_different(self):
        assert fingerprint([0, 1, 2]) != fingerprint([0, 1, 3])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 50), min_size=2, max_size=9, unique=True),
           st.integers(0, 8), st.booleans())
    def test_invariance_property(self, cyc, rot, flip):
        other = cyc[rot % len(cyc):] + cyc[:rot % len(cyc)]
        if flip:
            other = other[::-1]
        assert fingerprint(cyc) == fingerprint(other)


class TestDetection:
    def test_triangle(self, triangle):
        pats = detect_unit_patterns(triangle)
        assert type_multiset(pats) == {DELTA: 1}
        assert len(pats[0].cycle) == 3

    def test_grid_2x2(self, grid2x2):
        pats = detect_unit_patterns(grid2x2)
        assert type_multiset(pats) == {RECTANGLE: 4}

    def test_triangle_with_dangle(self, triangle_with_dangle):
        pats = detect_unit_patterns(triangle_with_dangle)
        assert type_multiset(pats) == {DELTA: 1, EDGE: 1}
        edge_p = [p for p in pats if p.ptype == EDGE][0]
        assert set(edge_p.cycle) == {0, 3}

    def test_single_edge(self):
        g = make_graph([(0, 0), (1, 0)], [(0, 1)])
        assert type_multiset(detect_unit_patterns(g)) == {EDGE: 1}

    def test_path_graph_all_edges(self):
        g = make_graph([(0, 0), (1, 0), (2, 1)], [(0, 1), (1, 2)])
        assert type_multiset(detect_unit_patterns(g)) == {EDGE: 2}

    def test_community_fixture_multiset(self, community_graph):
        pats = detect_unit_patterns(community_graph)
        assert type_multiset(pats) == {EDGE: 1, DELTA: 2, RECTANGLE: 1}

    def test_square_with_inner_dangle(self):
        # dangle hanging inside the square face: square survives, dangle is
        # an Edge pattern
        g = make_graph([(0, 0), (4, 0), (4, 4), (0, 4), (2, 2)],
                       [(0, 1), (1, 2), (2, 3), (3, 0), (0, 4)])
        pats = detect_unit_patterns(g)
        assert type_multiset(pats) == {RECTANGLE: 1, EDGE: 1}

    def test_cyclic_appendage_inside_face(self):
        # a small triangle connected by a bridge, hanging inside a big square:
        # both faces must be found, plus the bridge edge pattern
        g = make_graph(
            [(0, 0), (10, 0), (10, 10), (0, 10), (4, 4), (6, 4), (5, 6)],
            [(0, 1), (1, 2), (2, 3), (3, 0),
             (4, 5), (5, 6), (6, 4), (0, 4)])
        pats = detect_unit_patterns(g)
        assert type_multiset(pats) == {RECTANGLE: 1, DELTA: 1, EDGE: 1}

    def test_nested_blocks_at_cut_vertex(self):
        # small triangle inside a big one, sharing exactly one vertex: the
        # pinched annulus face contributes the big cycle, not a merged walk
        g = make_graph([(0, 0), (10, 0), (0, 10), (2, 1), (1, 2)],
                       [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)])
        pats = detect_unit_patterns(g)
        assert type_multiset(pats) == {DELTA: 2}

    def test_empty_graph_patterns(self):
        g = make_graph([(0, 0)], [])
        assert detect_unit_patterns(g) == []

    def test_vec_is_edge_sum(self, community_graph):
        pats = detect_unit_patterns(community_graph)
        for p in pats:
            want = community_graph.poi_counts[list(p.edge_ids)].sum(axis=0)
            assert np.array_equal(p.vec, want)

    def test_mbr_bounds_vertices(self, community_graph):
        for p in detect_unit_patterns(community_graph):
            for v in p.cycle:
                x, y = community_graph.point(v)
                assert p.mbr.min_x <= x <= p.mbr.max_x
                assert p.mbr.min_y <= y <= p.mbr.max_y

    def test_pattern_vec_double_counting(self, grid2x2):
        g = make_graph([(x, y) for y in range(3) for x in range(3)],
                       [(y * 3 + x, y * 3 + x + 1) for y in range(3) for x in range(2)]
                       + [(y * 3 + x, (y + 1) * 3 + x) for y in range(2) for x in range(3)],
                       m=2, pois={i: (1, 1) for i in range(12)})
        pats = detect_unit_patterns(g)
        total_pattern = sum(int(p.vec.sum()) for p in pats)
        total_edges = int(g.poi_counts.sum())
        assert total_pattern >= total_edges  # shared edges count twice

    def test_relabeling_invariance(self, community_graph):
        g = community_graph
        perm = np.array([3, 5, 0, 7, 1, 6, 2, 4])
        inv = np.argsort(perm)
        coords = g.coords[inv]
        uv = perm[g.edge_uv]
        pats1 = detect_unit_patterns(g)
        g2 = make_graph(coords, uv.tolist(), m=4,
                        pois={e: g.poi_counts[e] for e in range(g.edge_count)})
        pats2 = detect_unit_patterns(g2)
        keys1 = sorted(fingerprint([int(perm[v]) for v in p.cycle]) for p in pats1)
        keys2 = sorted(fingerprint(list(p.cycle)) for p in pats2)
        assert keys1 == keys2

    def test_euler_identity_on_synthetic(self):
        for seed in range(5):
            g, _ = generate_graph(300, extent=30.0, seed=seed)
            pats = detect_unit_patterns(g)
            counts = type_multiset(pats)
            cyclic = sum(v for k, v in counts.items() if k != EDGE)
            assert cyclic == g.edge_count - g.vertex_count + 1
            assert counts.get(EDGE, 0) == len(find_bridges(g))

    def test_non_bridge_edges_in_at_most_two_patterns(self, small_index):
        g = small_index.graph
        use = Counter()
        for p in small_index.patterns:
            for e in p.edge_ids:
                use[e] += 1
        bridges = set(find_bridges(g))
        for e, c in use.items():
            assert c <= 2
            if e in bridges:
                assert c == 1

    def test_json_round_trip_fields(self, community_graph):
        pats = detect_unit_patterns(community_graph)
        doc = json.loads(patterns_to_json(pats))
        assert len(doc) == len(pats)
        assert doc[0].keys() == {"id", "type", "type_name", "cycle", "edge_ids",
                                 "vec", "mbr"}


class TestMindist:
    def test_point_on_pattern(self, triangle):
        p = detect_unit_patterns(triangle)[0]
        assert mindist_point_pattern((1.0, 0.0), p) == 0.0

    def test_perpendicular(self, square):
        p = detect_unit_patterns(square)[0]
        assert mindist_point_pattern((0.5, -2.0), p) == pytest.approx(2.0)

    def test_matches_sampling_oracle(self):
        rng = np.random.default_rng(4)
        g, _ = generate_graph(80, extent=10.0, seed=4)
        pats = detect_unit_patterns(g)
        for _ in range(60):
            pt = tuple(rng.uniform(-2, 12, 2))
            p = pats[int(rng.integers(0, len(pats)))]
            got = mindist_point_pattern(pt, p)
            best = np.inf
            for x1, y1, x2, y2 in p.segs:
                ts = np.linspace(0, 1, 2500)
                xs, ys = x1 + ts * (x2 - x1), y1 + ts * (y2 - y1)
                best = min(best, float(np.min(np.hypot(xs - pt[0], ys - pt[1]))))
            assert got == pytest.approx(best, abs=1e-6)
