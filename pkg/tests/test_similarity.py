import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roadcomm.errors import QueryError
from roadcomm.similarity import (QueryCommunity, candidate_threshold,
                                 community_sim, distance_prune, dot_sim,
                                 score_upper_bound_prune, ub_community_sim)

vec = st.lists(st.integers(0, 9), min_size=4, max_size=4)


class FakeCommunity:
    """Minimal duck-typed community for scoring tests."""

    def __init__(self, per_type_vecs):
        self.per_type_vecs = {h: np.atleast_2d(np.asarray(v, dtype=np.int64))
                              for h, v in per_type_vecs.items()}
        self.per_type_sum = {h: v.sum(axis=0) for h, v in self.per_type_vecs.items()}
        self.per_type_max = {h: v.max(axis=0) for h, v in self.per_type_vecs.items()}


def naive_community_sim(c, q):
    """Independent double-loop evaluation of the average per-type score."""
    n = len(q.per_type_vecs)
    total = 0.0
    for h, qvecs in q.per_type_vecs.items():
        cvecs = c.per_type_vecs.get(h)
        if cvecs is None:
            continue
        s = 0.0
        for cv in cvecs:
            for qv in qvecs:
                s += sum(int(a) * int(b) for a, b in zip(cv, qv))
        total += s / (len(qvecs) * n)
    return total


def rand_group(rng, m=4, max_pats=3, max_count=6):
    k = int(rng.integers(1, max_pats + 1))
    return rng.integers(0, max_count + 1, size=(k, m))


def rand_pair(rng, m=4):
    types = rng.choice([1, 3, 4, 5, 6], size=int(rng.integers(1, 4)), replace=False)
    q = {int(h): rand_group(rng, m) for h in types}
    c = {}
    for h in types:
        if rng.random() < 0.8:
            c[int(h)] = rand_group(rng, m)
    if rng.random() < 0.3:
        c[99] = rand_group(rng, m)  # type absent from the query
    return (FakeCommunity(c),
            QueryCommunity((0.0, 0.0), 1.0, q))


class TestDotSim:
    def test_worked_example_seven(self):
        assert dot_sim((2, 2, 1, 1), (2, 1, 1, 0)) == 7.0

    def test_worked_examples_27_30(self):
        q = (3, 3, 3, 3)
        assert dot_sim((2, 5, 0, 2), q) == 27.0
        assert dot_sim((4, 3, 1, 2), q) == 30.0

    def test_max_vector_bound_36(self):
        c_max = np.maximum((2, 5, 0, 2), (4, 3, 1, 2))
        assert c_max.tolist() == [4, 5, 1, 2]
        assert dot_sim(c_max, (3, 3, 3, 3)) == 36.0

    def test_zero(self):
        assert dot_sim((5, 5, 5, 5), (0, 0, 0, 0)) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            dot_sim((1, 2), (1, 2, 3))

    def test_cosine_mode_normalized(self):
        assert dot_sim((2, 0), (2, 0), mode="cosine") == pytest.approx(1.0)
        assert dot_sim((1, 0), (0, 1), mode="cosine") == 0.0
        assert dot_sim((0, 0), (1, 1), mode="cosine") == 0.0

    @settings(max_examples=150, deadline=None)
    @given(vec, vec)
    def test_symmetric(self, a, b):
        assert dot_sim(a, b) == dot_sim(b, a)

    @settings(max_examples=150, deadline=None)
    @given(vec, vec, st.integers(0, 3))
    def test_monotone_in_components(self, a, b, idx):
        bigger = list(a)
        bigger[idx] += 1
        assert dot_sim(bigger, b) >= dot_sim(a, b)


class TestCommunitySim:
    def test_single_term_reduction(self):
        v = np.array([1, 2, 3, 4])
        c = FakeCommunity({3: [v]})
        q = QueryCommunity((0, 0), 1.0, {3: [v]})
        assert community_sim(c, q) == dot_sim(v, v) / 1

    def test_three_type_structure(self):
        # community with type counts (1, 2, 1) vs query with (1, 1, 2):
        # score must equal (sim_edge + sim_delta + sim_rect) / 3 term by term
        c = FakeCommunity({1: [(2, 1, 1, 0)],
                           3: [(2, 5, 0, 2), (4, 3, 1, 2)],
                           4: [(1, 1, 1, 1)]})
        q = QueryCommunity((0, 0), 1.0, {1: [(2, 2, 1, 1)],
                                         3: [(3, 3, 3, 3)],
                                         4: [(1, 0, 1, 0), (0, 2, 0, 2)]})
        sim_edge = 7.0 / 1
        sim_delta = (27.0 + 30.0) / 1
        sim_rect = (2.0 + 4.0) / 2
        assert community_sim(c, q) == pytest.approx((sim_edge + sim_delta + sim_rect) / 3)

    def test_missing_type_contributes_zero(self):
        c = FakeCommunity({3: [(1, 1, 1, 1)]})
        q = QueryCommunity((0, 0), 1.0, {3: [(1, 1, 1, 1)], 4: [(9, 9, 9, 9)]})
        assert community_sim(c, q) == pytest.approx(dot_sim((1, 1, 1, 1), (1, 1, 1, 1)) / 2)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(123)
        for _ in range(300):
            c, q = rand_pair(rng)
            assert community_sim(c, q) == pytest.approx(naive_community_sim(c, q))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        c = FakeCommunity({3: [(1, 2, 0, 1), (4, 0, 1, 1), (2, 2, 2, 2)]})
        q = QueryCommunity((0, 0), 1.0, {3: [(1, 1, 1, 1), (0, 3, 0, 3)]})
        base = community_sim(c, q)
        for _ in range(5):
            perm = rng.permutation(3)
            c2 = FakeCommunity({3: c.per_type_vecs[3][perm]})
            assert community_sim(c2, q) == pytest.approx(base)

    def test_empty_query_raises(self):
        with pytest.raises(QueryError):
            QueryCommunity((0, 0), 1.0, {})


class TestUpperBound:
    def test_single_pattern_tight(self):
        v = np.array([2, 3, 1, 0])
        c = FakeCommunity({3: [v]})
        q = QueryCommunity((0, 0), 1.0, {3: [v]})
        assert ub_community_sim(c, q) == community_sim(c, q)

    def test_fig7_bound_dominates_members(self):
        c = FakeCommunity({3: [(2, 5, 0, 2), (4, 3, 1, 2)]})
        q = QueryCommunity((0, 0), 1.0, {3: [(3, 3, 3, 3)]})
        ub = ub_community_sim(c, q)
        assert ub == 2 * 36.0  # |c_h| * dot(c_max, q_max) / n
        assert ub >= community_sim(c, q)
        # the literal textbook form is NOT an upper bound here
        lit = ub_community_sim(c, q, literal_eq5=True)
        assert lit == 36.0
        assert lit < community_sim(c, q) == 57.0

    def test_dominates_exact_randomized(self):
        rng = np.random.default_rng(99)
        for _ in range(2000):
            c, q = rand_pair(rng)
            assert ub_community_sim(c, q) >= community_sim(c, q) - 1e-12

    def test_cosine_mode_still_sound(self):
        rng = np.random.default_rng(100)
        for _ in range(500):
            c, q = rand_pair(rng)
            assert (ub_community_sim(c, q, mode="cosine")
                    >= community_sim(c, q, mode="cosine") - 1e-12)


class TestPrunePredicates:
    def test_ub_prune(self):
        assert score_upper_bound_prune(0.4, 0.6)
        assert not score_upper_bound_prune(0.6, 0.6)  # boundary keeps

    def test_theorem1_soundness(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            c, q = rand_pair(rng)
            theta = float(rng.uniform(0, 50))
            if score_upper_bound_prune(ub_community_sim(c, q), theta):
                assert community_sim(c, q) < theta

    def test_distance_prune_fig4(self):
        # k=2, second-largest qualifying distance 0.4: 0.7 and 0.9 pruned
        kth = 0.4
        assert distance_prune(0.7, kth)
        assert distance_prune(0.9, kth)
        assert not distance_prune(0.2, kth)
        assert distance_prune(0.4, kth)  # boundary prunes

    def test_candidate_threshold(self):
        assert candidate_threshold(0.6, 2, 4) == pytest.approx(0.3)
        assert candidate_threshold(0.6, 1, 1) == pytest.approx(0.6)
        assert candidate_threshold(0.6, 1, 0) == math.inf

    def test_candidate_threshold_validation(self):
        with pytest.raises(ValueError):
            candidate_threshold(0.5, 0, 3)
