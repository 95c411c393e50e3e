"""Online top-k community search: candidate retrieval, pruning cascade,
top-k maintenance, and the index-free baseline that doubles as the
correctness oracle.

Candidates are processed in ascending distance order from the query point,
so the distance-pruning rule becomes a termination rule: once k answers are
in hand, every remaining candidate is at least as far as the k-th and can be
skipped without scoring.
"""

from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import QueryError
from .geometry import mindist_point_mbr
from .index import ARTree, CommunityStore, IoCounter, SearchIndex, circle_range_query
from .patterns import UnitPattern, mindist_point_pattern
from .similarity import (QueryCommunity, candidate_threshold, community_sim,
                         distance_prune, score_upper_bound_prune,
                         ub_community_sim)


def euclid(ax: float, ay: float, bx: float, by: float) -> float:
    """Plain sqrt(dx^2 + dy^2).

    Every ranked distance (engine, baseline, oracles) must go through the
    same formula: library hypot variants differ in the last ulp, which is
    enough to flip exact entry-list comparisons.
    """
    dx = ax - bx
    dy = ay - by
    return math.sqrt(dx * dx + dy * dy)


@dataclass
class QueryStats:
    candidates_generated: int = 0
    pruned_by_ub: int = 0
    pruned_by_exact: int = 0
    pruned_by_distance: int = 0
    unexamined: int = 0
    io_count: int = 0
    wall_time: float = 0.0

    def pruned_total(self) -> int:
        """Communities skipped by the pruning rules (never exactly scored)."""
        return self.pruned_by_ub + self.pruned_by_distance + self.unexamined

    def to_dict(self) -> dict:
        return {
            "candidates_generated": self.candidates_generated,
            "pruned_by_ub": self.pruned_by_ub,
            "pruned_by_exact": self.pruned_by_exact,
            "pruned_by_distance": self.pruned_by_distance,
            "unexamined": self.unexamined,
            "io_count": self.io_count,
            "wall_time": self.wall_time,
        }


@dataclass
class TopKResult:
    entries: list[tuple[int, float, float]]  # (center vertex, score, distance)
    stats: QueryStats = field(default_factory=QueryStats)

    def centers(self) -> list[int]:
        return [c for c, _, _ in self.entries]

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"center": c, "score": s, "distance": d} for c, s, d in self.entries
            ],
            "stats": self.stats.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def extract_query_community(patterns: list[UnitPattern], center, r: float,
                            tree: ARTree | None = None,
                            stats: IoCounter | None = None) -> QueryCommunity:
    """Build the query community from the patterns intersecting disc(center, r).

    With a tree the disc query goes through the index (node accesses land in
    `stats`); otherwise it is a linear scan over all patterns.
    """
    if r <= 0:
        raise QueryError(f"query radius must be > 0, got {r}")
    if tree is not None:
        ids = sorted(circle_range_query(tree, center, r, stats=stats))
    else:
        ids = [p.id for p in patterns
               if mindist_point_pattern(center, p) <= r]
    if not ids:
        raise QueryError(f"no unit pattern within {r} of {tuple(center)}")
    per_type: dict[int, list[np.ndarray]] = {}
    per_ids: dict[int, list[int]] = {}
    for pid in ids:
        p = patterns[pid]
        per_type.setdefault(p.ptype, []).append(p.vec)
        per_ids.setdefault(p.ptype, []).append(pid)
    return QueryCommunity(
        center=(float(center[0]), float(center[1])),
        radius=r,
        per_type_vecs={h: np.array(v, dtype=np.int64) for h, v in per_type.items()},
        pattern_ids={h: tuple(v) for h, v in per_ids.items()},
    )


def retrieve_candidates(tree: ARTree, ptype: int, q_vecs, t: float,
                        mode: str = "dot", stats: IoCounter | None = None,
                        store: CommunityStore | None = None,
                        theta: float | None = None) -> set[int]:
    """Type-h patterns whose summed similarity against all q_vecs is >= t.

    Internal entries are pruned with the per-type max-vector bound; in dot
    mode a subtree whose per-type min vector already clears the threshold is
    accepted whole with one node access. Passing (store, theta) tightens the
    per-pattern threshold to theta*|q_h|/max{|c_h| : communities containing
    the pattern}, which is still sound for candidate generation.
    """
    io = stats if stats is not None else IoCounter()
    out: set[int] = set()
    if t == math.inf:
        return out
    q = np.atleast_2d(np.asarray(q_vecs, dtype=np.int64))
    q_count = q.shape[0]
    q_sum = q.sum(axis=0)
    ppmc = store.per_pattern_max_count if (store is not None and theta is not None) else None

    def leaf_threshold(ids: np.ndarray):
        if ppmc is None:
            return t
        return np.maximum(t, theta * q_count / ppmc[ids])

    def shortcut_threshold(node) -> float:
        if ppmc is None:
            return t
        c = node.info.min_pattern_max_count.get(ptype, 0)
        return math.inf if c == 0 else max(t, theta * q_count / c)

    def leaf_scores(ids: np.ndarray) -> np.ndarray:
        vecs = tree.vec_matrix[ids]
        if mode == "dot":
            return (vecs @ q_sum).astype(np.float64)
        vn = np.linalg.norm(vecs, axis=1)
        qn = np.linalg.norm(q, axis=1)
        dots = vecs.astype(np.float64) @ q.astype(np.float64).T
        denom = np.outer(vn, qn)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(denom > 0.0, dots / denom, 0.0)
        return cos.sum(axis=1)

    stack = [tree.root]
    while stack:
        node = stack.pop()
        io.add()
        if node.is_leaf:
            ids = node.type_ids.get(ptype)
            if ids is None:
                continue
            passing = ids[leaf_scores(ids) >= leaf_threshold(ids)]
            out.update(passing.tolist())
        else:
            for child in node.children:
                vmax = child.info.vmax.get(ptype)
                if vmax is None:
                    continue
                ub = float(np.dot(vmax, q_sum)) if mode == "dot" else float(q_count)
                if ub < t:
                    continue
                if mode == "dot":
                    lb = float(np.dot(child.info.vmin[ptype], q_sum))
                    if lb >= shortcut_threshold(child):
                        io.add()  # whole subtree qualifies: one access
                        out.update(child.type_ids[ptype].tolist())
                        continue
                stack.append(child)
    return out


def assemble_candidates(cand_sets, store: CommunityStore, coords: np.ndarray,
                        v_q) -> tuple[np.ndarray, np.ndarray]:
    """Candidate community centers, deduplicated and sorted by (distance, id).

    cand_sets is any iterable of per-type pattern-id sets; the result unions
    the inverted lists of every candidate pattern.
    """
    pids: set[int] = set()
    for s in cand_sets:
        pids |= set(s)
    if not pids:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)
    arrs = [store.inverted[pid] for pid in pids]
    verts = np.unique(np.concatenate(arrs))
    dx = coords[verts, 0] - v_q[0]
    dy = coords[verts, 1] - v_q[1]
    d = np.sqrt(dx * dx + dy * dy)
    order = np.lexsort((verts, d))
    return verts[order], d[order]


def select_topk(items, k: int, theta: float) -> list[tuple[int, float, float]]:
    """Top-k maintenance on (center, score, distance) triples.

    Keeps entries with score >= theta, nearest first, ties broken by the
    smaller center id.
    """
    qual = sorted((d, c, s) for c, s, d in items if s >= theta)
    return [(c, s, d) for d, c, s in qual[:k]]


def examine_candidates(store: CommunityStore, Q: QueryCommunity, verts, dists,
                       k: int, theta: float, mode: str = "dot") -> TopKResult:
    """Pruning cascade over distance-ordered candidates.

    Upper-bound prune before exact scoring; once k answers are held, the
    first candidate at or beyond the k-th distance ends the scan (every
    later one is at least as far).
    """
    stats = QueryStats(candidates_generated=len(verts))
    entries: list[tuple[int, float, float]] = []
    kth_d = math.inf
    for i in range(len(verts)):
        v, d = int(verts[i]), float(dists[i])
        if len(entries) == k and distance_prune(d, kth_d):
            stats.pruned_by_distance += 1
            stats.unexamined = len(verts) - i - 1
            break
        C = store.communities[v]
        if score_upper_bound_prune(ub_community_sim(C, Q, mode), theta):
            stats.pruned_by_ub += 1
            continue
        s = community_sim(C, Q, mode)
        if s < theta:
            stats.pruned_by_exact += 1
            continue
        entries.append((v, s, d))
        if len(entries) == k:
            kth_d = d
    return TopKResult(entries, stats)


def topk_search(g, tree: ARTree, store: CommunityStore, Q: QueryCommunity,
                v_q, k: int, theta: float, mode: str = "dot",
                io: IoCounter | None = None) -> TopKResult:
    """Indexed top-k search with distance-driven incremental retrieval.

    Tree nodes are visited best-first by distance from the query point, with
    the per-type max-vector bound filtering subtrees that cannot hold any
    candidate pattern. Discovered patterns pull their communities into a
    distance heap; a community is examined (upper bound, then exact score)
    only once the retrieval frontier guarantees nothing nearer can appear
    (centers lie within the community radius of each member pattern). Once k
    answers are held, retrieval stops as soon as the frontier passes the
    k-th distance plus the radius: everything beyond is distance-pruned.
    """
    if k < 1:
        raise QueryError(f"k must be >= 1, got {k}")
    if theta < 0:
        raise QueryError(f"theta must be >= 0, got {theta}")
    t0 = time.perf_counter()
    io = io if io is not None else IoCounter()
    r = store.radius
    coords = g.coords
    vx, vy = float(v_q[0]), float(v_q[1])

    thresholds: dict[int, float] = {}
    q_sums: dict[int, np.ndarray] = {}
    q_counts: dict[int, int] = {}
    for h, qvecs in Q.per_type_vecs.items():
        thresholds[h] = candidate_threshold(theta, qvecs.shape[0],
                                            store.max_count_per_type.get(h, 0))
        q_sums[h] = qvecs.sum(axis=0)
        q_counts[h] = qvecs.shape[0]
    active_types = [h for h, t in thresholds.items() if t != math.inf]
    ppmc = store.per_pattern_max_count

    stats = QueryStats()
    entries: list[tuple[int, float, float]] = []
    kth_d = math.inf
    discovered: set[int] = set()
    cand_heap: list[tuple[float, int]] = []       # (center distance, vertex)
    emitted = np.zeros(len(tree.patterns), dtype=bool)

    def node_passes(node, h) -> bool:
        vmax = node.info.vmax.get(h)
        if vmax is None:
            return False
        ub = float(np.dot(vmax, q_sums[h])) if mode == "dot" else float(q_counts[h])
        return ub >= thresholds[h]

    def node_full_pass(node, h) -> bool:
        if mode != "dot":
            return False
        c = node.info.min_pattern_max_count.get(h, 0)
        limit = math.inf if c == 0 else max(thresholds[h],
                                            theta * q_counts[h] / c)
        return float(np.dot(node.info.vmin[h], q_sums[h])) >= limit

    def emit(pids) -> None:
        for pid in pids:
            if emitted[pid]:
                continue
            emitted[pid] = True
            for v in store.inverted[pid].tolist():
                if v not in discovered:
                    discovered.add(v)
                    heapq.heappush(cand_heap,
                                   (euclid(coords[v, 0], coords[v, 1], vx, vy), v))

    def leaf_emit(node) -> None:
        for h in active_types:
            ids = node.type_ids.get(h)
            if ids is None:
                continue
            scores = tree.vec_matrix[ids] @ q_sums[h] if mode == "dot" else \
                _cosine_scores(tree.vec_matrix[ids], Q.per_type_vecs[h])
            if theta > 0:
                lim = np.maximum(thresholds[h], theta * q_counts[h] / ppmc[ids])
            else:
                lim = thresholds[h]
            emit(ids[scores >= lim].tolist())

    finished = False

    def examine_until(limit: float) -> None:
        # finalize communities strictly below the frontier guarantee
        nonlocal kth_d, finished
        while cand_heap and cand_heap[0][0] < limit:
            d, v = heapq.heappop(cand_heap)
            if len(entries) == k and distance_prune(d, kth_d):
                stats.pruned_by_distance += 1
                stats.unexamined = len(cand_heap)
                cand_heap.clear()
                finished = True
                return
            C = store.communities[v]
            if score_upper_bound_prune(ub_community_sim(C, Q, mode), theta):
                stats.pruned_by_ub += 1
                continue
            s = community_sim(C, Q, mode)
            if s < theta:
                stats.pruned_by_exact += 1
                continue
            entries.append((v, s, d))
            if len(entries) == k:
                kth_d = d

    frontier: list[tuple[float, int, object]] = []
    seq = 0
    if active_types:
        root = tree.root
        heapq.heappush(frontier, (mindist_point_mbr(vx, vy, root.info.mbr), seq, root))
    while frontier and not finished:
        d_node, _, node = heapq.heappop(frontier)
        examine_until(d_node - r)
        if finished:
            break
        if len(entries) == k and d_node - r > kth_d:
            stats.unexamined += len(cand_heap)
            cand_heap.clear()
            break
        io.add()
        if node.is_leaf:
            leaf_emit(node)
            continue
        for child in node.children:
            relevant = [h for h in active_types if node_passes(child, h)]
            if not relevant:
                continue
            d_child = mindist_point_mbr(vx, vy, child.info.mbr)
            if len(entries) == k and d_child - r > kth_d:
                continue  # no community in there can beat the k-th distance
            if all(node_full_pass(child, h) for h in relevant):
                io.add()  # whole subtree resolved from its aggregates
                for h in relevant:
                    emit(child.type_ids[h].tolist())
                continue
            seq += 1
            heapq.heappush(frontier, (d_child, seq, child))
    if not finished:
        examine_until(math.inf)
    stats.candidates_generated = (len(entries) + stats.pruned_by_ub
                                  + stats.pruned_by_exact
                                  + stats.pruned_by_distance + stats.unexamined)
    stats.io_count = io.count
    stats.wall_time = time.perf_counter() - t0
    return TopKResult(entries, stats)


def _cosine_scores(vecs: np.ndarray, q: np.ndarray) -> np.ndarray:
    vn = np.linalg.norm(vecs, axis=1)
    qn = np.linalg.norm(q, axis=1)
    dots = vecs.astype(np.float64) @ q.astype(np.float64).T
    denom = np.outer(vn, qn)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0.0, dots / denom, 0.0)
    return cos.sum(axis=1)


def baseline_topk(g, patterns, store: CommunityStore, Q: QueryCommunity,
                  v_q, k: int, theta: float, mode: str = "dot") -> TopKResult:
    """Index-free competitor: exactly scores every community, then selects.

    Also the correctness oracle for topk_search."""
    if k < 1:
        raise QueryError(f"k must be >= 1, got {k}")
    t0 = time.perf_counter()
    coords = g.coords
    dx = coords[:, 0] - v_q[0]
    dy = coords[:, 1] - v_q[1]
    dists = np.sqrt(dx * dx + dy * dy)
    items = []
    for v in range(g.vertex_count):
        s = community_sim(store.communities[v], Q, mode)
        items.append((v, s, float(dists[v])))
    entries = select_topk(items, k, theta)
    stats = QueryStats(candidates_generated=g.vertex_count)
    stats.wall_time = time.perf_counter() - t0
    return TopKResult(entries, stats)


def run_query(index: SearchIndex, center, k: int, theta: float,
              v_q=None, radius: float | None = None,
              with_oracle: bool = False) -> tuple[TopKResult, TopKResult | None]:
    """End-to-end online phase: extract Q at `center`, search, optionally
    cross-check against the baseline. Query-extraction node accesses are
    included in the result's io_count."""
    r = index.radius if radius is None else radius
    io = IoCounter()
    Q = extract_query_community(index.patterns, center, r, tree=index.tree, stats=io)
    v_q = tuple(center) if v_q is None else tuple(v_q)
    res = topk_search(index.graph, index.tree, index.store, Q, v_q, k, theta,
                      mode=index.scoring, io=io)
    base = None
    if with_oracle:
        base = baseline_topk(index.graph, index.patterns, index.store, Q, v_q,
                             k, theta, mode=index.scoring)
    return res, base
