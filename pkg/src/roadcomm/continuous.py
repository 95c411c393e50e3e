"""Continuous top-k search along a query line segment.

The moving query disc sweeps a capsule; for every pattern the set of
positions t on the segment with dist(center(t), pattern) <= r is computed in
closed form per member edge and unioned. Interval boundaries become split
events; between consecutive events the query community is constant, so one
top-k run per interval answers the continuous query. Candidate patterns are
retrieved once per distinct query pattern and shared across intervals.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import QueryError
from .geometry import (merge_intervals, moving_point_circle_interval,
                       moving_point_segment_interval)
from .index import (ARTree, CommunityStore, IoCounter, SearchIndex,
                    pattern_segment_dist, segment_range_query)
from .patterns import UnitPattern
from .query import (TopKResult, assemble_candidates, baseline_topk,
                    examine_candidates, retrieve_candidates)
from .similarity import QueryCommunity

T_TOL = 1e-12  # tolerance for comparing positions along the segment


@dataclass(frozen=True)
class QuerySegment:
    q_st: tuple[float, float]
    q_ed: tuple[float, float]
    r: float

    def __post_init__(self) -> None:
        if self.q_st == self.q_ed:
            raise QueryError("query segment endpoints coincide")
        if self.r <= 0:
            raise QueryError(f"radius must be > 0, got {self.r}")

    def point_at(self, t: float) -> tuple[float, float]:
        return (self.q_st[0] + t * (self.q_ed[0] - self.q_st[0]),
                self.q_st[1] + t * (self.q_ed[1] - self.q_st[1]))

    @property
    def length(self) -> float:
        return math.dist(self.q_st, self.q_ed)


@dataclass(frozen=True)
class SplitEvent:
    t: float
    kind: str      # "enter" | "leave"
    pattern: int


@dataclass
class IntervalResult:
    t_lo: float
    t_hi: float
    active_patterns: tuple[int, ...]
    result: TopKResult

    def to_dict(self) -> dict:
        return {
            "interval": [self.t_lo, self.t_hi],
            "active_patterns": list(self.active_patterns),
            "result": self.result.to_dict(),
        }


@dataclass
class CTopKResult:
    intervals: list[IntervalResult]
    io_count: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "intervals": [iv.to_dict() for iv in self.intervals],
            "io_count": self.io_count,
            "wall_time": self.wall_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def pattern_active_intervals(L: QuerySegment, pattern: UnitPattern,
                             per_vertex: bool = False) -> list[tuple[float, float]]:
    """Maximal t-intervals where the moving disc intersects the pattern.

    Default: exact per-member-edge segment distance (matches the mindist
    membership rule). per_vertex=True reproduces the coarser variant that
    intersects circles around the pattern's vertices with the segment, which
    can under-cover edges whose interior passes near the segment.
    """
    pieces: list[tuple[float, float]] = []
    if per_vertex:
        pts = {(x1, y1) for x1, y1, _, _ in pattern.segs}
        pts |= {(x2, y2) for _, _, x2, y2 in pattern.segs}
        for c in sorted(pts):
            iv = moving_point_circle_interval(L.q_st, L.q_ed, c, L.r)
            if iv is not None:
                lo, hi = max(iv[0], 0.0), min(iv[1], 1.0)
                if lo <= hi:
                    pieces.append((lo, hi))
    else:
        for x1, y1, x2, y2 in pattern.segs:
            iv = moving_point_segment_interval(L.q_st, L.q_ed, (x1, y1), (x2, y2), L.r)
            if iv is not None:
                pieces.append(iv)
    merged = merge_intervals(pieces, tol=T_TOL)
    return [(lo, hi) for lo, hi in merged if hi - lo > T_TOL]


def find_split_points(L: QuerySegment, patterns: list[UnitPattern],
                      candidate_ids=None, per_vertex: bool = False,
                      ) -> tuple[list[SplitEvent], dict[int, list[tuple[float, float]]]]:
    """All split events on L, sorted by position, plus per-pattern intervals.

    candidate_ids restricts the scan (e.g. from a capsule range query);
    otherwise every pattern within r of the segment is considered.
    """
    if candidate_ids is None:
        candidate_ids = [p.id for p in patterns
                         if pattern_segment_dist(p, L.q_st, L.q_ed) <= L.r]
    interval_map: dict[int, list[tuple[float, float]]] = {}
    events: list[SplitEvent] = []
    for pid in sorted(candidate_ids):
        ivs = pattern_active_intervals(L, patterns[pid], per_vertex=per_vertex)
        if not ivs:
            continue
        interval_map[pid] = ivs
        for lo, hi in ivs:
            events.append(SplitEvent(lo, "enter", pid))
            events.append(SplitEvent(hi, "leave", pid))
    events.sort(key=lambda e: (e.t, e.kind, e.pattern))
    return events, interval_map


def active_at_start(interval_map: dict[int, list[tuple[float, float]]]) -> set[int]:
    return {pid for pid, ivs in interval_map.items() if ivs[0][0] <= T_TOL}


def sweep_pattern_sets(events: list[SplitEvent], U_0: set[int],
                       ) -> list[tuple[tuple[float, float], frozenset[int]]]:
    """Evolve the active pattern set across the sorted events.

    Coincident positions (within tolerance) collapse into one split point;
    events at the segment boundaries only reconcile the start/end sets. An
    interior leave without a prior enter is an inconsistency and raises.
    """
    cur = set(U_0)
    out: list[tuple[tuple[float, float], frozenset[int]]] = []
    prev = 0.0
    i = 0
    n = len(events)
    while i < n:
        pos = events[i].t
        group = [events[i]]
        i += 1
        while i < n and events[i].t - pos <= T_TOL:
            group.append(events[i])
            i += 1
        if pos <= T_TOL:            # boundary at the start: reconcile only
            for ev in group:
                if ev.kind == "enter":
                    cur.add(ev.pattern)
                else:
                    cur.discard(ev.pattern)
            continue
        if pos >= 1.0 - T_TOL:      # boundary at the end: nothing after it
            continue
        out.append(((prev, pos), frozenset(cur)))
        prev = pos
        for ev in group:
            if ev.kind == "enter":
                if ev.pattern in cur:
                    raise QueryError(f"pattern {ev.pattern} enters twice at t={pos}")
                cur.add(ev.pattern)
            else:
                if ev.pattern not in cur:
                    raise QueryError(f"pattern {ev.pattern} leaves without entering at t={pos}")
                cur.remove(ev.pattern)
    out.append(((prev, 1.0), frozenset(cur)))
    return out


def _query_community_from(patterns: list[UnitPattern], pids, center,
                          r: float) -> QueryCommunity | None:
    if not pids:
        return None
    per_type: dict[int, list[np.ndarray]] = {}
    per_ids: dict[int, list[int]] = {}
    for pid in sorted(pids):
        p = patterns[pid]
        per_type.setdefault(p.ptype, []).append(p.vec)
        per_ids.setdefault(p.ptype, []).append(pid)
    return QueryCommunity(
        center=center, radius=r,
        per_type_vecs={h: np.array(v, dtype=np.int64) for h, v in per_type.items()},
        pattern_ids={h: tuple(v) for h, v in per_ids.items()},
    )


def ctopk_search(g, tree: ARTree, store: CommunityStore, L: QuerySegment,
                 v_q, k: int, theta: float, mode: str = "dot") -> CTopKResult:
    """Continuous top-k: split the segment, retrieve candidates once per
    distinct query pattern, then answer each interval."""
    t_start = time.perf_counter()
    io = IoCounter()
    v_q = tuple(v_q) if v_q is not None else L.point_at(0.5)
    capsule = segment_range_query(tree, L.q_st, L.q_ed, L.r, stats=io)
    events, interval_map = find_split_points(L, tree.patterns,
                                             candidate_ids=capsule)
    sweep = sweep_pattern_sets(events, active_at_start(interval_map))

    # One retrieval per distinct query pattern, shared across intervals.
    cached: dict[int, set[int]] = {}
    for pid in sorted(interval_map):
        p = tree.patterns[pid]
        max_c = store.max_count_per_type.get(p.ptype, 0)
        t_p = math.inf if max_c == 0 else theta / max_c
        cached[pid] = retrieve_candidates(tree, p.ptype, [p.vec], t_p,
                                          mode=mode, stats=io,
                                          store=store, theta=theta)

    intervals: list[IntervalResult] = []
    for (lo, hi), active in sweep:
        pids = tuple(sorted(active))
        Q = _query_community_from(tree.patterns, pids,
                                  L.point_at((lo + hi) / 2.0), L.r)
        if Q is None:
            intervals.append(IntervalResult(lo, hi, pids, TopKResult([])))
            continue
        verts, dists = assemble_candidates((cached[p] for p in pids), store,
                                           g.coords, v_q)
        t0 = time.perf_counter()
        res = examine_candidates(store, Q, verts, dists, k, theta, mode)
        res.stats.wall_time = time.perf_counter() - t0
        intervals.append(IntervalResult(lo, hi, pids, res))
    return CTopKResult(intervals, io_count=io.count,
                       wall_time=time.perf_counter() - t_start)


def baseline_ctopk(g, patterns: list[UnitPattern], store: CommunityStore,
                   L: QuerySegment, v_q, k: int, theta: float,
                   mode: str = "dot") -> CTopKResult:
    """Index-free continuous competitor: same split points, then a full
    baseline scan per interval."""
    t_start = time.perf_counter()
    v_q = tuple(v_q) if v_q is not None else L.point_at(0.5)
    events, interval_map = find_split_points(L, patterns)
    sweep = sweep_pattern_sets(events, active_at_start(interval_map))
    intervals: list[IntervalResult] = []
    for (lo, hi), active in sweep:
        pids = tuple(sorted(active))
        Q = _query_community_from(patterns, pids, L.point_at((lo + hi) / 2.0), L.r)
        if Q is None:
            intervals.append(IntervalResult(lo, hi, pids, TopKResult([])))
            continue
        res = baseline_topk(g, patterns, store, Q, v_q, k, theta, mode=mode)
        intervals.append(IntervalResult(lo, hi, pids, res))
    return CTopKResult(intervals, wall_time=time.perf_counter() - t_start)


def run_cquery(index: SearchIndex, q_st, q_ed, k: int, theta: float,
               v_q=None, radius: float | None = None,
               with_oracle: bool = False) -> tuple[CTopKResult, CTopKResult | None]:
    r = index.radius if radius is None else radius
    L = QuerySegment(tuple(q_st), tuple(q_ed), r)
    res = ctopk_search(index.graph, index.tree, index.store, L, v_q, k, theta,
                       mode=index.scoring)
    base = None
    if with_oracle:
        base = baseline_ctopk(index.graph, index.patterns, index.store, L,
                              v_q, k, theta, mode=index.scoring)
    return res, base
