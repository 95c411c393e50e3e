"""Unit-pattern detection via clockwise rightmost-turn face traversal.

A unit pattern is either a bounded face of the planar embedding (a simple
cycle: delta, rectangle, pentagon, ...) or a dangling/bridge edge. Every
directed edge belongs to exactly one closed face walk; walks are extracted
as orbits of the rightmost-turn successor map, the unbounded outer face is
discarded, and edges traversed in both directions inside one walk become
Edge patterns.
"""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

from .errors import EmbeddingError
from .geometry import MBR, point_segment_dist
from .graph import RoadGraph

# Pattern type ids: cycle length for faces, 1 for the non-cyclic edge pattern.
EDGE = 1
DELTA = 3
RECTANGLE = 4
PENTAGON = 5
HEXAGON = 6

_TYPE_NAMES = {EDGE: "edge", DELTA: "delta", RECTANGLE: "rectangle",
               PENTAGON: "pentagon", HEXAGON: "hexagon"}


def type_name(ptype: int) -> str:
    return _TYPE_NAMES.get(ptype, f"polygon-{ptype}")


def classify(hop_count: int, is_cyclic: bool) -> int:
    """Pattern type from the closed-walk hop count (= cycle vertex count)."""
    if hop_count < 1:
        raise ValueError(f"hop_count must be >= 1, got {hop_count}")
    if not is_cyclic:
        return EDGE
    if hop_count < 3:
        raise ValueError(f"cyclic pattern with hop_count {hop_count} is impossible")
    return hop_count


def fingerprint(cycle) -> tuple[int, ...]:
    """Canonical form of a cycle, invariant under rotation and reflection.

    Rotates the minimum vertex id to the front, then keeps the
    lexicographically smaller of the two directions.
    """
    cyc = list(cycle)
    if not cyc:
        raise ValueError("empty cycle")
    if len(cyc) == 1:
        return (cyc[0],)
    k = cyc.index(min(cyc))
    fwd = tuple(cyc[k:] + cyc[:k])
    rev_src = cyc[k::-1] + cyc[:k:-1]  # reversed, still starting at the minimum
    rev = tuple(rev_src)
    return min(fwd, rev)


@dataclass(frozen=True)
class UnitPattern:
    id: int
    ptype: int
    cycle: tuple[int, ...]      # vertex ids; (u, v) for Edge patterns
    edge_ids: tuple[int, ...]
    vec: np.ndarray             # sum of member edges' POI vectors
    mbr: MBR
    segs: np.ndarray            # (k, 4) member segments as x1,y1,x2,y2

    @property
    def is_cyclic(self) -> bool:
        return self.ptype != EDGE


def mindist_point_pattern(p, pattern: UnitPattern) -> float:
    """Minimum Euclidean distance from point p to the pattern's segments."""
    x, y = p
    return min(point_segment_dist(x, y, sx, sy, tx, ty)
               for sx, sy, tx, ty in pattern.segs)


def _directed_successor(g: RoadGraph) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Successor map over directed edges for the rightmost-turn traversal.

    Directed edge 2*e carries edge e from u to v, 2*e+1 from v to u.
    The successor of (u -> v) is (v -> w) with w the neighbor immediately
    clockwise of u in v's CCW angular order.
    """
    E = g.edge_count
    # directed id -> (tail, head, edge)
    darts: list[tuple[int, int, int]] = [(-1, -1, -1)] * (2 * E)
    out_dart: dict[tuple[int, int], int] = {}
    for e, (u, v) in enumerate(g.edge_uv.tolist()):
        darts[2 * e] = (u, v, e)
        darts[2 * e + 1] = (v, u, e)
        out_dart[(u, v)] = 2 * e
        out_dart[(v, u)] = 2 * e + 1
    nxt = np.empty(2 * E, dtype=np.int64)
    for d, (u, v, _) in enumerate(darts):
        w = g.clockwise_next(u, v)
        nxt[d] = out_dart[(v, w)]
    return nxt, darts


def _walk_area(walk, coords) -> float:
    # Shoelace over the walk's directed edges; tree detours cancel.
    s = 0.0
    for u, v, _ in walk:
        s += coords[u, 0] * coords[v, 1] - coords[v, 0] * coords[u, 1]
    return 0.5 * s


def _peel_simple_cycles(remaining):
    """Decompose a balanced residual walk into simple directed cycles.

    `remaining` is the walk's directed edges with the doubly-traversed ones
    removed, in walk order. Every vertex has equal in- and out-degree in it,
    so it splits into edge-disjoint simple cycles; repeated vertices on the
    running trail pop a cycle off the stack. Deterministic in walk order.
    """
    pool: dict[int, deque] = {}
    for i, (u, _, _) in enumerate(remaining):
        pool.setdefault(u, deque()).append(i)
    consumed = [False] * len(remaining)
    cycles: list[list[tuple[int, int, int]]] = []
    for start in range(len(remaining)):
        if consumed[start]:
            continue
        cur = remaining[start][0]
        trail_edges: list[int] = []
        trail_verts: list[int] = [cur]
        pos = {cur: 0}
        while True:
            dq = pool.get(trail_verts[-1])
            while dq and consumed[dq[0]]:
                dq.popleft()
            if not dq:
                if trail_edges:
                    raise EmbeddingError(
                        f"unbalanced residual walk at vertex {trail_verts[-1]}")
                break
            i = dq.popleft()
            consumed[i] = True
            trail_edges.append(i)
            head = remaining[i][1]
            if head in pos:
                p = pos[head]
                cycles.append([remaining[j] for j in trail_edges[p:]])
                for vtx in trail_verts[p + 1:]:
                    del pos[vtx]
                trail_edges = trail_edges[:p]
                trail_verts = trail_verts[:p + 1]
            else:
                trail_verts.append(head)
                pos[head] = len(trail_verts) - 1
    return cycles


def detect_unit_patterns(g: RoadGraph) -> list[UnitPattern]:
    """Enumerate all unit patterns of the graph.

    Face walks partition the 2E directed edges. The walk of most-negative
    signed area is the unbounded outer face and yields no cyclic pattern.
    Within any walk, an edge traversed in both directions is a bridge or
    dead end and becomes an Edge pattern; removing those from the walk must
    leave a simple cycle for a cyclic pattern to be emitted (a pinched face
    whose residue is not a simple cycle is skipped).
    """
    E = g.edge_count
    if E == 0:
        return []
    nxt, darts = _directed_successor(g)
    visited = np.zeros(2 * E, dtype=bool)  # the e_arr visited-state array
    walks: list[list[tuple[int, int, int]]] = []
    for start in range(2 * E):
        if visited[start]:
            continue
        walk = []
        d = start
        while True:
            if visited[d]:
                raise EmbeddingError(
                    f"face walk revisited directed edge {darts[d]} before closing; "
                    f"walk so far: {walk}")
            visited[d] = True
            walk.append(darts[d])
            d = int(nxt[d])
            if d == start:
                break
        walks.append(walk)

    areas = [_walk_area(w, g.coords) for w in walks]
    outer = int(np.argmin(areas))

    pair_to_edge = {}
    for e, (u, v) in enumerate(g.edge_uv.tolist()):
        pair_to_edge[(u, v)] = e
        pair_to_edge[(v, u)] = e

    seen: dict[tuple[int, ...], bool] = {}  # hash bucket of canonical cycles
    raw: list[tuple[int, tuple[int, ...], tuple[int, ...]]] = []  # (ptype, cycle, edges)

    for wi, walk in enumerate(walks):
        edge_uses = Counter(e for _, _, e in walk)
        doubled = {e for e, c in edge_uses.items() if c == 2}
        for e in sorted(doubled):
            u, v = map(int, g.edge_uv[e])
            cyc = (min(u, v), max(u, v))
            if cyc not in seen:
                seen[cyc] = True
                raw.append((classify(1, False), cyc, (e,)))
        if wi == outer:
            continue
        remaining = [(u, v, e) for u, v, e in walk if e not in doubled]
        if not remaining:
            continue
        # A walk may carry several simple cycles (e.g. a cyclic appendage
        # hanging inside the face off a bridge). Interior faces come out
        # counter-clockwise; clockwise residue cycles are the outside of
        # nested structure and duplicate faces found by other walks.
        for cyc_edges in _peel_simple_cycles(remaining):
            heads = [v for _, v, _ in cyc_edges]
            if _walk_area(cyc_edges, g.coords) <= 0.0:
                continue
            key = fingerprint(heads)
            if key in seen:
                continue
            seen[key] = True
            n = len(key)
            edges = tuple(pair_to_edge[(key[i], key[(i + 1) % n])] for i in range(n))
            raw.append((classify(n, True), key, edges))

    raw.sort(key=lambda t: (t[0], t[1]))
    out = []
    for pid, (ptype, cycle, edge_ids) in enumerate(raw):
        vec = g.poi_counts[list(edge_ids)].sum(axis=0)
        pts = [g.point(v) for v in cycle]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        mbr = MBR(min(xs), min(ys), max(xs), max(ys))
        segs = np.empty((len(edge_ids), 4), dtype=np.float64)
        for i, e in enumerate(edge_ids):
            (x1, y1), (x2, y2) = g.edge_segment(e)
            segs[i] = (x1, y1, x2, y2)
        out.append(UnitPattern(pid, ptype, cycle, edge_ids, vec, mbr, segs))
    return out


def patterns_to_json(patterns) -> str:
    return json.dumps([
        {
            "id": p.id,
            "type": p.ptype,
            "type_name": type_name(p.ptype),
            "cycle": list(p.cycle),
            "edge_ids": list(p.edge_ids),
            "vec": p.vec.tolist(),
            "mbr": [p.mbr.min_x, p.mbr.min_y, p.mbr.max_x, p.mbr.max_y],
        }
        for p in patterns
    ])
