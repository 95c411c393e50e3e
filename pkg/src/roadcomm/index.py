"""Aggregate R-tree over unit-pattern MBRs and offline community computation.

Each tree entry carries summary aggregates: the bounding rectangle corners,
a POI-presence bit vector, and per-pattern-type element-wise max POI vectors.
Two extra per-type aggregates (element-wise min vectors and the smallest
per-pattern community count) let retrieval accept a whole subtree with a
single node access, mirroring the full-containment shortcut of the spatial
range query.

The offline phase computes one community per vertex (all patterns whose
exact distance to the vertex is within the radius), the inverted
pattern -> communities map, and the per-type max community counts that feed
the candidate-retrieval threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (MBR, maxdist_point_mbr, mindist_point_mbr,
                       mindist_segment_mbr, point_segment_dist,
                       segment_segment_dist)
from .graph import RoadGraph
from .patterns import UnitPattern, detect_unit_patterns, mindist_point_pattern


class IoCounter:
    """Per-query node-access accumulator (one instance per query, no sharing)."""

    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0

    def add(self, n: int = 1) -> None:
        self.count += n


@dataclass
class NodeInfo:
    mbr: MBR
    arr: np.ndarray                       # POI-type presence bits, length m
    vmax: dict[int, np.ndarray]           # per-type element-wise max POI vec
    vmin: dict[int, np.ndarray]           # per-type element-wise min POI vec
    count_per_type: dict[int, int]
    min_pattern_max_count: dict[int, int] = field(default_factory=dict)


class ARTreeNode:
    __slots__ = ("info", "children", "pattern_ids", "type_ids", "leaf_mbrs")

    def __init__(self, info: NodeInfo, children, pattern_ids: np.ndarray,
                 type_ids: dict[int, np.ndarray]):
        self.info = info
        self.children = children          # None for leaves
        self.pattern_ids = pattern_ids    # all descendant pattern ids
        self.type_ids = type_ids          # descendant pattern ids per type
        self.leaf_mbrs = None             # (k, 4) for leaves

    @property
    def is_leaf(self) -> bool:
        return self.children is None


class ARTree:
    def __init__(self, root: ARTreeNode, patterns: list[UnitPattern], fanout: int):
        self.root = root
        self.patterns = patterns
        self.fanout = fanout
        self.vec_matrix = np.array([p.vec for p in patterns], dtype=np.int64)
        self.ptype_arr = np.array([p.ptype for p in patterns], dtype=np.int64)

    def stats(self) -> dict:
        levels: list[int] = []

        def walk(node, depth):
            while len(levels) <= depth:
                levels.append(0)
            levels[depth] += 1
            if not node.is_leaf:
                for c in node.children:
                    walk(c, depth + 1)

        walk(self.root, 0)
        return {
            "height": len(levels),
            "node_count": sum(levels),
            "nodes_per_level": levels,
            "pattern_count": len(self.patterns),
            "fanout": self.fanout,
        }


def _info_from_patterns(patterns: list[UnitPattern], m: int) -> NodeInfo:
    mbr = patterns[0].mbr
    for p in patterns[1:]:
        mbr = mbr.union(p.mbr)
    arr = np.zeros(m, dtype=bool)
    vmax: dict[int, np.ndarray] = {}
    vmin: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for p in patterns:
        arr |= p.vec > 0
        h = p.ptype
        if h in vmax:
            np.maximum(vmax[h], p.vec, out=vmax[h])
            np.minimum(vmin[h], p.vec, out=vmin[h])
            counts[h] += 1
        else:
            vmax[h] = p.vec.copy()
            vmin[h] = p.vec.copy()
            counts[h] = 1
    return NodeInfo(mbr, arr, vmax, vmin, counts)


def _info_from_children(children: list[ARTreeNode]) -> NodeInfo:
    mbr = children[0].info.mbr
    for c in children[1:]:
        mbr = mbr.union(c.info.mbr)
    arr = children[0].info.arr.copy()
    vmax: dict[int, np.ndarray] = {}
    vmin: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for c in children:
        arr |= c.info.arr
        for h, v in c.info.vmax.items():
            if h in vmax:
                np.maximum(vmax[h], v, out=vmax[h])
                np.minimum(vmin[h], c.info.vmin[h], out=vmin[h])
                counts[h] += c.info.count_per_type[h]
            else:
                vmax[h] = v.copy()
                vmin[h] = c.info.vmin[h].copy()
                counts[h] = c.info.count_per_type[h]
    return NodeInfo(mbr, arr, vmax, vmin, counts)


def _group_type_ids(patterns: list[UnitPattern]) -> dict[int, np.ndarray]:
    by_type: dict[int, list[int]] = {}
    for p in patterns:
        by_type.setdefault(p.ptype, []).append(p.id)
    return {h: np.array(ids, dtype=np.int64) for h, ids in by_type.items()}


def _str_slices(items, key_x, key_y, group_size: int):
    """Sort-tile-recursive grouping of items into runs of `group_size`."""
    n = len(items)
    n_groups = math.ceil(n / group_size)
    n_slices = math.ceil(math.sqrt(n_groups))
    per_slice = math.ceil(n / n_slices)
    items = sorted(items, key=key_x)
    groups = []
    for s in range(0, n, per_slice):
        chunk = sorted(items[s:s + per_slice], key=key_y)
        for g in range(0, len(chunk), group_size):
            groups.append(chunk[g:g + group_size])
    return groups


def build_artree(patterns: list[UnitPattern], fanout: int = 32) -> ARTree:
    """Bulk-load the aR-tree with sort-tile-recursive packing (deterministic)."""
    if fanout < 2:
        raise ValueError(f"fanout must be >= 2, got {fanout}")
    if not patterns:
        raise ValueError("cannot build an index over zero patterns")
    m = len(patterns[0].vec)

    def pat_center(p: UnitPattern):
        return ((p.mbr.min_x + p.mbr.max_x) / 2.0, (p.mbr.min_y + p.mbr.max_y) / 2.0, p.id)

    groups = _str_slices(patterns,
                         key_x=lambda p: (pat_center(p)[0], pat_center(p)[1], p.id),
                         key_y=lambda p: (pat_center(p)[1], pat_center(p)[0], p.id),
                         group_size=fanout)
    nodes = []
    for grp in groups:
        info = _info_from_patterns(grp, m)
        node = ARTreeNode(info, None, np.array([p.id for p in grp], dtype=np.int64),
                          _group_type_ids(grp))
        node.leaf_mbrs = np.array(
            [[p.mbr.min_x, p.mbr.min_y, p.mbr.max_x, p.mbr.max_y] for p in grp])
        nodes.append(node)

    while len(nodes) > 1:
        def node_center(nd: ARTreeNode):
            b = nd.info.mbr
            return ((b.min_x + b.max_x) / 2.0, (b.min_y + b.max_y) / 2.0)

        parents = []
        for grp in _str_slices(
                nodes,
                key_x=lambda nd: (node_center(nd)[0], node_center(nd)[1], int(nd.pattern_ids[0])),
                key_y=lambda nd: (node_center(nd)[1], node_center(nd)[0], int(nd.pattern_ids[0])),
                group_size=fanout):
            info = _info_from_children(grp)
            pids = np.concatenate([c.pattern_ids for c in grp])
            tids: dict[int, list[np.ndarray]] = {}
            for c in grp:
                for h, ids in c.type_ids.items():
                    tids.setdefault(h, []).append(ids)
            parents.append(ARTreeNode(info, grp, pids,
                                      {h: np.concatenate(v) for h, v in tids.items()}))
        nodes = parents

    return ARTree(nodes[0], list(patterns), fanout)


# ---------------------------------------------------------------------------
# Range queries
# ---------------------------------------------------------------------------


def circle_range_query(tree: ARTree, center, r: float,
                       stats: IoCounter | None = None) -> set[int]:
    """Ids of all patterns intersecting the closed disc (center, r).

    Subtrees whose MBR lies entirely inside the disc contribute all their
    patterns with a single node access; leaf entries are pre-filtered by MBR
    distance and refined with the exact point-to-segment distance.
    """
    if r < 0:
        raise ValueError(f"radius must be >= 0, got {r}")
    io = stats if stats is not None else IoCounter()
    cx, cy = float(center[0]), float(center[1])
    out: set[int] = set()
    patterns = tree.patterns
    root = tree.root
    if maxdist_point_mbr(cx, cy, root.info.mbr) <= r:
        io.add()
        return set(root.pattern_ids.tolist())
    stack = [root]
    while stack:
        node = stack.pop()
        io.add()
        if node.is_leaf:
            b = node.leaf_mbrs
            dx = np.maximum(np.maximum(b[:, 0] - cx, 0.0), cx - b[:, 2])
            dy = np.maximum(np.maximum(b[:, 1] - cy, 0.0), cy - b[:, 3])
            near = np.hypot(dx, dy) <= r
            fx = np.maximum(cx - b[:, 0], b[:, 2] - cx)
            fy = np.maximum(cy - b[:, 1], b[:, 3] - cy)
            certain = np.hypot(fx, fy) <= r
            for i in np.nonzero(near)[0]:
                pid = int(node.pattern_ids[i])
                if certain[i] or mindist_point_pattern((cx, cy), patterns[pid]) <= r:
                    out.add(pid)
        else:
            for child in node.children:
                if maxdist_point_mbr(cx, cy, child.info.mbr) <= r:
                    io.add()  # whole subtree inside: one access, no descent
                    out.update(child.pattern_ids.tolist())
                elif mindist_point_mbr(cx, cy, child.info.mbr) <= r:
                    stack.append(child)
    return out


def pattern_segment_dist(pattern: UnitPattern, a, b) -> float:
    """Minimum distance between segment ab and any member segment of the pattern."""
    best = math.inf
    for x1, y1, x2, y2 in pattern.segs:
        d = segment_segment_dist(a, b, (x1, y1), (x2, y2))
        if d < best:
            best = d
            if best == 0.0:
                break
    return best


def segment_range_query(tree: ARTree, a, b, r: float,
                        stats: IoCounter | None = None) -> set[int]:
    """Ids of all patterns within distance r of segment ab (the swept capsule)."""
    io = stats if stats is not None else IoCounter()
    out: set[int] = set()
    patterns = tree.patterns

    def max_corner_dist(mbr: MBR) -> float:
        corners = ((mbr.min_x, mbr.min_y), (mbr.max_x, mbr.min_y),
                   (mbr.max_x, mbr.max_y), (mbr.min_x, mbr.max_y))
        return max(point_segment_dist(x, y, a[0], a[1], b[0], b[1]) for x, y in corners)

    root = tree.root
    if max_corner_dist(root.info.mbr) <= r:
        io.add()
        return set(root.pattern_ids.tolist())
    stack = [root]
    while stack:
        node = stack.pop()
        io.add()
        if node.is_leaf:
            for i, pid in enumerate(node.pattern_ids.tolist()):
                row = node.leaf_mbrs[i]
                mbr = MBR(row[0], row[1], row[2], row[3])
                if mindist_segment_mbr(a, b, mbr) > r:
                    continue
                if max_corner_dist(mbr) <= r or pattern_segment_dist(patterns[pid], a, b) <= r:
                    out.add(pid)
        else:
            for child in node.children:
                if max_corner_dist(child.info.mbr) <= r:
                    io.add()
                    out.update(child.pattern_ids.tolist())
                elif mindist_segment_mbr(a, b, child.info.mbr) <= r:
                    stack.append(child)
    return out


# ---------------------------------------------------------------------------
# Communities
# ---------------------------------------------------------------------------


@dataclass
class Community:
    """All unit patterns within the radius of one center vertex."""

    center: int
    radius: float
    pattern_ids: np.ndarray
    per_type_ids: dict[int, np.ndarray]
    per_type_vecs: dict[int, np.ndarray]
    per_type_sum: dict[int, np.ndarray] = field(init=False, repr=False)
    per_type_max: dict[int, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.per_type_sum = {h: v.sum(axis=0) for h, v in self.per_type_vecs.items()}
        self.per_type_max = {h: v.max(axis=0) for h, v in self.per_type_vecs.items()}

    def count(self, h: int) -> int:
        ids = self.per_type_ids.get(h)
        return 0 if ids is None else len(ids)

    def type_counts(self) -> dict[int, int]:
        return {h: len(ids) for h, ids in self.per_type_ids.items()}

    @property
    def per_type_max_vec(self) -> dict[int, np.ndarray]:
        return self.per_type_max


@dataclass
class CommunityStore:
    """Per-vertex communities plus the transposed membership map and statistics."""

    radius: float
    communities: list[Community]            # indexed by center vertex id
    inverted: list[np.ndarray]               # pattern id -> sorted center vertex ids
    max_count_per_type: dict[int, int]       # global max |c_h| over all communities
    per_pattern_max_count: np.ndarray        # max |c_h| over communities containing p

    def community(self, vertex: int) -> Community:
        return self.communities[vertex]


def compute_communities(g: RoadGraph, tree: ARTree, r: float) -> CommunityStore:
    """Offline phase: one community per vertex via circle range queries."""
    patterns = tree.patterns
    P = len(patterns)
    inverted_lists: list[list[int]] = [[] for _ in range(P)]
    communities: list[Community] = []
    ptype_arr = np.array([p.ptype for p in patterns], dtype=np.int64)
    vec_arr = np.array([p.vec for p in patterns], dtype=np.int64)

    for v in range(g.vertex_count):
        ids = np.array(sorted(circle_range_query(tree, g.point(v), r)), dtype=np.int64)
        per_type_ids: dict[int, np.ndarray] = {}
        per_type_vecs: dict[int, np.ndarray] = {}
        if len(ids):
            types = ptype_arr[ids]
            for h in np.unique(types):
                sel = ids[types == h]
                per_type_ids[int(h)] = sel
                per_type_vecs[int(h)] = vec_arr[sel]
        communities.append(Community(v, r, ids, per_type_ids, per_type_vecs))
        for pid in ids.tolist():
            inverted_lists[pid].append(v)

    inverted = [np.array(lst, dtype=np.int64) for lst in inverted_lists]
    max_count_per_type: dict[int, int] = {}
    for c in communities:
        for h, ids in c.per_type_ids.items():
            if len(ids) > max_count_per_type.get(h, 0):
                max_count_per_type[h] = len(ids)
    per_pattern_max_count = np.zeros(P, dtype=np.int64)
    for c in communities:
        for h, ids in c.per_type_ids.items():
            k = len(ids)
            np.maximum.at(per_pattern_max_count, ids, k)
    return CommunityStore(r, communities, inverted, max_count_per_type,
                          per_pattern_max_count)


def annotate_count_aggregates(tree: ARTree, store: CommunityStore) -> None:
    """Fill each node's per-type minimum of per-pattern max community counts.

    Run after compute_communities; powers the all-descendants-qualify
    shortcut in candidate retrieval.
    """
    ppmc = store.per_pattern_max_count

    def walk(node: ARTreeNode) -> None:
        out: dict[int, int] = {}
        for h, ids in node.type_ids.items():
            counts = ppmc[ids]
            out[h] = int(counts.min()) if len(counts) else 0
        node.info.min_pattern_max_count = out
        if not node.is_leaf:
            for c in node.children:
                walk(c)

    walk(tree.root)


# ---------------------------------------------------------------------------
# Whole-index orchestration
# ---------------------------------------------------------------------------


@dataclass
class SearchIndex:
    """Everything the online phase needs, built once per (graph, radius)."""

    graph: RoadGraph
    patterns: list[UnitPattern]
    tree: ARTree
    store: CommunityStore
    radius: float
    fanout: int
    scoring: str = "dot"


def build_search_index(g: RoadGraph, radius: float, fanout: int = 32,
                       scoring: str = "dot") -> SearchIndex:
    patterns = detect_unit_patterns(g)
    if not patterns:
        raise ValueError("graph yields no unit patterns; nothing to index")
    tree = build_artree(patterns, fanout=fanout)
    store = compute_communities(g, tree, radius)
    annotate_count_aggregates(tree, store)
    return SearchIndex(g, patterns, tree, store, radius, fanout, scoring)
