"""Versioned binary persistence for a built search index.

Layout: magic + fixed-width little-endian header, then raw numpy sections
(coordinates, edges, POI counts, patterns, tree structure, community
membership lists). Derived data (pattern vectors, MBRs, node aggregates,
inverted maps, count statistics) is recomputed on load, so the file stays
small and can never disagree with itself.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import PersistError
from .geometry import MBR
from .graph import RoadGraph
from .index import (ARTree, ARTreeNode, SearchIndex, Community, CommunityStore,
                    _group_type_ids, _info_from_children, _info_from_patterns,
                    annotate_count_aggregates)
from .patterns import UnitPattern

MAGIC = b"RCIX"
VERSION = 1
_SCORING_CODE = {"dot": 0, "cosine": 1}
_SCORING_NAME = {v: k for k, v in _SCORING_CODE.items()}
_HEADER = struct.Struct("<4sIBIdIIII")  # magic, version, scoring, fanout, radius, m, V, E, P


def _arr_bytes(a, dtype) -> bytes:
    return np.ascontiguousarray(a, dtype=dtype).tobytes()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, count: int, dtype) -> np.ndarray:
        dt = np.dtype(dtype)
        nbytes = count * dt.itemsize
        if self.off + nbytes > len(self.data):
            raise PersistError("index file truncated")
        out = np.frombuffer(self.data, dtype=dt, count=count, offset=self.off)
        self.off += nbytes
        return out


def _flatten_tree(root: ARTreeNode):
    """Preorder node records: (is_leaf, payload ids) where payload is pattern
    ids for leaves and preorder child indices for internal nodes."""
    flags: list[int] = []
    payloads: list[np.ndarray] = []
    index_of: dict[int, int] = {}

    def visit(node: ARTreeNode) -> int:
        my = len(flags)
        index_of[id(node)] = my
        flags.append(1 if node.is_leaf else 0)
        payloads.append(None)
        if node.is_leaf:
            payloads[my] = np.asarray(node.pattern_ids, dtype=np.int64)
        else:
            payloads[my] = np.array([visit(c) for c in node.children], dtype=np.int64)
        return my

    visit(root)
    return flags, payloads


def save_index(index: SearchIndex, path) -> None:
    g = index.graph
    patterns = index.patterns
    out = bytearray()
    out += _HEADER.pack(MAGIC, VERSION, _SCORING_CODE[index.scoring],
                        index.fanout, index.radius, g.poi_type_count,
                        g.vertex_count, g.edge_count, len(patterns))
    out += _arr_bytes(g.coords, "<f8")
    out += _arr_bytes(g.edge_uv, "<i8")
    out += _arr_bytes(g.edge_len, "<f8")
    out += _arr_bytes(g.poi_counts, "<i8")

    ptypes = np.array([p.ptype for p in patterns], dtype=np.int64)
    cyc_lens = np.array([len(p.cycle) for p in patterns], dtype=np.int64)
    cyc_flat = np.concatenate([np.array(p.cycle, dtype=np.int64) for p in patterns])
    eid_lens = np.array([len(p.edge_ids) for p in patterns], dtype=np.int64)
    eid_flat = np.concatenate([np.array(p.edge_ids, dtype=np.int64) for p in patterns])
    out += _arr_bytes(ptypes, "<i8")
    out += _arr_bytes(cyc_lens, "<i8")
    out += struct.pack("<q", len(cyc_flat)) + _arr_bytes(cyc_flat, "<i8")
    out += _arr_bytes(eid_lens, "<i8")
    out += struct.pack("<q", len(eid_flat)) + _arr_bytes(eid_flat, "<i8")

    flags, payloads = _flatten_tree(index.tree.root)
    out += struct.pack("<q", len(flags))
    out += _arr_bytes(np.array(flags, dtype=np.int64), "<i8")
    out += _arr_bytes(np.array([len(p) for p in payloads], dtype=np.int64), "<i8")
    flat = np.concatenate(payloads) if payloads else np.empty(0, dtype=np.int64)
    out += struct.pack("<q", len(flat)) + _arr_bytes(flat, "<i8")

    comm_lens = np.array([len(c.pattern_ids) for c in index.store.communities],
                         dtype=np.int64)
    comm_flat = (np.concatenate([c.pattern_ids for c in index.store.communities])
                 if g.vertex_count else np.empty(0, dtype=np.int64))
    out += _arr_bytes(comm_lens, "<i8")
    out += struct.pack("<q", len(comm_flat)) + _arr_bytes(comm_flat, "<i8")

    Path(path).write_bytes(bytes(out))


def _rebuild_patterns(g: RoadGraph, ptypes, cyc_lens, cyc_flat, eid_lens,
                      eid_flat) -> list[UnitPattern]:
    patterns = []
    ci = ei = 0
    for pid in range(len(ptypes)):
        cyc = tuple(int(x) for x in cyc_flat[ci:ci + int(cyc_lens[pid])])
        ci += int(cyc_lens[pid])
        eids = tuple(int(x) for x in eid_flat[ei:ei + int(eid_lens[pid])])
        ei += int(eid_lens[pid])
        vec = g.poi_counts[list(eids)].sum(axis=0)
        pts = [g.point(v) for v in cyc]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        segs = np.empty((len(eids), 4), dtype=np.float64)
        for i, e in enumerate(eids):
            (x1, y1), (x2, y2) = g.edge_segment(e)
            segs[i] = (x1, y1, x2, y2)
        patterns.append(UnitPattern(pid, int(ptypes[pid]), cyc, eids, vec,
                                    MBR(min(xs), min(ys), max(xs), max(ys)), segs))
    return patterns


def _rebuild_tree(patterns, fanout, flags, pay_lens, pay_flat) -> ARTree:
    m = len(patterns[0].vec)
    payloads = []
    off = 0
    for ln in pay_lens:
        payloads.append(pay_flat[off:off + int(ln)])
        off += int(ln)
    nodes: list[ARTreeNode | None] = [None] * len(flags)
    for i in range(len(flags) - 1, -1, -1):
        if flags[i] == 1:
            grp = [patterns[int(pid)] for pid in payloads[i]]
            node = ARTreeNode(_info_from_patterns(grp, m), None,
                              np.asarray(payloads[i], dtype=np.int64).copy(),
                              _group_type_ids(grp))
            node.leaf_mbrs = np.array(
                [[p.mbr.min_x, p.mbr.min_y, p.mbr.max_x, p.mbr.max_y] for p in grp])
        else:
            children = [nodes[int(j)] for j in payloads[i]]
            pids = np.concatenate([c.pattern_ids for c in children])
            tids: dict[int, list[np.ndarray]] = {}
            for c in children:
                for h, ids in c.type_ids.items():
                    tids.setdefault(h, []).append(ids)
            node = ARTreeNode(_info_from_children(children), children, pids,
                              {h: np.concatenate(v) for h, v in tids.items()})
        nodes[i] = node
    return ARTree(nodes[0], list(patterns), fanout)


def load_index(path) -> SearchIndex:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise PersistError("index file truncated")
    magic, version, scoring, fanout, radius, m, V, E, P = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise PersistError(f"bad magic {magic!r}; not a roadcomm index file")
    if version != VERSION:
        raise PersistError(f"unsupported index version {version}")
    if scoring not in _SCORING_NAME:
        raise PersistError(f"unknown scoring code {scoring}")
    rd = _Reader(data)
    rd.off = _HEADER.size
    coords = rd.take(V * 2, "<f8").reshape(V, 2).copy()
    edge_uv = rd.take(E * 2, "<i8").reshape(E, 2).copy()
    edge_len = rd.take(E, "<f8").copy()
    poi_counts = rd.take(E * m, "<i8").reshape(E, m).copy()
    g = RoadGraph(coords, edge_uv, edge_len, poi_counts)

    ptypes = rd.take(P, "<i8")
    cyc_lens = rd.take(P, "<i8")
    (n_cyc,) = struct.unpack_from("<q", data, rd.off)
    rd.off += 8
    cyc_flat = rd.take(n_cyc, "<i8")
    eid_lens = rd.take(P, "<i8")
    (n_eid,) = struct.unpack_from("<q", data, rd.off)
    rd.off += 8
    eid_flat = rd.take(n_eid, "<i8")
    patterns = _rebuild_patterns(g, ptypes, cyc_lens, cyc_flat, eid_lens, eid_flat)

    (n_nodes,) = struct.unpack_from("<q", data, rd.off)
    rd.off += 8
    flags = rd.take(n_nodes, "<i8")
    pay_lens = rd.take(n_nodes, "<i8")
    (n_flat,) = struct.unpack_from("<q", data, rd.off)
    rd.off += 8
    pay_flat = rd.take(n_flat, "<i8")
    tree = _rebuild_tree(patterns, fanout, flags, pay_lens, pay_flat)

    comm_lens = rd.take(V, "<i8")
    (n_comm,) = struct.unpack_from("<q", data, rd.off)
    rd.off += 8
    comm_flat = rd.take(n_comm, "<i8")

    ptype_arr = np.array([p.ptype for p in patterns], dtype=np.int64)
    vec_arr = np.array([p.vec for p in patterns], dtype=np.int64)
    inverted_lists: list[list[int]] = [[] for _ in range(P)]
    communities = []
    off = 0
    for v in range(V):
        ids = np.sort(comm_flat[off:off + int(comm_lens[v])].copy())
        off += int(comm_lens[v])
        per_type_ids: dict[int, np.ndarray] = {}
        per_type_vecs: dict[int, np.ndarray] = {}
        if len(ids):
            types = ptype_arr[ids]
            for h in np.unique(types):
                sel = ids[types == h]
                per_type_ids[int(h)] = sel
                per_type_vecs[int(h)] = vec_arr[sel]
        communities.append(Community(v, radius, ids, per_type_ids, per_type_vecs))
        for pid in ids.tolist():
            inverted_lists[pid].append(v)
    inverted = [np.array(lst, dtype=np.int64) for lst in inverted_lists]
    max_count_per_type: dict[int, int] = {}
    per_pattern_max_count = np.zeros(P, dtype=np.int64)
    for c in communities:
        for h, ids in c.per_type_ids.items():
            k = len(ids)
            if k > max_count_per_type.get(h, 0):
                max_count_per_type[h] = k
            np.maximum.at(per_pattern_max_count, ids, k)
    store = CommunityStore(radius, communities, inverted, max_count_per_type,
                           per_pattern_max_count)
    index = SearchIndex(g, patterns, tree, store, radius, fanout,
                        _SCORING_NAME[scoring])
    annotate_count_aggregates(tree, store)
    return index
