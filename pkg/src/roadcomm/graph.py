"""Road-network graph model: loading, validation, and embedding utilities.

A graph is a connected planar straight-line embedding. Vertices are road
intersections with coordinates, edges carry Euclidean lengths and per-edge
POI count vectors. Adjacency lists are sorted counter-clockwise by angle,
which is what the rightmost-turn face traversal in `patterns` relies on.

File formats (whitespace-separated text, one record per line):
    nodes:  id x y
    edges:  id u v [length]          (length recomputed when absent)
    pois:   edge_id poi_type_id offset   (offset in [0,1]; stored, unused)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmbeddingError, GraphLoadError, GraphStructureError
from .geometry import segments_cross

LENGTH_RTOL = 1e-9


@dataclass(frozen=True)
class Vertex:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    length: float
    pois: np.ndarray  # length-m int vector of POI type counts

    def other(self, w: int) -> int:
        return self.v if w == self.u else self.u


class RoadGraph:
    """Immutable planar road network.

    Coordinates and edge data live in numpy arrays for the hot paths;
    `vertex(i)` / `edge(i)` build the lightweight dataclass views.
    """

    def __init__(self, coords: np.ndarray, edge_uv: np.ndarray,
                 edge_len: np.ndarray, poi_counts: np.ndarray):
        self.coords = np.ascontiguousarray(coords, dtype=np.float64)
        self.edge_uv = np.ascontiguousarray(edge_uv, dtype=np.int64)
        self.edge_len = np.ascontiguousarray(edge_len, dtype=np.float64)
        self.poi_counts = np.ascontiguousarray(poi_counts, dtype=np.int64)
        self._check_basic()
        self._build_adjacency()

    # -- construction -------------------------------------------------------

    def _check_basic(self) -> None:
        n = len(self.coords)
        if n == 0:
            raise GraphStructureError("graph has no vertices")
        if not np.all(np.isfinite(self.coords)):
            raise GraphStructureError("non-finite vertex coordinate")
        seen: dict[tuple[float, float], int] = {}
        for i, (x, y) in enumerate(self.coords):
            key = (float(x), float(y))
            if key in seen:
                raise GraphStructureError(
                    f"vertices {seen[key]} and {i} share coordinates {key}")
            seen[key] = i
        if len(self.edge_uv):
            u, v = self.edge_uv[:, 0], self.edge_uv[:, 1]
            if np.any(u == v):
                raise GraphStructureError("self-loop edge")
            if u.min() < 0 or v.min() < 0 or max(u.max(), v.max()) >= n:
                raise GraphStructureError("edge references unknown vertex")
            d = self.coords[u] - self.coords[v]
            euclid = np.hypot(d[:, 0], d[:, 1])
            bad = np.abs(self.edge_len - euclid) > LENGTH_RTOL * np.maximum(euclid, 1.0)
            if np.any(bad):
                e = int(np.argmax(bad))
                raise GraphStructureError(
                    f"edge {e} length {self.edge_len[e]} != Euclidean {euclid[e]}")

    def _build_adjacency(self) -> None:
        n = len(self.coords)
        inc: list[list[tuple[float, int, int]]] = [[] for _ in range(n)]
        for eid, (u, v) in enumerate(self.edge_uv):
            u, v = int(u), int(v)
            ang_uv = math.atan2(self.coords[v, 1] - self.coords[u, 1],
                                self.coords[v, 0] - self.coords[u, 0])
            ang_vu = math.atan2(self.coords[u, 1] - self.coords[v, 1],
                                self.coords[u, 0] - self.coords[v, 0])
            inc[u].append((ang_uv, v, eid))
            inc[v].append((ang_vu, u, eid))
        self.adjacency: list[list[tuple[int, int]]] = []
        self._nbr_pos: list[dict[int, int]] = []
        for vid, lst in enumerate(inc):
            lst.sort()
            for (a1, n1, _), (a2, n2, _) in zip(lst, lst[1:]):
                if a1 == a2:
                    raise EmbeddingError(
                        f"vertex {vid}: neighbors {n1} and {n2} share direction")
            self.adjacency.append([(nbr, eid) for _, nbr, eid in lst])
            self._nbr_pos.append({nbr: i for i, (nbr, _) in enumerate(self.adjacency[-1])})
        self._check_connected()

    def _check_connected(self) -> None:
        n = len(self.coords)
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            v = stack.pop()
            for nbr, _ in self.adjacency[v]:
                if not seen[nbr]:
                    seen[nbr] = True
                    stack.append(nbr)
        if not seen.all():
            comps = _component_count(n, self.adjacency)
            raise GraphStructureError(f"graph is disconnected ({comps} components)")

    # -- accessors -----------------------------------------------------------

    @property
    def vertex_count(self) -> int:
        return len(self.coords)

    @property
    def edge_count(self) -> int:
        return len(self.edge_uv)

    @property
    def poi_type_count(self) -> int:
        return self.poi_counts.shape[1]

    def vertex(self, i: int) -> Vertex:
        return Vertex(i, float(self.coords[i, 0]), float(self.coords[i, 1]))

    def edge(self, e: int) -> Edge:
        u, v = map(int, self.edge_uv[e])
        return Edge(e, u, v, float(self.edge_len[e]), self.poi_counts[e])

    def point(self, i: int) -> tuple[float, float]:
        return (float(self.coords[i, 0]), float(self.coords[i, 1]))

    def edge_segment(self, e: int):
        u, v = self.edge_uv[e]
        return self.point(int(u)), self.point(int(v))

    # -- embedding traversal --------------------------------------------------

    def clockwise_next(self, from_v: int, at_v: int) -> int:
        """Neighbor of `at_v` reached by the rightmost turn coming from `from_v`.

        The next edge clockwise after the reverse edge (at_v -> from_v) in the
        CCW-sorted angular order; a degree-1 vertex forces the U-turn back to
        `from_v`.
        """
        pos = self._nbr_pos[at_v].get(from_v)
        if pos is None:
            raise GraphStructureError(f"({from_v}, {at_v}) is not an edge")
        nbrs = self.adjacency[at_v]
        return nbrs[(pos - 1) % len(nbrs)][0]

    def to_json(self) -> str:
        doc = {
            "poi_type_count": self.poi_type_count,
            "vertices": [[i, x, y] for i, (x, y) in enumerate(self.coords.tolist())],
            "edges": [
                [e, int(u), int(v), self.edge_len[e], self.poi_counts[e].tolist()]
                for e, (u, v) in enumerate(self.edge_uv.tolist())
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "RoadGraph":
        doc = json.loads(text)
        coords = np.array([[x, y] for _, x, y in doc["vertices"]], dtype=np.float64)
        m = doc["poi_type_count"]
        edges = doc["edges"]
        uv = np.array([[u, v] for _, u, v, _, _ in edges], dtype=np.int64).reshape(-1, 2)
        lens = np.array([l for _, _, _, l, _ in edges], dtype=np.float64)
        pois = np.array([p for _, _, _, _, p in edges], dtype=np.int64).reshape(-1, m)
        return cls(coords, uv, lens, pois)


def _component_count(n: int, adjacency) -> int:
    seen = [False] * n
    comps = 0
    for s in range(n):
        if seen[s]:
            continue
        comps += 1
        stack = [s]
        seen[s] = True
        while stack:
            v = stack.pop()
            for nbr, _ in adjacency[v]:
                if not seen[nbr]:
                    seen[nbr] = True
                    stack.append(nbr)
    return comps


def clockwise_next(g: RoadGraph, from_v: int, at_v: int) -> int:
    return g.clockwise_next(from_v, at_v)


# ---------------------------------------------------------------------------
# File ingestion
# ---------------------------------------------------------------------------


def _parse_lines(path: Path, n_fields_min: int, n_fields_max: int):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if not (n_fields_min <= len(fields) <= n_fields_max):
                raise GraphLoadError(
                    f"{path}:{lineno}: expected {n_fields_min}"
                    f"{'' if n_fields_min == n_fields_max else f'..{n_fields_max}'}"
                    f" fields, got {len(fields)}")
            rows.append((lineno, fields))
    return rows


def load_graph(nodes_path, edges_path, pois_path, poi_type_count: int) -> RoadGraph:
    """Load the three text files into a validated RoadGraph.

    POIs are aggregated into per-edge count vectors; their offsets along the
    edge are parsed (range-checked) but not retained, since all scoring
    consumes per-edge counts only.
    """
    nodes_path, edges_path, pois_path = Path(nodes_path), Path(edges_path), Path(pois_path)
    id_to_idx: dict[int, int] = {}
    pts: list[tuple[float, float]] = []
    for lineno, f in _parse_lines(nodes_path, 3, 3):
        try:
            vid, x, y = int(f[0]), float(f[1]), float(f[2])
        except ValueError as exc:
            raise GraphLoadError(f"{nodes_path}:{lineno}: {exc}") from None
        if vid in id_to_idx:
            raise GraphLoadError(f"{nodes_path}:{lineno}: duplicate vertex id {vid}")
        id_to_idx[vid] = len(pts)
        pts.append((x, y))

    uv, lens = [], []
    eid_to_idx: dict[int, int] = {}
    for lineno, f in _parse_lines(edges_path, 3, 4):
        try:
            eid, u, v = int(f[0]), int(f[1]), int(f[2])
            given_len = float(f[3]) if len(f) == 4 else None
        except ValueError as exc:
            raise GraphLoadError(f"{edges_path}:{lineno}: {exc}") from None
        if eid in eid_to_idx:
            raise GraphLoadError(f"{edges_path}:{lineno}: duplicate edge id {eid}")
        if u not in id_to_idx or v not in id_to_idx:
            raise GraphLoadError(
                f"{edges_path}:{lineno}: edge {eid} references unknown vertex")
        ui, vi = id_to_idx[u], id_to_idx[v]
        eid_to_idx[eid] = len(uv)
        uv.append((ui, vi))
        if given_len is None:
            given_len = math.dist(pts[ui], pts[vi])
        lens.append(given_len)

    pois = np.zeros((len(uv), poi_type_count), dtype=np.int64)
    for lineno, f in _parse_lines(pois_path, 3, 3):
        try:
            eid, ptype, offset = int(f[0]), int(f[1]), float(f[2])
        except ValueError as exc:
            raise GraphLoadError(f"{pois_path}:{lineno}: {exc}") from None
        if eid not in eid_to_idx:
            raise GraphLoadError(f"{pois_path}:{lineno}: unknown edge id {eid}")
        if not 0 <= ptype < poi_type_count:
            raise GraphLoadError(
                f"{pois_path}:{lineno}: POI type {ptype} out of range [0, {poi_type_count})")
        if not 0.0 <= offset <= 1.0:
            raise GraphLoadError(f"{pois_path}:{lineno}: offset {offset} outside [0, 1]")
        pois[eid_to_idx[eid], ptype] += 1

    coords = np.array(pts, dtype=np.float64)
    return RoadGraph(coords, np.array(uv, dtype=np.int64).reshape(-1, 2),
                     np.array(lens, dtype=np.float64), pois)


def write_graph_files(g: RoadGraph, out_dir, poi_rows=None) -> None:
    """Write nodes/edges/pois text files for `g` (byte-deterministic)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "nodes.txt", "w", encoding="utf-8") as fh:
        for i, (x, y) in enumerate(g.coords.tolist()):
            fh.write(f"{i} {x!r} {y!r}\n")
    lens = g.edge_len.tolist()
    with open(out / "edges.txt", "w", encoding="utf-8") as fh:
        for e, (u, v) in enumerate(g.edge_uv.tolist()):
            fh.write(f"{e} {u} {v} {lens[e]!r}\n")
    with open(out / "pois.txt", "w", encoding="utf-8") as fh:
        if poi_rows is not None:
            for eid, ptype, offset in poi_rows:
                fh.write(f"{eid} {ptype} {offset!r}\n")
        else:
            # No offsets known: synthesize midpoint placements from the counts.
            for e in range(g.edge_count):
                for ptype in range(g.poi_type_count):
                    for _ in range(int(g.poi_counts[e, ptype])):
                        fh.write(f"{e} {ptype} 0.5\n")


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def validate_planarity(g: RoadGraph) -> dict:
    """Report all edge pairs whose segments cross (empty list iff planar).

    Uses an x-sweep over bounding intervals to keep the candidate pair set
    near-linear; the exact predicate is `segments_cross`. The brute-force
    O(E^2) double loop in the tests is the independent oracle.
    """
    E = g.edge_count
    if E < 2:
        return {"crossing_pairs": []}
    segs = [g.edge_segment(e) for e in range(E)]
    lo = np.minimum(g.coords[g.edge_uv[:, 0]], g.coords[g.edge_uv[:, 1]])
    hi = np.maximum(g.coords[g.edge_uv[:, 0]], g.coords[g.edge_uv[:, 1]])
    order = np.argsort(lo[:, 0], kind="stable")
    crossing = []
    active: list[int] = []
    for idx in order:
        x_start = lo[idx, 0]
        active = [j for j in active if hi[j, 0] >= x_start]
        for j in active:
            if lo[idx, 1] > hi[j, 1] or lo[j, 1] > hi[idx, 1]:
                continue
            if segments_cross(segs[idx][0], segs[idx][1], segs[j][0], segs[j][1]):
                crossing.append((int(min(idx, j)), int(max(idx, j))))
        active.append(int(idx))
    crossing.sort()
    return {"crossing_pairs": crossing}
