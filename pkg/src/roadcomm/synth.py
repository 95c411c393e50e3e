"""Synthetic road-network generation: vertices (uniform or clustered),
planar nearest-neighbor edges with crossing rejection, and Poisson POIs.

Everything is a pure function of its inputs and seed; the same seed yields
byte-identical output files.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree

from .errors import GraphStructureError
from .geometry import segments_cross
from .graph import RoadGraph, write_graph_files


def gen_vertices(n: int, mode: str = "uniform", cluster_count: int = 5,
                 extent: float = 100.0, seed: int = 0,
                 return_seeds: bool = False):
    """n distinct points in [0, extent]^2.

    Clustered mode drops cluster_count uniform seed points and scatters the
    rest around uniformly chosen seeds with Gaussian offsets of
    sigma = extent / (10 * cluster_count), clipped to the box.
    """
    if n < 3:
        raise ValueError(f"need at least 3 vertices, got {n}")
    if extent <= 0:
        raise ValueError(f"extent must be > 0, got {extent}")
    rng = np.random.default_rng(seed)
    if mode == "uniform":
        pts = rng.uniform(0.0, extent, size=(n, 2))
        seeds = np.empty((0, 2))
    elif mode == "clustered":
        if cluster_count < 1:
            raise ValueError(f"cluster_count must be >= 1, got {cluster_count}")
        seeds = rng.uniform(0.0, extent, size=(cluster_count, 2))
        sigma = extent / (10.0 * cluster_count)
        rest = n - cluster_count
        if rest > 0:
            pick = rng.integers(0, cluster_count, size=rest)
            offs = rng.normal(0.0, sigma, size=(rest, 2))
            others = np.clip(seeds[pick] + offs, 0.0, extent)
            pts = np.vstack([seeds, others])
        else:
            pts = seeds[:n].copy()
    else:
        raise ValueError(f"unknown vertex mode {mode!r}")

    # Duplicate coordinates are measure-zero but fatal downstream: jiggle.
    seen = {}
    for i in range(n):
        key = (pts[i, 0], pts[i, 1])
        while key in seen:
            pts[i] = np.clip(pts[i] + rng.uniform(-1e-9, 1e-9, 2), 0.0, extent)
            key = (pts[i, 0], pts[i, 1])
        seen[key] = i
    if return_seeds:
        return pts, seeds
    return pts


class _EdgeGrid:
    """Uniform grid over edge bounding boxes for fast crossing candidates."""

    def __init__(self, extent: float, n_points: int):
        self.cell = max(extent / max(1.0, math.sqrt(n_points)), 1e-9) * 2.0
        self.cells: dict[tuple[int, int], list[int]] = {}

    def _span(self, a, b):
        x0, x1 = sorted((a[0], b[0]))
        y0, y1 = sorted((a[1], b[1]))
        return (int(x0 // self.cell), int(x1 // self.cell),
                int(y0 // self.cell), int(y1 // self.cell))

    def add(self, eid: int, a, b) -> None:
        ix0, ix1, iy0, iy1 = self._span(a, b)
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                self.cells.setdefault((ix, iy), []).append(eid)

    def candidates(self, a, b):
        ix0, ix1, iy0, iy1 = self._span(a, b)
        out: set[int] = set()
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                lst = self.cells.get((ix, iy))
                if lst:
                    out.update(lst)
        return out


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def gen_edges(points: np.ndarray, deg_min: int = 3, deg_max: int = 3,
              seed: int = 0) -> RoadGraph:
    """Connect each vertex to its nearest neighbors without edge crossings.

    Vertices are processed in a seeded random order; each tops its degree up
    to a draw from [deg_min, deg_max], skipping candidates whose segment
    would cross an existing edge or duplicate one. Remaining components are
    then stitched with the shortest non-crossing inter-component edges.
    """
    if deg_min < 1 or deg_max < deg_min:
        raise ValueError(f"bad degree range [{deg_min}, {deg_max}]")
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    extent = float(max(pts[:, 0].max() - pts[:, 0].min(),
                       pts[:, 1].max() - pts[:, 1].min(), 1e-9))
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    target = rng.integers(deg_min, deg_max + 1, size=n)

    tree = cKDTree(pts)
    grid = _EdgeGrid(extent, n)
    uf = _UnionFind(n)
    degree = np.zeros(n, dtype=np.int64)
    edges: list[tuple[int, int]] = []
    edge_set: set[tuple[int, int]] = set()

    def segment_ok(u: int, v: int) -> bool:
        a, b = tuple(pts[u]), tuple(pts[v])
        for eid in grid.candidates(a, b):
            p, q = edges[eid]
            if segments_cross(a, b, tuple(pts[p]), tuple(pts[q])):
                return False
        return True

    def add_edge(u: int, v: int) -> None:
        key = (min(u, v), max(u, v))
        eid = len(edges)
        edges.append(key)
        edge_set.add(key)
        grid.add(eid, tuple(pts[u]), tuple(pts[v]))
        degree[u] += 1
        degree[v] += 1
        uf.union(u, v)

    k_query = min(n, deg_max * 4 + 8)
    for v in order:
        if degree[v] >= target[v]:
            continue
        _, idx = tree.query(pts[v], k=k_query)
        for u in np.atleast_1d(idx):
            u = int(u)
            if degree[v] >= target[v]:
                break
            if u == v or u >= n:
                continue
            # Skipping partners already at their own target keeps the average
            # degree at the drawn d instead of drifting toward 2d.
            if degree[u] >= target[u]:
                continue
            key = (min(u, v), max(u, v))
            if key in edge_set or not segment_ok(u, v):
                continue
            add_edge(u, v)

    _repair_connectivity(pts, tree, uf, edges, edge_set, grid, add_edge, extent)

    uv = np.array(edges, dtype=np.int64).reshape(-1, 2)
    d = pts[uv[:, 0]] - pts[uv[:, 1]]
    lens = np.hypot(d[:, 0], d[:, 1])
    pois = np.zeros((len(edges), 1), dtype=np.int64)
    return RoadGraph(pts, uv, lens, pois)


def _repair_connectivity(pts, tree, uf, edges, edge_set, grid, add_edge,
                         extent: float) -> None:
    n = len(pts)

    def components() -> int:
        return len({uf.find(i) for i in range(n)})

    radius = extent / max(1.0, math.sqrt(n)) * 4.0
    max_radius = extent * 3.0
    while components() > 1:
        progressed = False
        while radius <= max_radius and not progressed:
            pairs = []
            for u, v in tree.query_pairs(radius):
                if uf.find(u) != uf.find(v):
                    pairs.append((float(np.hypot(*(pts[u] - pts[v]))), u, v))
            pairs.sort()
            for _, u, v in pairs:
                if uf.find(u) == uf.find(v):
                    continue
                key = (min(u, v), max(u, v))
                if key in edge_set:
                    continue
                a, b = tuple(pts[u]), tuple(pts[v])
                crossing = any(
                    segments_cross(a, b, tuple(pts[p]), tuple(pts[q]))
                    for eid in grid.candidates(a, b)
                    for p, q in [edges[eid]])
                if crossing:
                    continue
                add_edge(u, v)
                progressed = True
            if not progressed:
                radius *= 2.0
        if not progressed:
            raise GraphStructureError(
                "connectivity repair exhausted candidate pairs")


def gen_poi_rows(g: RoadGraph, poi_type_count: int, mean_per_edge: float,
                 seed: int = 0) -> list[tuple[int, int, float]]:
    """(edge_id, poi_type, offset) rows, Poisson counts and uniform types."""
    if mean_per_edge < 0:
        raise ValueError(f"mean_per_edge must be >= 0, got {mean_per_edge}")
    if poi_type_count < 1:
        raise ValueError(f"poi_type_count must be >= 1, got {poi_type_count}")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(mean_per_edge, size=g.edge_count)
    rows: list[tuple[int, int, float]] = []
    for e in range(g.edge_count):
        c = int(counts[e])
        if c == 0:
            continue
        types = rng.integers(0, poi_type_count, size=c)
        offsets = rng.random(c)
        rows.extend((e, int(t), float(o)) for t, o in zip(types, offsets))
    return rows


def gen_pois(g: RoadGraph, poi_type_count: int, mean_per_edge: float,
             seed: int = 0) -> RoadGraph:
    """Replace the graph's POI matrix with freshly generated counts."""
    rows = gen_poi_rows(g, poi_type_count, mean_per_edge, seed)
    pois = np.zeros((g.edge_count, poi_type_count), dtype=np.int64)
    for eid, ptype, _ in rows:
        pois[eid, ptype] += 1
    return RoadGraph(g.coords, g.edge_uv, g.edge_len, pois)


def generate_graph(n: int, mode: str = "uniform", cluster_count: int = 5,
                   deg_min: int = 3, deg_max: int = 3, poi_type_count: int = 4,
                   poi_mean: float = 3.0, extent: float = 100.0,
                   seed: int = 0):
    """Full pipeline: vertices -> planar edges -> POIs.

    Returns (graph, poi_rows); child seeds are derived so each stage has an
    independent deterministic stream. `seed` may be an int or a SeedSequence.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_verts, s_edges, s_pois = ss.spawn(3)
    pts = gen_vertices(n, mode=mode, cluster_count=cluster_count,
                       extent=extent, seed=s_verts)
    g = gen_edges(pts, deg_min=deg_min, deg_max=deg_max, seed=s_edges)
    rows = gen_poi_rows(g, poi_type_count, poi_mean, seed=s_pois)
    pois = np.zeros((g.edge_count, poi_type_count), dtype=np.int64)
    for eid, ptype, _ in rows:
        pois[eid, ptype] += 1
    g = RoadGraph(g.coords, g.edge_uv, g.edge_len, pois)
    return g, rows


def write_dataset(out_dir, n: int, mode: str = "uniform", cluster_count: int = 5,
                  deg_min: int = 3, deg_max: int = 3, poi_type_count: int = 4,
                  poi_mean: float = 3.0, extent: float = 100.0,
                  seed: int = 0) -> RoadGraph:
    g, rows = generate_graph(n, mode, cluster_count, deg_min, deg_max,
                             poi_type_count, poi_mean, extent, seed)
    write_graph_files(g, out_dir, poi_rows=rows)
    return g
