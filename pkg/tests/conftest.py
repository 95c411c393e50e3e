import numpy as np
import pytest

from roadcomm.graph import RoadGraph
from roadcomm.index import build_search_index
from roadcomm.synth import generate_graph


def make_graph(coords, edges, m=4, pois=None):
    """Build a RoadGraph from coordinate and edge lists.

    pois: optional {edge_id: vector} mapping; everything else is zeros.
    """
    coords = np.array(coords, dtype=np.float64)
    uv = np.array(edges, dtype=np.int64).reshape(-1, 2)
    d = coords[uv[:, 0]] - coords[uv[:, 1]]
    lens = np.hypot(d[:, 0], d[:, 1])
    mat = np.zeros((len(edges), m), dtype=np.int64)
    if pois:
        for eid, vec in pois.items():
            mat[eid] = vec
    return RoadGraph(coords, uv, lens, mat)


@pytest.fixture
def triangle():
    return make_graph([(0, 0), (2, 0), (1, 2)], [(0, 1), (1, 2), (2, 0)])


@pytest.fixture
def square():
    # CCW square v0..v3
    return make_graph([(0, 0), (1, 0), (1, 1), (0, 1)],
                      [(0, 1), (1, 2), (2, 3), (3, 0)])


@pytest.fixture
def grid2x2():
    # 3x3 vertices, 12 edges, 4 unit squares
    coords = [(x, y) for y in range(3) for x in range(3)]
    edges = []
    for y in range(3):
        for x in range(2):
            edges.append((y * 3 + x, y * 3 + x + 1))
    for y in range(2):
        for x in range(3):
            edges.append((y * 3 + x, (y + 1) * 3 + x))
    return make_graph(coords, edges)


@pytest.fixture
def triangle_with_dangle():
    return make_graph([(0, 0), (2, 0), (1, 2), (-1, -1)],
                      [(0, 1), (1, 2), (2, 0), (0, 3)])


def fig_community_graph():
    """8 vertices, 10 edges: one rectangle, two deltas sharing an edge, one
    dead end, all near vertex 3 -- the worked community example layout.

    Edge POI vectors are chosen so the worked similarity numbers can be
    reproduced: the dangle carries (2,1,1,0), the two deltas sum to
    (2,5,0,2) and (4,3,1,2).
    """
    coords = [
        (0.0, 0.0),   # 0 rectangle corner
        (2.0, 0.0),   # 1
        (2.0, 1.5),   # 2
        (0.0, 1.5),   # 3 community center
        (-1.5, 1.0),  # 4 delta A
        (-1.5, 2.5),  # 5 shared by both deltas
        (-0.5, 3.5),  # 6 delta B
        (1.0, 2.5),   # 7 dead end
    ]
    edges = [
        (0, 1), (1, 2), (2, 3), (3, 0),   # rectangle
        (3, 4), (4, 5), (5, 3),           # delta A
        (5, 6), (6, 3),                   # delta B (shares edge 5-3)
        (3, 7),                           # dangling edge
    ]
    pois = {
        9: (2, 1, 1, 0),                  # dangle
        4: (1, 2, 0, 1), 5: (1, 2, 0, 1), 6: (0, 1, 0, 0),   # delta A -> (2,5,0,2)
        7: (2, 1, 1, 1), 8: (2, 1, 1, 1),                     # delta B: 7+8+6 -> (4,3,1,2)
        0: (1, 1, 2, 0), 1: (0, 2, 0, 1), 2: (1, 0, 1, 1), 3: (0, 0, 0, 1),
    }
    return make_graph(coords, edges, m=4, pois=pois)


@pytest.fixture
def community_graph():
    return fig_community_graph()


@pytest.fixture
def small_index():
    g, _ = generate_graph(400, poi_type_count=4, poi_mean=3.0, extent=30.0, seed=11)
    return build_search_index(g, radius=3.0)
