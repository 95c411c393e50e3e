"""Top-k community similarity search over planar road-network graphs."""

from .continuous import (CTopKResult, IntervalResult, QuerySegment, SplitEvent,
                         baseline_ctopk, ctopk_search, find_split_points,
                         run_cquery, sweep_pattern_sets)
from .errors import (EmbeddingError, GraphLoadError, GraphStructureError,
                     PersistError, QueryError, RoadCommError)
from .graph import Edge, RoadGraph, Vertex, clockwise_next, load_graph, \
    validate_planarity, write_graph_files
from .index import (ARTree, Community, CommunityStore, IoCounter, SearchIndex,
                    build_artree, build_search_index, circle_range_query,
                    compute_communities, segment_range_query)
from .patterns import (EDGE, DELTA, HEXAGON, PENTAGON, RECTANGLE, UnitPattern,
                       classify, detect_unit_patterns, fingerprint,
                       mindist_point_pattern, type_name)
from .persist import load_index, save_index
from .query import (TopKResult, QueryStats, assemble_candidates, baseline_topk,
                    extract_query_community, retrieve_candidates, run_query,
                    select_topk, topk_search)
from .similarity import (QueryCommunity, candidate_threshold, community_sim,
                         distance_prune, dot_sim, score_upper_bound_prune,
                         ub_community_sim)
from .synth import gen_edges, gen_pois, gen_vertices, generate_graph, write_dataset

__version__ = "0.1.0"
