"""Exception types raised by the library."""


class RoadCommError(Exception):
    """Base class for all library errors."""


class GraphLoadError(RoadCommError):
    """Malformed input files or referential problems while loading a graph."""


class GraphStructureError(RoadCommError):
    """A loaded/constructed graph violates a structural invariant."""


class EmbeddingError(RoadCommError):
    """The planar embedding is inconsistent (angular ties, broken face walk)."""


class QueryError(RoadCommError):
    """A query is malformed or empty (e.g. no pattern intersects the disc)."""


class PersistError(RoadCommError):
    """Index file is corrupt, truncated, or has an unsupported version."""
