"""Scoring math: pattern similarity, community similarity, pruning bounds.

Scores default to raw integer dot products over POI count vectors. That is
what every worked numeric example implies, and it is the only mode in which
the element-wise-max upper bound argument is monotone. A true normalized
cosine mode exists behind ``mode="cosine"``; its upper bound falls back to
the per-cosine cap of 1, which stays sound but prunes less.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import QueryError

SCORING_MODES = ("dot", "cosine")


def _check_mode(mode: str) -> None:
    if mode not in SCORING_MODES:
        raise ValueError(f"unknown scoring mode {mode!r}; expected one of {SCORING_MODES}")


def dot_sim(a, b, mode: str = "dot") -> float:
    """Similarity of two POI vectors: raw dot product, or normalized cosine."""
    _check_mode(mode)
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"POI vector length mismatch: {a.shape} vs {b.shape}")
    d = float(np.dot(a, b))
    if mode == "dot":
        return d
    na, nb = float(np.dot(a, a)) ** 0.5, float(np.dot(b, b)) ** 0.5
    if na == 0.0 or nb == 0.0:
        return 0.0
    return d / (na * nb)


def _pairwise_sum(cvecs: np.ndarray, qvecs: np.ndarray, mode: str) -> float:
    """Sum over all (c, q) pairs of dot_sim(c, q)."""
    if mode == "dot":
        return float(np.dot(cvecs.sum(axis=0), qvecs.sum(axis=0)))
    cn = np.linalg.norm(cvecs, axis=1)
    qn = np.linalg.norm(qvecs, axis=1)
    dots = cvecs.astype(np.float64) @ qvecs.astype(np.float64).T
    denom = np.outer(cn, qn)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0.0, dots / denom, 0.0)
    return float(cos.sum())


@dataclass
class QueryCommunity:
    """The query side of a similarity comparison.

    per_type_vecs maps a pattern type id to a (count, m) matrix of POI
    vectors; pattern_ids optionally records which detected patterns those
    rows came from (the lens case).
    """

    center: tuple[float, float]
    radius: float
    per_type_vecs: dict[int, np.ndarray]
    pattern_ids: dict[int, tuple[int, ...]] | None = None
    per_type_sum: dict[int, np.ndarray] = field(init=False, repr=False)
    per_type_max: dict[int, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.per_type_vecs:
            raise QueryError("query community has no unit patterns")
        self.per_type_vecs = {
            h: np.atleast_2d(np.asarray(v, dtype=np.int64))
            for h, v in sorted(self.per_type_vecs.items())
        }
        for h, v in self.per_type_vecs.items():
            if v.shape[0] < 1:
                raise QueryError(f"query type {h} has no patterns")
        self.per_type_sum = {h: v.sum(axis=0) for h, v in self.per_type_vecs.items()}
        self.per_type_max = {h: v.max(axis=0) for h, v in self.per_type_vecs.items()}

    @property
    def n(self) -> int:
        """Number of distinct pattern types present."""
        return len(self.per_type_vecs)

    def count(self, h: int) -> int:
        return self.per_type_vecs[h].shape[0]

    def type_counts(self) -> dict[int, int]:
        return {h: v.shape[0] for h, v in self.per_type_vecs.items()}

    def to_json(self) -> str:
        return json.dumps({
            "center": list(self.center),
            "radius": self.radius,
            "types": {str(h): v.tolist() for h, v in self.per_type_vecs.items()},
        })

    @classmethod
    def from_json(cls, text: str) -> "QueryCommunity":
        doc = json.loads(text)
        return cls(
            center=tuple(doc["center"]),
            radius=float(doc["radius"]),
            per_type_vecs={int(h): np.array(v, dtype=np.int64)
                           for h, v in doc["types"].items()},
        )


def community_sim(c, q: QueryCommunity, mode: str = "dot") -> float:
    """Average per-type similarity between a community and the query.

    Sums, over the types present in the query, the all-pairs similarity of
    that type's pattern vectors divided by (|q_h| * n); types missing from
    the community contribute zero.
    """
    _check_mode(mode)
    n = q.n
    if n == 0:
        raise QueryError("query community is empty")
    total = 0.0
    for h, qvecs in q.per_type_vecs.items():
        cvecs = c.per_type_vecs.get(h)
        if cvecs is None or cvecs.shape[0] == 0:
            continue
        total += _pairwise_sum(cvecs, qvecs, mode) / (qvecs.shape[0] * n)
    return total


def ub_community_sim(c, q: QueryCommunity, mode: str = "dot",
                     literal_eq5: bool = False) -> float:
    """Cheap upper bound on community_sim built from per-type max vectors.

    Default form: sum over query types of |c_h| * dot(c_h.max, q_h.max) / n,
    which dominates the exact score because every member vector is
    component-wise below the max vector. ``literal_eq5`` selects the
    uncorrected textbook form (no |c_h| factor, no /n) for comparison runs;
    that form is not a true upper bound.
    """
    _check_mode(mode)
    n = q.n
    if n == 0:
        raise QueryError("query community is empty")
    total = 0.0
    for h, qmax in q.per_type_max.items():
        cmax = c.per_type_max.get(h)
        if cmax is None:
            continue
        c_count = c.per_type_vecs[h].shape[0]
        if literal_eq5:
            total += dot_sim(cmax, qmax, mode)
        elif mode == "dot":
            total += c_count * float(np.dot(cmax, qmax)) / n
        else:
            total += c_count / n  # each cosine term is at most 1
    return total


def score_upper_bound_prune(ub: float, theta: float) -> bool:
    """True iff the community can be discarded without exact scoring."""
    return ub < theta


def distance_prune(d: float, kth_d: float) -> bool:
    """True iff distance d can be discarded given the current k-th distance."""
    return d >= kth_d


def candidate_threshold(theta: float, q_count: int, max_c_count: int) -> float:
    """Per-type retrieval threshold theta * |q_h| / max{|c_h|}.

    max_c_count = 0 means no community contains the type at all; the +inf
    sentinel makes the retrieval return nothing.
    """
    if q_count < 1:
        raise ValueError(f"q_count must be >= 1, got {q_count}")
    if max_c_count < 0:
        raise ValueError(f"max_c_count must be >= 0, got {max_c_count}")
    if max_c_count == 0:
        return math.inf
    return theta * q_count / max_c_count
