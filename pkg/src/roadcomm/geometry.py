"""Planar geometry primitives shared by the graph, index, and sweep code.

Everything here works on plain floats / 2-tuples; vectorized variants for
hot paths live next to their call sites and are cross-checked against these
scalar forms in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Collinearity epsilon for orientation tests on double coordinates.
ORIENT_EPS = 1e-12


@dataclass(frozen=True)
class MBR:
    """Axis-aligned minimum bounding rectangle."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self) -> None:
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise ValueError(f"inverted MBR: {self}")

    def union(self, other: "MBR") -> "MBR":
        return MBR(
            min(self.min_x, other.min_x),
            min(self.min_y, other.min_y),
            max(self.max_x, other.max_x),
            max(self.max_y, other.max_y),
        )

    def contains(self, other: "MBR") -> bool:
        return (
            self.min_x <= other.min_x
            and self.min_y <= other.min_y
            and self.max_x >= other.max_x
            and self.max_y >= other.max_y
        )

    def contains_point(self, x: float, y: float) -> bool:
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y


def mbr_of_points(points) -> MBR:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return MBR(min(xs), min(ys), max(xs), max(ys))


def mindist_point_mbr(x: float, y: float, mbr: MBR) -> float:
    dx = max(mbr.min_x - x, 0.0, x - mbr.max_x)
    dy = max(mbr.min_y - y, 0.0, y - mbr.max_y)
    return math.hypot(dx, dy)


def maxdist_point_mbr(x: float, y: float, mbr: MBR) -> float:
    """Distance from (x, y) to the farthest corner of the rectangle."""
    dx = max(x - mbr.min_x, mbr.max_x - x)
    dy = max(y - mbr.min_y, mbr.max_y - y)
    return math.hypot(dx, dy)


def orientation(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the cross product (b-a) x (c-a): +1 left turn, -1 right, 0 collinear."""
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if v > ORIENT_EPS:
        return 1
    if v < -ORIENT_EPS:
        return -1
    return 0


def _on_segment(ax, ay, bx, by, px, py) -> bool:
    # Assumes p collinear with segment ab.
    return min(ax, bx) - ORIENT_EPS <= px <= max(ax, bx) + ORIENT_EPS and (
        min(ay, by) - ORIENT_EPS <= py <= max(ay, by) + ORIENT_EPS
    )


def segments_cross(a, b, c, d) -> bool:
    """True iff segments ab and cd intersect anywhere except at a shared endpoint.

    Touching at an interior point (T-junction), proper crossings, and
    collinear overlaps all count as crossings; meeting exactly at a common
    endpoint does not.
    """
    shared = {a, b} & {c, d}
    if shared:
        if len(shared) == 2:
            return True  # identical/duplicate segment
        # One shared endpoint: reject only collinear overlap of the free parts.
        (p,) = shared
        q = b if a == p else a
        s = d if c == p else c
        if orientation(*p, *q, *s) == 0:
            # Same direction from the shared point means overlap.
            return (q[0] - p[0]) * (s[0] - p[0]) + (q[1] - p[1]) * (s[1] - p[1]) > 0
        return False

    o1 = orientation(*a, *b, *c)
    o2 = orientation(*a, *b, *d)
    o3 = orientation(*c, *d, *a)
    o4 = orientation(*c, *d, *b)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _on_segment(*a, *b, *c):
        return True
    if o2 == 0 and _on_segment(*a, *b, *d):
        return True
    if o3 == 0 and _on_segment(*c, *d, *a):
        return True
    if o4 == 0 and _on_segment(*c, *d, *b):
        return True
    return False


def point_segment_dist(px, py, ax, ay, bx, by) -> float:
    ux, uy = bx - ax, by - ay
    wx, wy = px - ax, py - ay
    denom = ux * ux + uy * uy
    if denom == 0.0:
        return math.hypot(wx, wy)
    t = (wx * ux + wy * uy) / denom
    t = min(1.0, max(0.0, t))
    return math.hypot(wx - t * ux, wy - t * uy)


def segment_segment_dist(a, b, c, d) -> float:
    if segments_cross(a, b, c, d) or ({a, b} & {c, d}):
        return 0.0
    return min(
        point_segment_dist(*a, *c, *d),
        point_segment_dist(*b, *c, *d),
        point_segment_dist(*c, *a, *b),
        point_segment_dist(*d, *a, *b),
    )


def mindist_segment_mbr(a, b, mbr: MBR) -> float:
    if mbr.contains_point(*a) or mbr.contains_point(*b):
        return 0.0
    corners = [
        (mbr.min_x, mbr.min_y),
        (mbr.max_x, mbr.min_y),
        (mbr.max_x, mbr.max_y),
        (mbr.min_x, mbr.max_y),
    ]
    best = math.inf
    for i in range(4):
        c, d = corners[i], corners[(i + 1) % 4]
        if segments_cross(a, b, c, d):
            return 0.0
        best = min(best, segment_segment_dist(a, b, c, d))
    return best


# ---------------------------------------------------------------------------
# Interval arithmetic on a parameterized segment p(t) = A + t*(B-A), t in [0,1]
# ---------------------------------------------------------------------------


def merge_intervals(intervals, tol: float = 0.0):
    """Merge overlapping/adjacent closed intervals; returns a sorted list."""
    ivs = sorted((lo, hi) for lo, hi in intervals if hi >= lo)
    out: list[tuple[float, float]] = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1] + tol:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def _quadratic_sublevel(a: float, b: float, c: float):
    """Solution interval of a*t^2 + b*t + c <= 0 with a >= 0, or None."""
    if a <= 0.0:
        if abs(b) < 1e-300:
            return (-math.inf, math.inf) if c <= 0.0 else None
        t = -c / b
        return (-math.inf, t) if b > 0 else (t, math.inf)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return None
    s = math.sqrt(disc)
    return ((-b - s) / (2.0 * a), (-b + s) / (2.0 * a))


def moving_point_circle_interval(a, b, center, r: float):
    """{t : |a + t*(b-a) - center| <= r}, unclamped, or None if empty."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    wx, wy = a[0] - center[0], a[1] - center[1]
    return _quadratic_sublevel(
        dx * dx + dy * dy, 2.0 * (dx * wx + dy * wy), wx * wx + wy * wy - r * r
    )


def moving_point_segment_interval(a, b, p, q, r: float):
    """{t in [0,1] : dist(a + t*(b-a), segment pq) <= r}, clamped to [0,1].

    The sublevel set of a convex function of t, so it is a single interval;
    assembled in closed form from the two endpoint-circle pieces and the
    perpendicular-band piece. Returns (lo, hi) or None.
    """
    pieces = []
    for c in (p, q):
        iv = moving_point_circle_interval(a, b, c, r)
        if iv is not None:
            pieces.append(iv)

    # Band piece: foot of perpendicular lies inside pq and line distance <= r.
    ux, uy = q[0] - p[0], q[1] - p[1]
    dx, dy = b[0] - a[0], b[1] - a[1]
    wx, wy = a[0] - p[0], a[1] - p[1]
    uu = ux * ux + uy * uy
    if uu > 0.0:
        # s(t) = (w.u + t d.u) / uu must be in [0, 1]
        s0 = wx * ux + wy * uy
        s1 = dx * ux + dy * uy
        if abs(s1) < 1e-300:
            s_iv = (-math.inf, math.inf) if 0.0 <= s0 <= uu else None
        else:
            ta, tb = -s0 / s1, (uu - s0) / s1
            s_iv = (min(ta, tb), max(ta, tb))
        if s_iv is not None:
            # |cross(u, w) + t*cross(u, d)| <= r*|u|
            c0 = ux * wy - uy * wx
            c1 = ux * dy - uy * dx
            lim = r * math.sqrt(uu)
            if abs(c1) < 1e-300:
                d_iv = (-math.inf, math.inf) if abs(c0) <= lim else None
            else:
                ta, tb = (-lim - c0) / c1, (lim - c0) / c1
                d_iv = (min(ta, tb), max(ta, tb))
            if d_iv is not None:
                lo = max(s_iv[0], d_iv[0])
                hi = min(s_iv[1], d_iv[1])
                if lo <= hi:
                    pieces.append((lo, hi))

    if not pieces:
        return None
    merged = merge_intervals(pieces, tol=1e-12)
    # Convexity of t -> dist(p(t), pq) guarantees a single interval.
    lo = max(merged[0][0], 0.0)
    hi = min(merged[-1][1], 1.0)
    if lo > hi:
        return None
    return (lo, hi)
