"""Planar geometry: route polylines, oriented rectangles, sight lines."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class Polyline:
    """A route parametrized by arc length ``s``.

    Positions beyond either end are clamped to the endpoints.
    """

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 1:
            raise ValueError("polyline needs an (n, 2) array of points")
        seg = np.diff(pts, axis=0)
        lengths = np.hypot(seg[:, 0], seg[:, 1])
        keep = np.concatenate([[True], lengths > 1e-12])
        self.points = pts[keep]
        seg = np.diff(self.points, axis=0)
        self._seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.cum = np.concatenate([[0.0], np.cumsum(self._seg_len)])
        self._headings = np.arctan2(seg[:, 1], seg[:, 0]) if len(seg) else np.zeros(0)

    @property
    def length(self) -> float:
        return float(self.cum[-1])

    def _segment(self, s: float) -> int:
        idx = int(np.searchsorted(self.cum, s, side="right")) - 1
        return min(max(idx, 0), len(self._seg_len) - 1)

    def point_at(self, s: float) -> np.ndarray:
        if len(self._seg_len) == 0:
            return self.points[0].copy()
        s = min(max(s, 0.0), self.length)
        i = self._segment(s)
        frac = (s - self.cum[i]) / self._seg_len[i]
        return self.points[i] + frac * (self.points[i + 1] - self.points[i])

    def heading_at(self, s: float) -> float:
        if len(self._seg_len) == 0:
            return 0.0
        s = min(max(s, 0.0), self.length)
        return float(self._headings[self._segment(s)])

    def project(self, p) -> float:
        """Arc length of the closest point on the polyline to ``p``."""
        p = np.asarray(p, dtype=float)
        if len(self._seg_len) == 0:
            return 0.0
        a = self.points[:-1]
        d = self.points[1:] - a
        t = np.clip(np.einsum("ij,ij->i", p - a, d) / self._seg_len ** 2, 0.0, 1.0)
        closest = a + t[:, None] * d
        dist = np.hypot(*(closest - p).T)
        i = int(np.argmin(dist))
        return float(self.cum[i] + t[i] * self._seg_len[i])


def arc_points(center, radius, start_angle, end_angle, n=24):
    angles = np.linspace(start_angle, end_angle, n + 1)
    return np.column_stack([center[0] + radius * np.cos(angles),
                            center[1] + radius * np.sin(angles)])


def _segment_intersection(p, p2, q, q2):
    """Parameters (t, u) of the crossing of segments p->p2 and q->q2, or None."""
    r = p2 - p
    s = q2 - q
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < 1e-12:
        return None
    qp = q - p
    t = (qp[0] * s[1] - qp[1] * s[0]) / denom
    u = (qp[0] * r[1] - qp[1] * r[0]) / denom
    if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
        return t, u
    return None


def polyline_crossings(a: Polyline, b: Polyline) -> list[tuple[np.ndarray, float, float]]:
    """All transversal crossings of two polylines as (point, s_a, s_b)."""
    hits = []
    for i in range(len(a.points) - 1):
        for j in range(len(b.points) - 1):
            res = _segment_intersection(a.points[i], a.points[i + 1], b.points[j], b.points[j + 1])
            if res is None:
                continue
            t, u = res
            s_a = a.cum[i] + t * a._seg_len[i]
            s_b = b.cum[j] + u * b._seg_len[j]
            # a crossing exactly at a shared vertex shows up on both adjacent segments
            if any(abs(s_a - h[1]) < 1e-6 and abs(s_b - h[2]) < 1e-6 for h in hits):
                continue
            hits.append((a.points[i] + t * (a.points[i + 1] - a.points[i]), s_a, s_b))
    return hits


@dataclass(frozen=True)
class Rectangle:
    """Oriented rectangle; ``length`` runs along ``heading``."""

    cx: float
    cy: float
    length: float
    width: float
    heading: float = 0.0

    def corners(self) -> np.ndarray:
        c, s = math.cos(self.heading), math.sin(self.heading)
        hl, hw = self.length / 2, self.width / 2
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.cx, self.cy])

    def to_local(self, p) -> tuple[float, float]:
        dx, dy = p[0] - self.cx, p[1] - self.cy
        c, s = math.cos(self.heading), math.sin(self.heading)
        return dx * c + dy * s, -dx * s + dy * c

    def contains(self, p) -> bool:
        x, y = self.to_local(p)
        return abs(x) <= self.length / 2 and abs(y) <= self.width / 2


def segment_hits_rectangle(a, b, rect: Rectangle) -> bool:
    """Whether the open segment a->b meets the closed rectangle (slab test)."""
    ax, ay = rect.to_local(a)
    bx, by = rect.to_local(b)
    dx, dy = bx - ax, by - ay
    t0, t1 = 0.0, 1.0
    for start, delta, half in ((ax, dx, rect.length / 2), (ay, dy, rect.width / 2)):
        if abs(delta) < 1e-15:
            if abs(start) > half:
                return False
            continue
        ta = (-half - start) / delta
        tb = (half - start) / delta
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return False
    # open segment: an intersection only at an endpoint does not block
    if t1 <= 0.0 or t0 >= 1.0:
        return False
    return True


def line_of_sight(observer, target, occluders) -> bool:
    """True iff no occluder rectangle intersects the open segment observer->target."""
    observer = np.asarray(observer, dtype=float)
    target = np.asarray(target, dtype=float)
    return not any(segment_hits_rectangle(observer, target, r) for r in occluders)
