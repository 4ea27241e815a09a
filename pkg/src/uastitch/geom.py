"""2-D geometry: polylines, oriented boxes and covariance metrics.

Points are plain ``(2,)`` float arrays (or anything ``np.asarray`` accepts).
Every function here is pure; polylines are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SEGMENT_EPS = 1e-9
COV_EPS = 1e-6


class NotPositiveDefiniteError(ValueError):
    """Raised when a covariance cannot be made positive-definite."""


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"point has non-finite coordinates: {arr!r}")
    return arr


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


class Polyline:
    """Immutable 2-D polyline with cached cumulative arc lengths.

    Args:
        vertices: ``(n, 2)`` array-like, ``n >= 2``.
        dedupe: drop consecutive vertices closer than ``SEGMENT_EPS``
            instead of raising.
    """

    __slots__ = ("vertices", "arc", "_seg", "_seg_len")

    def __init__(self, vertices, dedupe: bool = False):
        pts = np.array(vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"polyline vertices must have shape (n, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("polyline has non-finite vertices")
        if dedupe and len(pts) > 1:
            keep = [0]
            for i in range(1, len(pts)):
                if np.hypot(*(pts[i] - pts[keep[-1]])) > SEGMENT_EPS:
                    keep.append(i)
            pts = pts[keep]
        if len(pts) < 2:
            raise ValueError("polyline needs at least 2 distinct vertices")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= SEGMENT_EPS):
            i = int(np.argmin(seg_len))
            raise ValueError(f"polyline vertices {i} and {i + 1} coincide")
        arc = np.concatenate([[0.0], np.cumsum(seg_len)])
        pts.setflags(write=False)
        arc.setflags(write=False)
        self.vertices = pts
        self.arc = arc
        self._seg = seg
        self._seg_len = seg_len

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        return f"Polyline(n={len(self)}, length={self.length:.3f})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Polyline) and np.array_equal(self.vertices, other.vertices)

    __hash__ = None

    @property
    def length(self) -> float:
        return float(self.arc[-1])

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[-1]

    def segment_index(self, s):
        """Index of the segment containing arc ``s``; interior vertices go to the following segment."""
        idx = np.searchsorted(self.arc, s, side="right") - 1
        return np.clip(idx, 0, len(self._seg) - 1)

    def point_at(self, s):
        """Point(s) at arc length ``s``, clamped to the polyline."""
        s_arr = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        idx = self.segment_index(s_arr)
        frac = (s_arr - self.arc[idx]) / self._seg_len[idx]
        return self.vertices[idx] + frac[..., None] * self._seg[idx]

    def tangent_at(self, s) -> np.ndarray:
        i = int(self.segment_index(float(s)))
        return self._seg[i] / self._seg_len[i]

    def heading_at(self, s: float) -> float:
        t = self.tangent_at(s)
        return wrap_angle(math.atan2(t[1], t[0]))

    def project(self, p) -> tuple[np.ndarray, float]:
        closest, arc = self.project_many(np.asarray(p, dtype=float).reshape(1, 2))
        return closest[0], float(arc[0])

    def project_many(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Euclidean projection of each row of ``points``.

        Ties between equidistant segments resolve to the smallest arc length.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        a = self.vertices[:-1]
        rel = pts[:, None, :] - a[None, :, :]
        t = np.einsum("nkj,kj->nk", rel, self._seg) / (self._seg_len**2)
        t = np.clip(t, 0.0, 1.0)
        # feet within rounding of a vertex are the vertex itself (a + 1 * (b - a) can miss b)
        t = np.where(t > 1.0 - 1e-12, 1.0, np.where(t < 1e-12, 0.0, t))
        foot = a[None] + t[..., None] * self._seg[None]
        foot = np.where((t == 1.0)[..., None], self.vertices[None, 1:], foot)
        d2 = np.sum((pts[:, None, :] - foot) ** 2, axis=2)
        best = d2.min(axis=1, keepdims=True)
        # first segment within rounding of the minimum -> smallest arc wins
        k = np.argmax(d2 <= best * (1.0 + 1e-12) + 1e-20, axis=1)
        rows = np.arange(len(pts))
        closest = foot[rows, k]
        arc = self.arc[k] + t[rows, k] * self._seg_len[k]
        return closest, arc

    def distance(self, p) -> float:
        closest, _ = self.project(p)
        return float(np.hypot(*(as_point(p) - closest)))

    def distances(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        closest, _ = self.project_many(pts)
        return np.hypot(*(pts - closest).T)

    def sub(self, s0: float, s1: float) -> Polyline | None:
        """Portion between arcs ``s0 < s1``; ``None`` when shorter than ``SEGMENT_EPS``."""
        s0 = max(0.0, s0)
        s1 = min(self.length, s1)
        if s1 - s0 <= SEGMENT_EPS:
            return None
        inner = self.vertices[(self.arc > s0) & (self.arc < s1)]
        pts = np.vstack([self.point_at(s0), inner, self.point_at(s1)])
        return Polyline(pts, dedupe=True)

    def transformed(self, rot: np.ndarray, shift) -> Polyline:
        return Polyline(self.vertices @ rot.T + np.asarray(shift, dtype=float))


@dataclass(frozen=True)
class OrientedBox:
    """Rectangle footprint centered at ``center`` with ``length`` along ``heading``."""

    center: np.ndarray
    heading: float
    length: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))
        if not (self.length > 0 and self.width > 0):
            raise ValueError("box dimensions must be positive")

    def corners(self) -> np.ndarray:
        hl, hw = 0.5 * self.length, 0.5 * self.width
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        return self.center + local @ rotation(self.heading).T

    def to_local(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return (pts - self.center) @ rotation(self.heading)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        loc = self.to_local(np.asarray(points, dtype=float).reshape(-1, 2))
        return (np.abs(loc[:, 0]) <= 0.5 * self.length + tol) & (
            np.abs(loc[:, 1]) <= 0.5 * self.width + tol
        )


def regularize_cov(cov) -> np.ndarray:
    """Validate a 2x2 covariance, adding ``COV_EPS * I`` when it is near singular."""
    c = np.asarray(cov, dtype=float)
    if c.shape != (2, 2) or not np.all(np.isfinite(c)):
        raise NotPositiveDefiniteError(f"covariance must be a finite 2x2 matrix, got {c!r}")
    if abs(c[0, 1] - c[1, 0]) > 1e-9 * max(1.0, np.abs(c).max()):
        raise NotPositiveDefiniteError("covariance is not symmetric")
    c = 0.5 * (c + c.T)
    lo = np.linalg.eigvalsh(c)[0]
    if lo < COV_EPS:
        c = c + COV_EPS * np.eye(2)
        lo += COV_EPS
    if lo <= 0:
        raise NotPositiveDefiniteError(f"covariance has non-positive eigenvalue {lo - COV_EPS:.3g}")
    return c


def precision(cov) -> np.ndarray:
    return np.linalg.inv(regularize_cov(cov))


def mahalanobis_distance(p, mean, cov) -> float:
    v = as_point(p) - as_point(mean)
    return math.sqrt(max(0.0, float(v @ precision(cov) @ v)))


def project_point(line: Polyline, p) -> tuple[np.ndarray, float]:
    """Closest point on ``line`` to ``p`` and its arc-length coordinate."""
    return line.project(as_point(p))


def mahalanobis_project(line: Polyline, mean, cov, exact: bool = False) -> np.ndarray:
    """Closest point on ``line`` to ``mean`` under the ``cov`` metric.

    The default returns the Euclidean projection, which is cheap and what the
    stitcher uses. ``exact=True`` minimizes the quadratic form per segment.
    """
    mean = as_point(mean)
    q = precision(cov)
    if not exact:
        return line.project(mean)[0]
    a = line.vertices[:-1]
    seg = line._seg
    rel = mean - a
    num = np.einsum("kj,ij,ki->k", seg, q, rel)
    den = np.einsum("kj,ij,ki->k", seg, q, seg)
    t = np.clip(num / den, 0.0, 1.0)
    foot = a + t[:, None] * seg
    diff = foot - mean
    d2 = np.einsum("kj,ij,ki->k", diff, q, diff)
    return foot[int(np.argmin(d2))]


def box_intersects_polyline(box: OrientedBox, line: Polyline) -> bool:
    """True iff some segment of ``line`` touches or lies inside ``box`` (closed rectangle)."""
    loc = box.to_local(line.vertices)
    hl, hw = 0.5 * box.length, 0.5 * box.width
    p0 = loc[:-1]
    d = loc[1:] - p0
    t0 = np.zeros(len(d))
    t1 = np.ones(len(d))
    ok = np.ones(len(d), dtype=bool)
    # Liang-Barsky clipping against the four slabs
    for axis, half in ((0, hl), (1, hw)):
        for sign in (-1.0, 1.0):
            p = sign * d[:, axis]
            q = half - sign * p0[:, axis]
            parallel = np.abs(p) < 1e-15
            ok &= ~(parallel & (q < 0))
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(parallel, 0.0, q / np.where(parallel, 1.0, p))
            entering = ~parallel & (p < 0)
            leaving = ~parallel & (p > 0)
            t0 = np.where(entering, np.maximum(t0, r), t0)
            t1 = np.where(leaving, np.minimum(t1, r), t1)
    return bool(np.any(ok & (t0 <= t1 + 1e-12)))


def resample(line: Polyline, step: float) -> Polyline:
    """Points at arc lengths ``0, step, 2*step, ...`` plus the terminal vertex."""
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(math.floor(line.length / step))
    arcs = step * np.arange(n + 1)
    arcs = arcs[arcs < line.length - SEGMENT_EPS]
    return Polyline(np.vstack([line.point_at(arcs), line.end]))


def heading_at(line: Polyline, arc: float) -> float:
    """Heading of the segment containing ``arc`` (out-of-range arcs clamp)."""
    return line.heading_at(float(np.clip(arc, 0.0, line.length)))


def signed_offset(line: Polyline, p) -> tuple[float, float]:
    """Signed lateral offset of ``p`` from ``line`` (left positive) and its projection arc."""
    closest, arc = line.project(p)
    t = line.tangent_at(arc)
    v = as_point(p) - closest
    side = t[0] * v[1] - t[1] * v[0]
    dist = float(np.hypot(*v))
    return (dist if side >= 0 else -dist), arc


def normal_at(line: Polyline, arc: float) -> np.ndarray:
    t = line.tangent_at(arc)
    return np.array([-t[1], t[0]])
