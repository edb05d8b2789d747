"""Planar geometry substrate: arc-length polyline paths, projection, curvature
estimation, and oriented-rectangle overlap tests.

All types are immutable after construction and all operations are pure, so
they are safe to share across parallel episode workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_MAX_SPACING = 5.0  # meters between consecutive path points

TWO_PI = 2.0 * math.pi


class DegenerateGeometryError(ValueError):
    """Input geometry is degenerate (duplicate points, zero-length segments)."""


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return (theta + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class Point2:
    """A point in the world frame, meters."""

    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def _as_xy(points) -> np.ndarray:
    """Coerce a sequence of Point2 or (x, y) pairs to an (N, 2) float array."""
    pts = list(points)
    if pts and isinstance(pts[0], Point2):
        arr = np.array([[p.x, p.y] for p in pts], dtype=float)
    else:
        arr = np.asarray(pts, dtype=float).reshape(-1, 2)
    return arr


def estimate_curvature(points) -> np.ndarray:
    """Signed per-point curvature from the circumscribed circle of each
    consecutive point triple.

    Positive curvature means a left (counterclockwise) turn. Endpoints copy
    their neighbor's value; collinear triples yield exactly 0.
    """
    xy = _as_xy(points)
    if len(xy) < 3:
        return np.zeros(len(xy), dtype=float)
    d = np.diff(xy, axis=0)
    seg_len = np.hypot(d[:, 0], d[:, 1])
    if np.any(seg_len == 0.0):
        raise DegenerateGeometryError("duplicate consecutive points")
    a, b, c = xy[:-2], xy[1:-1], xy[2:]
    ab, bc, ac = b - a, c - b, c - a
    cross = ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0]
    len_ab = seg_len[:-1]
    len_bc = seg_len[1:]
    len_ac = np.hypot(ac[:, 0], ac[:, 1])
    kappa = np.zeros(len(cross), dtype=float)
    ok = cross != 0.0
    kappa[ok] = 2.0 * cross[ok] / (len_ab[ok] * len_bc[ok] * len_ac[ok])
    out = np.empty(len(xy), dtype=float)
    out[1:-1] = kappa
    out[0] = kappa[0]
    out[-1] = kappa[-1]
    return out


@dataclass(eq=False)
class ReferencePath:
    """Arc-length parameterized polyline with per-point curvature.

    ``cum_s`` is the exact cumulative polyline length per point, strictly
    increasing and starting at 0.
    """

    points: np.ndarray  # (N, 2)
    cum_s: np.ndarray  # (N,)
    curvature: np.ndarray  # (N,)
    path_id: str = "path"

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float)
        self.cum_s = np.asarray(self.cum_s, dtype=float)
        self.curvature = np.asarray(self.curvature, dtype=float)
        if len(self.points) < 2:
            raise ValueError(f"path {self.path_id!r} needs >= 2 points")
        if not np.all(np.isfinite(self.points)):
            raise ValueError(f"path {self.path_id!r} has non-finite points")
        if np.any(np.diff(self.cum_s) <= 0.0) or self.cum_s[0] != 0.0:
            raise ValueError(f"path {self.path_id!r}: cum_s must start at 0 and strictly increase")
        if not np.all(np.isfinite(self.curvature)):
            raise ValueError(f"path {self.path_id!r} has non-finite curvature")

    @classmethod
    def from_points(cls, points, path_id: str = "path",
                    max_spacing: float = DEFAULT_MAX_SPACING) -> "ReferencePath":
        xy = _as_xy(points)
        if len(xy) < 2:
            raise ValueError(f"path {path_id!r} needs >= 2 points")
        d = np.diff(xy, axis=0)
        seg_len = np.hypot(d[:, 0], d[:, 1])
        if np.any(seg_len == 0.0):
            raise DegenerateGeometryError(f"path {path_id!r} has duplicate consecutive points")
        if np.any(seg_len > max_spacing):
            raise ValueError(
                f"path {path_id!r}: point spacing {seg_len.max():.3f} m exceeds "
                f"max spacing {max_spacing:.3f} m")
        cum_s = np.concatenate([[0.0], np.cumsum(seg_len)])
        kappa = estimate_curvature(xy) if len(xy) >= 3 else np.zeros(len(xy))
        return cls(points=xy, cum_s=cum_s, curvature=kappa, path_id=path_id)

    @property
    def total_length(self) -> float:
        return float(self.cum_s[-1])

    @property
    def end(self) -> Point2:
        return Point2(float(self.points[-1, 0]), float(self.points[-1, 1]))


class PathProjection(NamedTuple):
    s: float
    lateral_offset: float  # positive when the point lies left of the tangent
    foot: Point2


class PathPose(NamedTuple):
    pos: Point2
    heading: float
    curvature: float


def project_to_path(p, path: ReferencePath) -> PathProjection:
    """Closest-point projection of ``p`` onto the polyline.

    Returns the arc-length coordinate of the foot, the signed lateral offset
    (left of the tangent is positive), and the foot itself. Ties between
    segments are broken toward the smallest arc length.
    """
    q = p.as_array() if isinstance(p, Point2) else np.asarray(p, dtype=float)
    a = path.points[:-1]
    d = np.diff(path.points, axis=0)
    len2 = np.einsum("ij,ij->i", d, d)
    t = np.clip((np.einsum("j,ij->i", q, d) - np.einsum("ij,ij->i", a, d)) / len2, 0.0, 1.0)
    foot = a + t[:, None] * d
    diff = q - foot
    dist2 = np.einsum("ij,ij->i", diff, diff)
    i = int(np.argmin(dist2))  # first minimum -> smallest s on ties
    seg_len = math.sqrt(len2[i])
    s = float(path.cum_s[i] + t[i] * seg_len)
    fx, fy = foot[i]
    cross = d[i, 0] * (q[1] - fy) - d[i, 1] * (q[0] - fx)
    dist = math.sqrt(dist2[i])
    lateral = dist if cross >= 0.0 else -dist
    return PathProjection(s=s, lateral_offset=lateral, foot=Point2(float(fx), float(fy)))


def eval_path(path: ReferencePath, s: float) -> PathPose:
    """Pose of the path at arc length ``s``: linearly interpolated position,
    heading of the containing segment, and interpolated curvature.

    Raises ValueError when ``s`` is outside [0, total_length].
    """
    total = path.total_length
    if s < 0.0 or s > total:
        raise ValueError(f"s={s} outside path range [0, {total}]")
    i = int(np.searchsorted(path.cum_s, s, side="right")) - 1
    i = min(max(i, 0), len(path.points) - 2)
    seg = path.points[i + 1] - path.points[i]
    seg_len = path.cum_s[i + 1] - path.cum_s[i]
    frac = (s - path.cum_s[i]) / seg_len
    pos = path.points[i] + frac * seg
    heading = math.atan2(seg[1], seg[0])
    kappa = path.curvature[i] + frac * (path.curvature[i + 1] - path.curvature[i])
    return PathPose(pos=Point2(float(pos[0]), float(pos[1])), heading=heading, curvature=float(kappa))


@dataclass(eq=False)
class OrientedBox:
    """Rectangle with center, heading, and dimensions in meters."""

    center: Point2
    heading: float
    length: float
    width: float
    _corners: np.ndarray = field(default=None, repr=False, init=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.length <= 0.0 or self.width <= 0.0:
            raise ValueError("box dimensions must be positive")
        self.heading = wrap_angle(self.heading)

    @property
    def radius(self) -> float:
        """Circumscribed circle radius."""
        return 0.5 * math.hypot(self.length, self.width)

    def corners(self) -> np.ndarray:
        """The 4 corners, counterclockwise, as a (4, 2) array."""
        if self._corners is None:
            hl, hw = 0.5 * self.length, 0.5 * self.width
            c, s = math.cos(self.heading), math.sin(self.heading)
            local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
            rot = np.array([[c, -s], [s, c]])
            self._corners = local @ rot.T + self.center.as_array()
        return self._corners

    def inflated(self, margin: float) -> "OrientedBox":
        """A copy grown by ``margin`` on every side."""
        return OrientedBox(self.center, self.heading,
                           self.length + 2.0 * margin, self.width + 2.0 * margin)

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside or on the boundary."""
        d = np.atleast_2d(pts) - self.center.as_array()
        c, s = math.cos(self.heading), math.sin(self.heading)
        u = d[:, 0] * c + d[:, 1] * s
        v = -d[:, 0] * s + d[:, 1] * c
        return (np.abs(u) <= 0.5 * self.length) & (np.abs(v) <= 0.5 * self.width)


def corners_overlap(ca, cb) -> bool:
    """Separating-axis test on two 4-corner rectangles; touching counts as
    overlap. Accepts (4, 2) arrays or nested sequences; scalar math keeps the
    hot collision path fast."""
    a = ((float(ca[0][0]), float(ca[0][1])), (float(ca[1][0]), float(ca[1][1])),
         (float(ca[2][0]), float(ca[2][1])), (float(ca[3][0]), float(ca[3][1])))
    b = ((float(cb[0][0]), float(cb[0][1])), (float(cb[1][0]), float(cb[1][1])),
         (float(cb[2][0]), float(cb[2][1])), (float(cb[3][0]), float(cb[3][1])))
    for corners in (a, b):
        for i in range(2):  # rectangles: two unique edge normals each
            nx = corners[i][1] - corners[i + 1][1]
            ny = corners[i + 1][0] - corners[i][0]
            amin = amax = a[0][0] * nx + a[0][1] * ny
            for j in range(1, 4):
                d = a[j][0] * nx + a[j][1] * ny
                if d < amin:
                    amin = d
                elif d > amax:
                    amax = d
            bmin = bmax = b[0][0] * nx + b[0][1] * ny
            for j in range(1, 4):
                d = b[j][0] * nx + b[j][1] * ny
                if d < bmin:
                    bmin = d
                elif d > bmax:
                    bmax = d
            if amax < bmin or bmax < amin:
                return False
    return True


def boxes_overlap(a: OrientedBox, b: OrientedBox) -> bool:
    """True iff the two rectangles intersect (touching edges count)."""
    dx = b.center.x - a.center.x
    dy = b.center.y - a.center.y
    if dx * dx + dy * dy > (a.radius + b.radius) ** 2:
        return False
    return corners_overlap(a.corners(), b.corners())


def box_hits_segments(box: OrientedBox, segs: np.ndarray) -> np.ndarray:
    """Which segments intersect the box. ``segs`` is (M, 4) rows (x0, y0, x1, y1).

    Segments are clipped against the box in its local frame (slab test);
    touching counts as a hit. Returns a boolean mask of length M.
    """
    segs = np.asarray(segs, dtype=float)
    if len(segs) == 0:
        return np.zeros(0, dtype=bool)
    c, s = math.cos(box.heading), math.sin(box.heading)
    cx, cy = box.center.x, box.center.y
    x0 = (segs[:, 0] - cx) * c + (segs[:, 1] - cy) * s
    y0 = -(segs[:, 0] - cx) * s + (segs[:, 1] - cy) * c
    x1 = (segs[:, 2] - cx) * c + (segs[:, 3] - cy) * s
    y1 = -(segs[:, 2] - cx) * s + (segs[:, 3] - cy) * c
    hl, hw = 0.5 * box.length, 0.5 * box.width
    t_lo = np.zeros(len(segs))
    t_hi = np.ones(len(segs))
    for p0, p1, half in ((x0, x1, hl), (y0, y1, hw)):
        d = p1 - p0
        with np.errstate(divide="ignore", invalid="ignore"):
            t_a = (-half - p0) / d
            t_b = (half - p0) / d
        lo = np.minimum(t_a, t_b)
        hi = np.maximum(t_a, t_b)
        parallel = d == 0.0
        inside = np.abs(p0) <= half
        lo = np.where(parallel, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(parallel, np.where(inside, np.inf, -np.inf), hi)
        t_lo = np.maximum(t_lo, lo)
        t_hi = np.minimum(t_hi, hi)
    return t_lo <= t_hi
