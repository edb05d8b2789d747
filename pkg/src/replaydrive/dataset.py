"""Traffic-log ingestion and replay queries, episode enumeration, and
synthetic scenario generation.

A log is the "weak simulator" substrate: every recorded vehicle replays its
own trajectory, so its future motion is known exactly at any query time.

External formats:
  * tracks CSV, header ``track_id,frame_id,timestamp_ms,x,y,vx,vy,psi_rad,length,width``,
    one row per vehicle per frame, timestamps in integer milliseconds.
  * map JSON, ``{"curbs": [[[x, y], ...], ...], "reference_paths":
    [{"id": ..., "points": [[x, y], ...]}, ...]}``.
Unknown columns/keys are warned about and ignored, never fatal.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .geometry import (OrientedBox, Point2, ReferencePath, corners_overlap,
                       eval_path, project_to_path, wrap_angle)

logger = logging.getLogger(__name__)

TRACK_COLUMNS = ["track_id", "frame_id", "timestamp_ms", "x", "y", "vx", "vy",
                 "psi_rad", "length", "width"]
MAP_KEYS = {"curbs", "reference_paths"}
PATH_MAX_SPACING = 5.0


class ParseError(ValueError):
    """A file row/field could not be parsed."""


class ValidationError(ValueError):
    """Parsed data violates a log invariant."""


class VehicleState(NamedTuple):
    pos: Point2
    speed: float
    heading: float


@dataclass(eq=False)
class VehicleTrack:
    """Time-ordered recorded states of one vehicle at a fixed frame period."""

    track_id: int
    times: np.ndarray  # (F,) seconds
    xy: np.ndarray  # (F, 2)
    vel: np.ndarray  # (F, 2) world-frame velocity components
    heading: np.ndarray  # (F,)
    length: float
    width: float
    _unwrapped: np.ndarray = field(default=None, repr=False, init=False)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        self.vel = np.asarray(self.vel, dtype=float).reshape(-1, 2)
        self.heading = np.asarray(self.heading, dtype=float)
        if len(self.times) < 2:
            raise ValidationError(f"track {self.track_id}: needs >= 2 states")
        diffs = np.diff(self.times)
        if np.any(diffs <= 0.0):
            raise ValidationError(f"track {self.track_id}: timestamps not strictly increasing")
        if not np.allclose(diffs, diffs[0], rtol=0.0, atol=1e-9):
            raise ValidationError(f"track {self.track_id}: frame period not constant")
        if self.length <= 0.0 or self.width <= 0.0:
            raise ValidationError(f"track {self.track_id}: non-positive footprint dims")
        self._unwrapped = np.unwrap(self.heading)

    @property
    def frame_count(self) -> int:
        return len(self.times)

    @property
    def frame_period(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def speed(self) -> np.ndarray:
        return np.hypot(self.vel[:, 0], self.vel[:, 1])

    @property
    def mean_speed(self) -> float:
        return float(np.mean(self.speed))

    def state_at_frame(self, frame: int) -> VehicleState:
        return VehicleState(pos=Point2(float(self.xy[frame, 0]), float(self.xy[frame, 1])),
                            speed=float(math.hypot(self.vel[frame, 0], self.vel[frame, 1])),
                            heading=float(self.heading[frame]))

    def state_at(self, t: float) -> Optional[VehicleState]:
        """Linearly interpolated state, or None outside the recorded interval."""
        times = self.times
        if t < times[0] or t > times[-1]:
            return None
        idx = int(np.searchsorted(times, t))
        if idx < len(times) and times[idx] == t:
            return self.state_at_frame(idx)
        lo = idx - 1
        frac = (t - times[lo]) / (times[lo + 1] - times[lo])
        x = self.xy[lo, 0] + frac * (self.xy[lo + 1, 0] - self.xy[lo, 0])
        y = self.xy[lo, 1] + frac * (self.xy[lo + 1, 1] - self.xy[lo, 1])
        sp = self.speed
        speed = sp[lo] + frac * (sp[lo + 1] - sp[lo])
        heading = wrap_angle(self._unwrapped[lo] + frac * (self._unwrapped[lo + 1] - self._unwrapped[lo]))
        return VehicleState(pos=Point2(float(x), float(y)), speed=float(speed), heading=float(heading))

    def velocity_at(self, t: float) -> Optional[np.ndarray]:
        """Interpolated world-frame velocity vector, or None when absent."""
        if t < self.times[0] or t > self.times[-1]:
            return None
        vx = np.interp(t, self.times, self.vel[:, 0])
        vy = np.interp(t, self.times, self.vel[:, 1])
        return np.array([vx, vy])

    def box_at(self, t: float) -> Optional[OrientedBox]:
        st = self.state_at(t)
        if st is None:
            return None
        return OrientedBox(st.pos, st.heading, self.length, self.width)


def state_at(track: VehicleTrack, t: float) -> Optional[VehicleState]:
    """Module-level alias for :meth:`VehicleTrack.state_at`."""
    return track.state_at(t)


@dataclass(eq=False)
class TrafficLog:
    """A recorded scenario: replayable tracks plus map polylines and routes."""

    tracks: dict[int, VehicleTrack]
    frame_period: float
    curbs: list[np.ndarray]
    reference_paths: list[ReferencePath]
    _curb_segments: np.ndarray = field(default=None, repr=False, init=False)  # type: ignore[assignment]
    _best_path_cache: dict = field(default_factory=dict, repr=False, init=False)

    def __post_init__(self) -> None:
        if not self.tracks:
            raise ValidationError("no tracks")
        for tid, track in self.tracks.items():
            if abs(track.frame_period - self.frame_period) > 1e-9:
                raise ValidationError(f"track {tid}: frame period differs from log")
        if not self.reference_paths:
            raise ValidationError("log needs at least one reference path")
        for i, curb in enumerate(self.curbs):
            if len(curb) < 2:
                raise ValidationError(f"curb {i}: needs >= 2 points")

    @property
    def track_ids(self) -> list[int]:
        return sorted(self.tracks)

    def curb_segments(self) -> np.ndarray:
        """All curb segments as an (M, 4) array of (x0, y0, x1, y1) rows."""
        if self._curb_segments is None:
            rows = []
            for curb in self.curbs:
                arr = np.asarray(curb, dtype=float)
                rows.append(np.hstack([arr[:-1], arr[1:]]))
            self._curb_segments = np.vstack(rows) if rows else np.zeros((0, 4))
        return self._curb_segments

    def curb_index_of_segment(self, seg_index: int) -> int:
        """Which curb polyline a row of :meth:`curb_segments` belongs to."""
        offset = 0
        for i, curb in enumerate(self.curbs):
            n = len(curb) - 1
            if seg_index < offset + n:
                return i
            offset += n
        raise IndexError(seg_index)

    def path_by_id(self, path_id: str) -> ReferencePath:
        for p in self.reference_paths:
            if p.path_id == path_id:
                return p
        raise KeyError(path_id)

    def best_path_for_track(self, track_id: int, sample_stride: int = 5) -> ReferencePath:
        """The reference path the track follows: minimum mean squared
        projection distance over its logged positions, ties by list order."""
        if track_id in self._best_path_cache:
            return self._best_path_cache[track_id]
        track = self.tracks[track_id]
        pts = track.xy[::sample_stride]
        best, best_cost = None, math.inf
        for path in self.reference_paths:
            cost = 0.0
            for p in pts:
                proj = project_to_path(p, path)
                cost += proj.lateral_offset ** 2
            cost /= len(pts)
            if cost < best_cost:
                best, best_cost = path, cost
        self._best_path_cache[track_id] = best
        return best


@dataclass(frozen=True)
class EpisodeSpec:
    """One simulation case: an ego vehicle, a start frame, and a horizon."""

    log: TrafficLog
    ego_track_id: int
    start_frame: int
    horizon_frames: int
    path_id: str

    def __post_init__(self) -> None:
        if self.ego_track_id not in self.log.tracks:
            raise ValidationError(f"ego track {self.ego_track_id} not in log")
        track = self.log.tracks[self.ego_track_id]
        if not 0 <= self.start_frame < track.frame_count:
            raise ValidationError(f"start frame {self.start_frame} outside ego track")
        if self.horizon_frames < 1:
            raise ValidationError("horizon must be >= 1 frame")

    @property
    def key(self) -> tuple:
        return (self.ego_track_id, self.start_frame)


def load_log(tracks_file, map_file) -> TrafficLog:
    """Read and fully validate a tracks CSV plus a map JSON."""
    tracks_file, map_file = Path(tracks_file), Path(map_file)
    rows_by_track: dict[int, list] = {}
    with open(tracks_file, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError("no tracks")
        unknown = [c for c in reader.fieldnames if c not in TRACK_COLUMNS]
        missing = [c for c in TRACK_COLUMNS if c not in reader.fieldnames]
        if unknown:
            logger.warning("%s: ignoring unknown columns %s", tracks_file.name, unknown)
        if missing:
            raise ValidationError(f"{tracks_file.name}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                parsed = (int(row["track_id"]), int(row["frame_id"]), int(row["timestamp_ms"]),
                          float(row["x"]), float(row["y"]), float(row["vx"]), float(row["vy"]),
                          float(row["psi_rad"]), float(row["length"]), float(row["width"]))
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{tracks_file.name}:{lineno}: malformed row ({exc})") from exc
            rows_by_track.setdefault(parsed[0], []).append(parsed)
    if not rows_by_track:
        raise ValidationError("no tracks")

    tracks: dict[int, VehicleTrack] = {}
    period_ms = None
    for tid in sorted(rows_by_track):
        rows = sorted(rows_by_track[tid], key=lambda r: r[1])
        frame_ids = [r[1] for r in rows]
        ts_ms = [r[2] for r in rows]
        if any(b - a != 1 for a, b in zip(frame_ids, frame_ids[1:])):
            raise ValidationError(f"track {tid}: frame_id not consecutive")
        if any(b <= a for a, b in zip(ts_ms, ts_ms[1:])):
            raise ValidationError(f"track {tid}: timestamps not increasing")
        steps = {b - a for a, b in zip(ts_ms, ts_ms[1:])}
        if len(steps) > 1:
            raise ValidationError(f"track {tid}: frame period not constant")
        step = steps.pop()
        if period_ms is None:
            period_ms = step
        elif step != period_ms:
            raise ValidationError(f"track {tid}: frame period {step} ms differs from {period_ms} ms")
        lengths = {r[8] for r in rows}
        widths = {r[9] for r in rows}
        if len(lengths) > 1 or len(widths) > 1:
            logger.warning("track %d: footprint dims vary; using first row", tid)
        tracks[tid] = VehicleTrack(
            track_id=tid,
            times=np.array(ts_ms, dtype=float) / 1000.0,
            xy=np.array([[r[3], r[4]] for r in rows]),
            vel=np.array([[r[5], r[6]] for r in rows]),
            heading=np.array([r[7] for r in rows]),
            length=rows[0][8],
            width=rows[0][9],
        )

    with open(map_file) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{map_file.name}: invalid JSON ({exc})") from exc
    unknown_keys = set(raw) - MAP_KEYS
    if unknown_keys:
        logger.warning("%s: ignoring unknown keys %s", map_file.name, sorted(unknown_keys))
    curbs = [np.asarray(c, dtype=float).reshape(-1, 2) for c in raw.get("curbs", [])]
    paths = []
    for entry in raw.get("reference_paths", []):
        paths.append(ReferencePath.from_points(entry["points"], path_id=str(entry["id"]),
                                               max_spacing=PATH_MAX_SPACING))
    return TrafficLog(tracks=tracks, frame_period=period_ms / 1000.0, curbs=curbs,
                      reference_paths=paths)


def write_log(log: TrafficLog, tracks_file, map_file) -> None:
    """Write a log in the exact format :func:`load_log` reads (exact round trip)."""
    tracks_file, map_file = Path(tracks_file), Path(map_file)
    with open(tracks_file, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_COLUMNS)
        for tid in sorted(log.tracks):
            track = log.tracks[tid]
            for k in range(track.frame_count):
                writer.writerow([tid, k, int(round(track.times[k] * 1000.0)),
                                 repr(float(track.xy[k, 0])), repr(float(track.xy[k, 1])),
                                 repr(float(track.vel[k, 0])), repr(float(track.vel[k, 1])),
                                 repr(float(track.heading[k])),
                                 repr(float(track.length)), repr(float(track.width))])
    payload = {
        "curbs": [[[float(x), float(y)] for x, y in curb] for curb in log.curbs],
        "reference_paths": [
            {"id": p.path_id, "points": [[float(x), float(y)] for x, y in p.points]}
            for p in log.reference_paths
        ],
    }
    with open(map_file, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def enumerate_episodes(log: TrafficLog, stride_frames: int, min_remaining: int,
                       horizon_slack_frames: int = 0) -> list[EpisodeSpec]:
    """All (vehicle, start frame) cases with enough logged future.

    One spec per track and per start frame at multiples of ``stride_frames``
    with at least ``min_remaining`` logged frames after the start. Order is
    deterministic: track id, then frame. ``horizon_slack_frames`` extends the
    simulation horizon beyond the ego's logged future to leave room for
    slower-than-logged driving.
    """
    if stride_frames < 1:
        raise ValueError("stride must be >= 1")
    specs = []
    for tid in sorted(log.tracks):
        track = log.tracks[tid]
        path = log.best_path_for_track(tid)
        for f in range(0, track.frame_count, stride_frames):
            remaining = track.frame_count - 1 - f
            if remaining >= min_remaining:
                specs.append(EpisodeSpec(log=log, ego_track_id=tid, start_frame=f,
                                         horizon_frames=remaining + horizon_slack_frames,
                                         path_id=path.path_id))
    return specs


# ---------------------------------------------------------------------------
# Synthetic scenarios
# ---------------------------------------------------------------------------

SCENARIO_KINDS = ("roundabout", "intersection", "merging")


@dataclass(frozen=True)
class ScenarioParams:
    """Tunables for the synthetic scenario generator."""

    frame_period: float = 0.1
    road_half_width: float = 4.0
    sample_step: float = 1.0  # path densification, meters
    cruise_speed_range: tuple = (6.0, 9.5)
    lateral_accel_max: float = 2.0
    accel_max: float = 1.5
    decel_max: float = 2.5
    entry_span_per_vehicle: float = 2.2  # seconds of entry-time spread per vehicle
    vehicle_length_range: tuple = (4.2, 4.9)
    vehicle_width_range: tuple = (1.7, 1.9)
    schedule_margin: float = 0.6  # inflation (m) when de-conflicting entries
    delay_step_frames: int = 8


def _line_points(p0: np.ndarray, p1: np.ndarray, step: float) -> np.ndarray:
    n = max(2, int(math.ceil(np.linalg.norm(p1 - p0) / step)) + 1)
    t = np.linspace(0.0, 1.0, n)
    return p0 + t[:, None] * (p1 - p0)


def _arc_points(center: np.ndarray, radius: float, a0: float, a1: float, step: float) -> np.ndarray:
    # Sweeps from a0 to a1 (radians); sign of (a1 - a0) sets the direction.
    sweep = a1 - a0
    n = max(2, int(math.ceil(abs(sweep) * radius / step)) + 1)
    ang = a0 + np.linspace(0.0, 1.0, n) * sweep
    return center + radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _join(*pieces: np.ndarray) -> np.ndarray:
    out = [pieces[0]]
    for piece in pieces[1:]:
        if np.allclose(out[-1][-1], piece[0]):
            piece = piece[1:]
        out.append(piece)
    pts = np.vstack(out)
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.hypot(*(np.diff(pts, axis=0).T)) > 1e-9
    return pts[keep]


def _roundabout_paths(params: ScenarioParams) -> list[tuple[str, np.ndarray]]:
    ring_r = 22.0
    approach = 45.0
    spokes = [0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi]
    paths = []
    for i, phi in enumerate(spokes):
        t_in = ring_r * np.array([math.cos(phi), math.sin(phi)])
        dir_in = np.array([-math.sin(phi), math.cos(phi)])  # CCW tangent
        for dq in (1, 2, 3):
            j = (i + dq) % len(spokes)
            psi = phi + dq * 0.5 * math.pi
            t_out = ring_r * np.array([math.cos(psi), math.sin(psi)])
            dir_out = np.array([-math.sin(psi), math.cos(psi)])
            pts = _join(
                _line_points(t_in - approach * dir_in, t_in, params.sample_step),
                _arc_points(np.zeros(2), ring_r, phi, psi, params.sample_step),
                _line_points(t_out, t_out + approach * dir_out, params.sample_step),
            )
            paths.append((f"rb_{i}{j}", pts))
    return paths


def _intersection_paths(params: ScenarioParams) -> list[tuple[str, np.ndarray]]:
    half = 70.0
    off = 2.0  # right-hand lane offset
    step = params.sample_step
    return [
        ("we", _line_points(np.array([-half, -off]), np.array([half, -off]), step)),
        ("ew", _line_points(np.array([half, off]), np.array([-half, off]), step)),
        ("sn", _line_points(np.array([off, -half]), np.array([off, half]), step)),
        ("ns", _line_points(np.array([-off, half]), np.array([-off, -half]), step)),
    ]


def _merging_paths(params: ScenarioParams) -> list[tuple[str, np.ndarray]]:
    step = params.sample_step
    main = _line_points(np.array([-80.0, 0.0]), np.array([140.0, 0.0]), step)
    alpha = math.radians(20.0)
    fillet_r = 60.0
    merge_end = np.array([0.0, 0.0])
    center = merge_end + np.array([0.0, -fillet_r])
    arc_start_angle = 0.5 * math.pi + alpha  # angle of ramp start on the fillet circle
    arc = _arc_points(center, fillet_r, arc_start_angle, 0.5 * math.pi, step)
    ramp_head = arc[0]
    ramp_tail = ramp_head - 55.0 * np.array([math.cos(alpha), math.sin(alpha)])
    ramp = _join(_line_points(ramp_tail, ramp_head, step), arc,
                 _line_points(merge_end, np.array([140.0, 0.0]), step))
    return [("main", main), ("ramp", ramp)]


def _curbs_from_paths(path_xys: list[np.ndarray], half_width: float) -> list[np.ndarray]:
    from shapely.geometry import LineString, Polygon
    from shapely.ops import unary_union

    area = unary_union([LineString(xy).buffer(half_width, quad_segs=8) for xy in path_xys])
    area = area.simplify(0.1)
    polys = [area] if isinstance(area, Polygon) else list(area.geoms)
    curbs = []
    for poly in polys:
        for ring in [poly.exterior, *poly.interiors]:
            pts = np.asarray(ring.coords, dtype=float)
            keep = np.ones(len(pts), dtype=bool)
            keep[1:] = np.hypot(*(np.diff(pts, axis=0).T)) > 1e-9
            pts = pts[keep]
            if len(pts) >= 2:
                curbs.append(pts)
    return curbs


def _speed_profile(path: ReferencePath, cruise: float, params: ScenarioParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-point speed limit profile along the path (curvature-capped, with
    forward/backward acceleration smoothing)."""
    s = path.cum_s
    kappa = np.abs(path.curvature)
    v = np.minimum(cruise, np.sqrt(params.lateral_accel_max / np.maximum(kappa, 1e-6)))
    for i in range(len(v) - 2, -1, -1):  # backward: respect decel limit
        ds = s[i + 1] - s[i]
        v[i] = min(v[i], math.sqrt(v[i + 1] ** 2 + 2.0 * params.decel_max * ds))
    for i in range(1, len(v)):  # forward: respect accel limit
        ds = s[i] - s[i - 1]
        v[i] = min(v[i], math.sqrt(v[i - 1] ** 2 + 2.0 * params.accel_max * ds))
    return s, v


def _track_from_path(track_id: int, path: ReferencePath, entry_frame: int, cruise: float,
                     dims: tuple[float, float], params: ScenarioParams) -> VehicleTrack:
    s_grid, v_grid = _speed_profile(path, cruise, params)
    dt = params.frame_period
    period_ms = int(round(dt * 1000.0))
    s_list = [0.0]
    while s_list[-1] < path.total_length:
        v = float(np.interp(s_list[-1], s_grid, v_grid))
        s_list.append(s_list[-1] + max(v, 0.5) * dt)
    s_vals = np.array(s_list)
    s_vals[-1] = path.total_length
    times_ms = (entry_frame * period_ms) + period_ms * np.arange(len(s_vals))
    xy = np.empty((len(s_vals), 2))
    heading = np.empty(len(s_vals))
    speeds = np.interp(s_vals, s_grid, v_grid)
    for k, sv in enumerate(s_vals):
        pose = eval_path(path, float(sv))
        xy[k] = (pose.pos.x, pose.pos.y)
        heading[k] = pose.heading
    vel = speeds[:, None] * np.stack([np.cos(heading), np.sin(heading)], axis=1)
    return VehicleTrack(track_id=track_id, times=times_ms / 1000.0, xy=xy, vel=vel,
                        heading=heading, length=dims[0], width=dims[1])


def _tracks_conflict(a: VehicleTrack, b: VehicleTrack, margin: float) -> bool:
    period = a.frame_period
    t0 = max(a.times[0], b.times[0])
    t1 = min(a.times[-1], b.times[-1])
    if t0 > t1:
        return False
    ia = int(round((t0 - a.times[0]) / period))
    ib = int(round((t0 - b.times[0]) / period))
    n = int(round((t1 - t0) / period)) + 1
    pa = a.xy[ia:ia + n]
    pb = b.xy[ib:ib + n]
    reach = 0.5 * math.hypot(a.length, a.width) + 0.5 * math.hypot(b.length, b.width) + 2 * margin
    d2 = np.sum((pa - pb) ** 2, axis=1)
    close = np.flatnonzero(d2 <= reach * reach)
    for k in close:
        box_a = OrientedBox(Point2(*pa[k]), float(a.heading[ia + k]),
                            a.length + 2 * margin, a.width + 2 * margin)
        box_b = OrientedBox(Point2(*pb[k]), float(b.heading[ib + k]), b.length, b.width)
        if corners_overlap(box_a.corners(), box_b.corners()):
            return True
    return False


def make_synthetic_scenario(kind: str, n_vehicles: int, seed: int,
                            params: ScenarioParams = ScenarioParams()) -> TrafficLog:
    """Deterministic synthetic traffic log on a geometric road template.

    Vehicles follow template reference paths with randomized entry times and
    cruise speeds; entries are deconflicted by time-gap scheduling so the
    generated traffic is mutually non-colliding at every frame.
    """
    if kind not in SCENARIO_KINDS:
        raise ValueError(f"unknown scenario kind {kind!r}; expected one of {SCENARIO_KINDS}")
    if n_vehicles < 1:
        raise ValueError("n_vehicles must be >= 1")
    rng = np.random.default_rng(seed)
    builders = {"roundabout": _roundabout_paths, "intersection": _intersection_paths,
                "merging": _merging_paths}
    raw_paths = builders[kind](params)
    paths = [ReferencePath.from_points(xy, path_id=pid, max_spacing=PATH_MAX_SPACING)
             for pid, xy in raw_paths]
    curbs = _curbs_from_paths([xy for _, xy in raw_paths], params.road_half_width)

    span_frames = max(1, int(round(n_vehicles * params.entry_span_per_vehicle / params.frame_period)))
    tracks: dict[int, VehicleTrack] = {}
    meta = []
    for tid in range(n_vehicles):
        path = paths[int(rng.integers(len(paths)))]
        cruise = float(rng.uniform(*params.cruise_speed_range))
        entry = int(rng.integers(0, span_frames))
        dims = (float(rng.uniform(*params.vehicle_length_range)),
                float(rng.uniform(*params.vehicle_width_range)))
        meta.append((path, cruise, entry, dims))
        tracks[tid] = _track_from_path(tid, path, entry, cruise, dims, params)

    # Time-gap scheduling: delay the later-entering vehicle of any
    # conflicting pair until the whole log is overlap-free.
    for _ in range(5000):
        conflict = None
        ids = sorted(tracks)
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                if _tracks_conflict(tracks[ids[i]], tracks[ids[j]], params.schedule_margin):
                    conflict = (ids[i], ids[j])
                    break
            if conflict:
                break
        if conflict is None:
            break
        a, b = conflict
        victim = b if meta[b][2] >= meta[a][2] else a
        path, cruise, entry, dims = meta[victim]
        entry += params.delay_step_frames
        meta[victim] = (path, cruise, entry, dims)
        tracks[victim] = _track_from_path(victim, path, entry, cruise, dims, params)
    else:
        raise RuntimeError("could not deconflict synthetic traffic")

    return TrafficLog(tracks=tracks, frame_period=params.frame_period, curbs=curbs,
                      reference_paths=paths)
