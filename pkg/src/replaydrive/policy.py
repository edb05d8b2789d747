"""Observation construction, waypoint-prediction policies, and loss evaluators.

Observations are ego-centric: the ego sits at the center cell and its heading
points image-up. Waypoint offsets and all ego-frame quantities use x to the
right, y forward. The grid channels are {road mask, vehicle mask, velocity
field x, velocity field y, reference-path mask}; the grid is built lazily so
the feature-only fast path never rasterizes.
"""
from __future__ import annotations

import json
import logging
import math
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from .dataset import TrafficLog
from .geometry import OrientedBox, ReferencePath, eval_path, project_to_path, wrap_angle
from .motion import EgoState, to_ego_frame, to_world_frame

logger = logging.getLogger(__name__)

CH_ROAD, CH_VEHICLE, CH_VEL_X, CH_VEL_Y, CH_PATH = range(5)
N_CHANNELS = 5

ABSENT_DISTANCE = 60.0  # sentinel forward distance for empty vehicle slots
CURB_RAY_MAX = 60.0
K_NEAREST = 4
FEATURE_DIM = 4 + 5 * K_NEAREST + 1


class UntrainedPolicyError(RuntimeError):
    """The policy has not been fitted / cannot act."""


@dataclass(frozen=True)
class GridConfig:
    resolution: float = 0.5  # meters per cell
    h: int = 128
    w: int = 128

    def __post_init__(self) -> None:
        if self.resolution <= 0.0 or self.h < 2 or self.w < 2:
            raise ValueError("invalid grid config")


@dataclass(frozen=True)
class ObsMeta:
    """Grid geometry plus the ego pose the frame was built around."""

    resolution: float
    h: int
    w: int
    ego_x: float
    ego_y: float
    ego_heading: float
    t: float

    @property
    def center_row(self) -> int:
        return self.h // 2

    @property
    def center_col(self) -> int:
        return self.w // 2

    def world_to_rc(self, pts: np.ndarray) -> np.ndarray:
        """World points -> continuous (row, col); cell (i, j) is centered at (i, j)."""
        fl = to_ego_frame(pts, np.array([self.ego_x, self.ego_y]), self.ego_heading)
        rows = self.center_row - fl[:, 0] / self.resolution
        cols = self.center_col - fl[:, 1] / self.resolution
        return np.stack([rows, cols], axis=1)

    def offsets_to_rc(self, offsets: np.ndarray) -> np.ndarray:
        """Ego-frame (x right, y forward) offsets -> continuous (row, col)."""
        offsets = np.atleast_2d(offsets)
        rows = self.center_row - offsets[:, 1] / self.resolution
        cols = self.center_col + offsets[:, 0] / self.resolution
        return np.stack([rows, cols], axis=1)


@dataclass(frozen=True)
class SceneView:
    """References needed to (re)build an observation's content."""

    log: TrafficLog
    path: ReferencePath
    exclude_track_id: Optional[int] = None


@dataclass(eq=False)
class Observation:
    ego_speed: float
    meta: ObsMeta
    scene: SceneView
    _grid: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def grid(self) -> np.ndarray:
        if self._grid is None:
            self._grid = _build_grid(self.meta, self.scene)
        return self._grid


def ego_frame_xy(points_world: np.ndarray, pose_xy: np.ndarray, heading: float) -> np.ndarray:
    """World points -> ego (x right, y forward)."""
    fl = to_ego_frame(points_world, pose_xy, heading)
    return np.stack([-fl[:, 1], fl[:, 0]], axis=1)


def offsets_to_world(offsets: np.ndarray, pose_xy: np.ndarray, heading: float) -> np.ndarray:
    """Ego (x right, y forward) offsets -> world points."""
    offsets = np.atleast_2d(offsets)
    fl = np.stack([offsets[:, 1], -offsets[:, 0]], axis=1)
    return to_world_frame(fl, pose_xy, heading)


def make_observation(log: TrafficLog, ego: EgoState, path: ReferencePath,
                     grid: GridConfig = GridConfig(),
                     exclude_track_id: Optional[int] = None) -> Observation:
    """Observation with a lazily materialized grid."""
    meta = ObsMeta(resolution=grid.resolution, h=grid.h, w=grid.w,
                   ego_x=ego.pos.x, ego_y=ego.pos.y, ego_heading=ego.heading, t=ego.t)
    return Observation(ego_speed=ego.speed, meta=meta,
                       scene=SceneView(log=log, path=path, exclude_track_id=exclude_track_id))


def rasterize(log: TrafficLog, ego: EgoState, path: ReferencePath,
              resolution: float = 0.5, h: int = 128, w: int = 128,
              exclude_track_id: Optional[int] = None) -> Observation:
    """Observation with the multi-channel grid materialized eagerly."""
    obs = make_observation(log, ego, path, GridConfig(resolution, h, w), exclude_track_id)
    obs.grid  # build now
    return obs


def _paint_polyline(mask: np.ndarray, pts_rc: np.ndarray, radius_cells: float = 1.0) -> None:
    """Set cells whose center lies within ``radius_cells`` of the polyline."""
    h, w = mask.shape
    for i in range(len(pts_rc) - 1):
        r0, c0 = pts_rc[i]
        r1, c1 = pts_rc[i + 1]
        rmin = max(int(math.floor(min(r0, r1) - radius_cells)), 0)
        rmax = min(int(math.ceil(max(r0, r1) + radius_cells)), h - 1)
        cmin = max(int(math.floor(min(c0, c1) - radius_cells)), 0)
        cmax = min(int(math.ceil(max(c0, c1) + radius_cells)), w - 1)
        if rmin > rmax or cmin > cmax:
            continue
        rr, cc = np.meshgrid(np.arange(rmin, rmax + 1), np.arange(cmin, cmax + 1), indexing="ij")
        dr, dc = r1 - r0, c1 - c0
        len2 = dr * dr + dc * dc
        if len2 == 0.0:
            d2 = (rr - r0) ** 2 + (cc - c0) ** 2
        else:
            t = np.clip(((rr - r0) * dr + (cc - c0) * dc) / len2, 0.0, 1.0)
            d2 = (rr - (r0 + t * dr)) ** 2 + (cc - (c0 + t * dc)) ** 2
        mask[rr, cc] = np.where(d2 <= radius_cells * radius_cells, 1.0, mask[rr, cc])


def _paint_box(grid_ch: np.ndarray, corners_rc: np.ndarray, value: float = 1.0,
               extra: Optional[list] = None) -> None:
    """Set cells whose center is covered by the (convex, CCW) box."""
    h, w = grid_ch.shape
    rmin = max(int(math.floor(corners_rc[:, 0].min())), 0)
    rmax = min(int(math.ceil(corners_rc[:, 0].max())), h - 1)
    cmin = max(int(math.floor(corners_rc[:, 1].min())), 0)
    cmax = min(int(math.ceil(corners_rc[:, 1].max())), w - 1)
    if rmin > rmax or cmin > cmax:
        return
    rr, cc = np.meshgrid(np.arange(rmin, rmax + 1), np.arange(cmin, cmax + 1), indexing="ij")
    inside = np.ones(rr.shape, dtype=bool)
    for i in range(4):
        a = corners_rc[i]
        b = corners_rc[(i + 1) % 4]
        cross = (b[0] - a[0]) * (cc - a[1]) - (b[1] - a[1]) * (rr - a[0])
        inside &= cross >= 0.0
    grid_ch[rr, cc] = np.where(inside, value, grid_ch[rr, cc])
    if extra is not None:
        for ch, val in extra:
            ch[rr, cc] = np.where(inside, val, ch[rr, cc])


def _flood_fill_road(barrier: np.ndarray, start_rc: tuple) -> np.ndarray:
    h, w = barrier.shape
    road = np.zeros((h, w))
    r0, c0 = start_rc
    if not (0 <= r0 < h and 0 <= c0 < w) or barrier[r0, c0]:
        return road
    seen = np.zeros((h, w), dtype=bool)
    queue = deque([(r0, c0)])
    seen[r0, c0] = True
    while queue:
        r, c = queue.popleft()
        road[r, c] = 1.0
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and not seen[nr, nc] and not barrier[nr, nc]:
                seen[nr, nc] = True
                queue.append((nr, nc))
    return road


def _corners_rc(meta: ObsMeta, box: OrientedBox) -> np.ndarray:
    rc = meta.world_to_rc(box.corners())
    # world_to_rc negates both axes, which preserves orientation; ensure CCW
    # in (row, col) space for the half-plane test.
    area = 0.0
    for i in range(4):
        a, b = rc[i], rc[(i + 1) % 4]
        area += a[0] * b[1] - b[0] * a[1]
    return rc if area > 0 else rc[::-1]


def vehicle_mask_at(meta: ObsMeta, scene: SceneView, t: float,
                    velocity_channels: bool = False):
    """Vehicle footprint mask (and optionally velocity channels) at time t."""
    veh = np.zeros((meta.h, meta.w))
    vel_x = np.zeros((meta.h, meta.w)) if velocity_channels else None
    vel_y = np.zeros((meta.h, meta.w)) if velocity_channels else None
    log = scene.log
    cos_h, sin_h = math.cos(meta.ego_heading), math.sin(meta.ego_heading)
    for tid in sorted(log.tracks):
        if tid == scene.exclude_track_id:
            continue
        track = log.tracks[tid]
        box = track.box_at(t)
        if box is None:
            continue
        corners = _corners_rc(meta, box)
        if velocity_channels:
            v = track.velocity_at(t)
            fwd = v[0] * cos_h + v[1] * sin_h
            left = -v[0] * sin_h + v[1] * cos_h
            _paint_box(veh, corners, 1.0, extra=[(vel_x, -left), (vel_y, fwd)])
        else:
            _paint_box(veh, corners, 1.0)
    if velocity_channels:
        return veh, vel_x, vel_y
    return veh


def curb_mask(meta: ObsMeta, scene: SceneView) -> np.ndarray:
    mask = np.zeros((meta.h, meta.w))
    for curb in scene.log.curbs:
        _paint_polyline(mask, meta.world_to_rc(np.asarray(curb)))
    return mask


def _build_grid(meta: ObsMeta, scene: SceneView) -> np.ndarray:
    grid = np.zeros((meta.h, meta.w, N_CHANNELS))
    barrier = curb_mask(meta, scene)
    grid[:, :, CH_ROAD] = _flood_fill_road(barrier > 0.0, (meta.center_row, meta.center_col))
    veh, vel_x, vel_y = vehicle_mask_at(meta, scene, meta.t, velocity_channels=True)
    grid[:, :, CH_VEHICLE] = veh
    grid[:, :, CH_VEL_X] = vel_x
    grid[:, :, CH_VEL_Y] = vel_y
    _paint_polyline(grid[:, :, CH_PATH], meta.world_to_rc(scene.path.points))
    return grid


def _curb_ray_distance(pos: np.ndarray, heading: float, segs: np.ndarray,
                       cap: float = CURB_RAY_MAX) -> float:
    """Distance along ``heading`` to the first curb segment hit, capped."""
    if len(segs) == 0:
        return cap
    d = np.array([math.cos(heading), math.sin(heading)])
    a = segs[:, 0:2]
    e = segs[:, 2:4] - a
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    rel = a - pos
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ray = (rel[:, 0] * e[:, 1] - rel[:, 1] * e[:, 0]) / denom
        u = (rel[:, 0] * d[1] - rel[:, 1] * d[0]) / denom
    ok = (denom != 0.0) & (t_ray >= 0.0) & (u >= 0.0) & (u <= 1.0)
    if not np.any(ok):
        return cap
    return float(min(t_ray[ok].min(), cap))


def featurize(obs: Observation) -> np.ndarray:
    """Compact scene features: ego speed, path-relative pose and curvature,
    the K nearest replay vehicles (relative pose and velocity in the ego
    frame, sorted by distance), and the curb distance along the heading."""
    meta, scene = obs.meta, obs.scene
    pos = np.array([meta.ego_x, meta.ego_y])
    proj = project_to_path(pos, scene.path)
    pose = eval_path(scene.path, proj.s)
    heading_err = wrap_angle(meta.ego_heading - pose.heading)

    ego_vel = obs.ego_speed * np.array([math.cos(meta.ego_heading), math.sin(meta.ego_heading)])
    slots = []
    for tid in sorted(scene.log.tracks):
        if tid == scene.exclude_track_id:
            continue
        track = scene.log.tracks[tid]
        st = track.state_at(meta.t)
        if st is None:
            continue
        rel_p = ego_frame_xy(np.array([[st.pos.x, st.pos.y]]), pos, meta.ego_heading)[0]
        v = track.velocity_at(meta.t)
        rel_v = ego_frame_xy(np.array([v - ego_vel + pos]), pos, meta.ego_heading)[0]
        dist = float(math.hypot(rel_p[0], rel_p[1]))
        slots.append((dist, float(rel_p[0]), float(rel_p[1]), float(rel_v[0]), float(rel_v[1]),
                      wrap_angle(st.heading - meta.ego_heading)))
    slots.sort(key=lambda s: (s[0], s[1], s[2]))
    feats = [obs.ego_speed, proj.lateral_offset, heading_err, pose.curvature]
    for k in range(K_NEAREST):
        if k < len(slots):
            _, rx, ry, rvx, rvy, dh = slots[k]
            feats.extend([rx, ry, rvx, rvy, dh])
        else:
            feats.extend([0.0, ABSENT_DISTANCE, 0.0, 0.0, 0.0])
    feats.append(_curb_ray_distance(pos, meta.ego_heading, scene.log.curb_segments()))
    return np.array(feats, dtype=float)


# ---------------------------------------------------------------------------
# Predictions, samples, datasets
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class WaypointPrediction:
    """n relative waypoint displacements (ego frame, x right / y forward)."""

    offsets: np.ndarray  # (n, 2)
    period: float

    def __post_init__(self) -> None:
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(-1, 2)
        if len(self.offsets) < 1 or not np.all(np.isfinite(self.offsets)):
            raise ValueError("prediction needs >= 1 finite offset")

    @property
    def n(self) -> int:
        return len(self.offsets)


@dataclass(eq=False)
class LabeledSample:
    features: np.ndarray
    target_offsets: np.ndarray  # (n, 2)
    source: str = "original"
    multiplicity: int = 1
    observation: Optional[Observation] = None

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=float)
        self.target_offsets = np.asarray(self.target_offsets, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(self.features)):
            raise ValueError("non-finite features")
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be >= 1")


@dataclass(eq=False)
class Dataset:
    samples: list
    n: int
    period: float

    def __post_init__(self) -> None:
        for s in self.samples:
            if len(s.target_offsets) != self.n:
                raise ValueError("sample target length differs from dataset n")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def multiset_size(self) -> int:
        return sum(s.multiplicity for s in self.samples)

    def extend(self, samples) -> None:
        for s in samples:
            if len(s.target_offsets) != self.n:
                raise ValueError("sample target length differs from dataset n")
        self.samples.extend(samples)


def save_dataset(ds: Dataset, path) -> None:
    """JSONL: a meta line, then one sample per line."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"meta": {"n": ds.n, "period": ds.period}}) + "\n")
        for s in ds.samples:
            fh.write(json.dumps({
                "features": [float(v) for v in s.features],
                "targets": [[float(x), float(y)] for x, y in s.target_offsets],
                "source": s.source,
                "multiplicity": s.multiplicity,
            }) + "\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        header = json.loads(fh.readline())
        meta = header["meta"]
        samples = []
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            unknown = set(d) - {"features", "targets", "source", "multiplicity"}
            if unknown:
                logger.warning("%s: ignoring unknown sample keys %s", path, sorted(unknown))
            samples.append(LabeledSample(features=np.array(d["features"]),
                                         target_offsets=np.array(d["targets"]),
                                         source=d["source"],
                                         multiplicity=int(d["multiplicity"])))
    return Dataset(samples=samples, n=int(meta["n"]), period=float(meta["period"]))


def dump_grid(grid: np.ndarray, path) -> None:
    """Flat binary grid dump: uint32 H, W, C header then f64 little-endian data."""
    grid = np.asarray(grid, dtype="<f8")
    h, w = grid.shape[0], grid.shape[1]
    c = 1 if grid.ndim == 2 else grid.shape[2]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<III", h, w, c))
        fh.write(grid.tobytes())


def load_grid(path) -> np.ndarray:
    with open(path, "rb") as fh:
        h, w, c = struct.unpack("<III", fh.read(12))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(h, w, c)
    return data[:, :, 0] if c == 1 else data


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def loss_pred(pred, target) -> float:
    """Sum of squared waypoint offset errors for one sample."""
    p = pred.offsets if isinstance(pred, WaypointPrediction) else np.asarray(pred, dtype=float)
    t = target.offsets if isinstance(target, WaypointPrediction) else np.asarray(target, dtype=float)
    p = p.reshape(-1, 2)
    t = t.reshape(-1, 2)
    if p.shape != t.shape:
        raise ValueError(f"prediction/target length mismatch: {p.shape} vs {t.shape}")
    return float(np.sum((p - t) ** 2))


def waypoint_heatmap(offset_xy, resolution: float, h: int, w: int,
                     sigma: float = 2.0) -> np.ndarray:
    """Peak-1 Gaussian heatmap centered at the cell of an ego-frame offset."""
    meta_like_rc = np.array([h // 2 - offset_xy[1] / resolution,
                             w // 2 + offset_xy[0] / resolution])
    rr, cc = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    d2 = (rr - meta_like_rc[0]) ** 2 + (cc - meta_like_rc[1]) ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma))


def loss_veh(pred: WaypointPrediction, veh_masks, resolution: float,
             sigma: float = 2.0) -> float:
    """Mean over waypoints of <heatmap_i, vehicle mask i steps ahead>."""
    if len(veh_masks) != pred.n:
        raise ValueError("need one future vehicle mask per waypoint")
    h, w = np.asarray(veh_masks[0]).shape
    total = 0.0
    for i, mask in enumerate(veh_masks):
        mask = np.asarray(mask)
        if mask.shape != (h, w):
            raise ValueError("vehicle mask shapes differ")
        heat = waypoint_heatmap(pred.offsets[i], resolution, h, w, sigma)
        total += float(np.sum(heat * mask))
    return total / pred.n


def loss_curb(pred: WaypointPrediction, curb_mask_img: np.ndarray, resolution: float,
              sigma: float = 2.0) -> float:
    """Mean over waypoints of <heatmap_i, curb mask>."""
    curb_mask_img = np.asarray(curb_mask_img)
    h, w = curb_mask_img.shape
    total = 0.0
    for i in range(pred.n):
        heat = waypoint_heatmap(pred.offsets[i], resolution, h, w, sigma)
        total += float(np.sum(heat * curb_mask_img))
    return total / pred.n


def loss_total(pred: WaypointPrediction, target, veh_masks, curb_mask_img,
               lam1: float, lam2: float, resolution: float, sigma: float = 2.0) -> float:
    """Weighted combination: prediction loss + lam1 * vehicle + lam2 * curb."""
    total = loss_pred(pred, target)
    if lam1 != 0.0:
        total += lam1 * loss_veh(pred, veh_masks, resolution, sigma)
    if lam2 != 0.0:
        total += lam2 * loss_curb(pred, curb_mask_img, resolution, sigma)
    return total


def future_vehicle_masks(obs: Observation, n: int, period: float) -> list:
    """Vehicle masks i * period seconds ahead, rasterized in the current ego frame."""
    return [vehicle_mask_at(obs.meta, obs.scene, obs.meta.t + i * period)
            for i in range(1, n + 1)]


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


class Policy(Protocol):
    n: int
    period: float

    def act(self, obs: Observation) -> WaypointPrediction: ...


def policy_act(policy, obs: Observation) -> WaypointPrediction:
    """Query a policy; deterministic for a fixed observation."""
    if policy is None or not hasattr(policy, "act"):
        raise UntrainedPolicyError("policy is not trained/usable")
    return policy.act(obs)


@dataclass(eq=False)
class KnnBcPolicy:
    """Nearest-neighbor behavioral-cloning regressor over standardized features.

    Prediction is the multiplicity-and-distance-weighted mean of the k nearest
    training targets; a sample with multiplicity m counts as m physical
    copies, which realizes dataset duplication without replicating rows.
    """

    n: int
    period: float
    k: int
    feat_mean: np.ndarray
    feat_std: np.ndarray
    features_std: np.ndarray  # (m, d) standardized
    targets: np.ndarray  # (m, n, 2)
    multiplicities: np.ndarray  # (m,)

    def predict_features(self, feat: np.ndarray) -> np.ndarray:
        z = (np.asarray(feat, dtype=float) - self.feat_mean) / self.feat_std
        d2 = np.sum((self.features_std - z) ** 2, axis=1)
        m = len(d2)
        k_eff = min(self.k, int(np.sum(self.multiplicities)))
        kth = min(k_eff, m) - 1
        thresh = np.partition(d2, kth)[kth]
        cand = np.flatnonzero(d2 <= thresh)
        order = cand[np.lexsort((cand, d2[cand]))]
        need = k_eff
        num = np.zeros((self.n, 2))
        den = 0.0
        for idx in order:
            used = min(need, int(self.multiplicities[idx]))
            wgt = used / (math.sqrt(d2[idx]) + 1e-6)
            num += wgt * self.targets[idx]
            den += wgt
            need -= used
            if need == 0:
                break
        return num / den

    def act_on_features(self, feat: np.ndarray, obs: Optional[Observation] = None) -> WaypointPrediction:
        return WaypointPrediction(offsets=self.predict_features(feat), period=self.period)

    def act(self, obs: Observation) -> WaypointPrediction:
        return self.act_on_features(featurize(obs))


def knn_bc_fit(dataset: Dataset, k: int, weights=None) -> KnnBcPolicy:
    """Fit the kNN regressor: multiplicity-weighted feature standardization
    plus a brute-force neighbor index."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if k < 1:
        raise ValueError("k must be >= 1")
    feats = np.stack([s.features for s in dataset.samples])
    targets = np.stack([s.target_offsets for s in dataset.samples])
    mult = (np.asarray(weights, dtype=float) if weights is not None
            else np.array([s.multiplicity for s in dataset.samples], dtype=float))
    total = float(np.sum(mult))
    if k > total:
        logger.warning("k=%d exceeds dataset multiset size %d; capping", k, int(total))
    mean = np.average(feats, axis=0, weights=mult)
    var = np.average((feats - mean) ** 2, axis=0, weights=mult)
    std = np.sqrt(var)
    std[std < 1e-12] = 1.0
    return KnnBcPolicy(n=dataset.n, period=dataset.period, k=k,
                       feat_mean=mean, feat_std=std,
                       features_std=(feats - mean) / std,
                       targets=targets, multiplicities=mult)


@dataclass(eq=False)
class ConstantMeanPolicy:
    """Predicts the multiplicity-weighted mean target; a floor baseline."""

    n: int
    period: float
    mean_offsets: np.ndarray

    @classmethod
    def fit(cls, dataset: Dataset) -> "ConstantMeanPolicy":
        mult = np.array([s.multiplicity for s in dataset.samples], dtype=float)
        targets = np.stack([s.target_offsets for s in dataset.samples])
        mean = np.einsum("i,ijk->jk", mult, targets) / np.sum(mult)
        return cls(n=dataset.n, period=dataset.period, mean_offsets=mean)

    def act_on_features(self, feat, obs=None) -> WaypointPrediction:
        return WaypointPrediction(offsets=self.mean_offsets.copy(), period=self.period)

    def act(self, obs: Observation) -> WaypointPrediction:
        return self.act_on_features(None)


@dataclass(eq=False)
class LogReplayPolicy:
    """Outputs the ego's own logged future; replays the dataset trajectory."""

    track_id: int
    n: int
    period: float

    def act(self, obs: Observation) -> WaypointPrediction:
        track = obs.scene.log.tracks[self.track_id]
        pose = np.array([obs.meta.ego_x, obs.meta.ego_y])
        pts = []
        for i in range(1, self.n + 1):
            st = track.state_at(obs.meta.t + i * self.period)
            if st is None:  # past the log end: hold the final recorded point
                pts.append(track.xy[-1])
            else:
                pts.append([st.pos.x, st.pos.y])
        offsets = ego_frame_xy(np.array(pts), pose, obs.meta.ego_heading)
        return WaypointPrediction(offsets=offsets, period=self.period)

    def act_on_features(self, feat, obs=None) -> WaypointPrediction:
        if obs is None:
            raise UntrainedPolicyError("replay policy needs the observation")
        return self.act(obs)
