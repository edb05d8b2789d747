"""Dataset-replay rollout engine.

The ego follows policy waypoints through a capped kinematic tracking step;
every other vehicle replays its logged trajectory (non-reactive). Episodes
terminate on vehicle collision, curb collision, reaching the reference-path
end, or horizon exhaustion.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np

from .dataset import EpisodeSpec, TrafficLog
from .geometry import OrientedBox, Point2, box_hits_segments, corners_overlap, wrap_angle
from .motion import EgoState, Trajectory
from .policy import (GridConfig, Observation, WaypointPrediction, featurize,
                     make_observation, offsets_to_world)
from .refine import RefineConfig, qp_smooth


class Outcome(str, Enum):
    SUCCESS = "success"
    FAIL_VEHICLE = "fail_vehicle"
    FAIL_CURB = "fail_curb"
    TIMEOUT = "timeout"


FAILURE_OUTCOMES = (Outcome.FAIL_VEHICLE, Outcome.FAIL_CURB)


class EpisodeError(RuntimeError):
    """The policy (not the driving) failed during an episode."""


class TrackingError(RuntimeError):
    """The trajectory has no future waypoint to track."""


@dataclass(frozen=True)
class CollisionHit:
    kind: str  # "vehicle" | "curb"
    index: int  # track id or curb polyline index


@dataclass(frozen=True)
class SimConfig:
    step_period: float = 0.1
    accel_cap: float = 4.0  # matches the planner's largest deceleration magnitude
    yaw_rate_cap: float = 0.6
    goal_radius: float = 2.0
    smooth_output: bool = True
    refine: RefineConfig = field(default_factory=RefineConfig)
    grid: GridConfig = field(default_factory=GridConfig)


@dataclass(eq=False)
class FrameRecord:
    state: EgoState
    features: np.ndarray
    pred_offsets: np.ndarray  # (n, 2)


@dataclass(eq=False)
class RolloutResult:
    ego_track_id: int
    start_frame: int
    horizon_frames: int
    path_id: str
    outcome: Outcome
    frames: list
    failure_frame: Optional[int] = None
    collided_with: Optional[CollisionHit] = None

    def __post_init__(self) -> None:
        if (self.failure_frame is not None) != (self.outcome in FAILURE_OUTCOMES):
            raise ValueError("failure_frame present iff the outcome is a failure")
        if not self.frames:
            raise ValueError("rollout must record at least one frame")


def track_waypoints(state: EgoState, traj: Trajectory, step_period: float,
                    accel_cap: float = 4.0, yaw_rate_cap: float = 0.6) -> EgoState:
    """One kinematic step toward the trajectory position at t + step_period.

    Speed and heading changes are capped; when a cap binds the pose follows
    the capped motion rather than the waypoint.
    """
    if traj.t_end <= state.t:
        raise TrackingError(f"no waypoint beyond t={state.t:.3f}")
    target = traj.position_at(state.t + step_period)
    dx = target[0] - state.pos.x
    dy = target[1] - state.pos.y
    dist = math.hypot(dx, dy)
    desired_speed = dist / step_period
    desired_heading = math.atan2(dy, dx) if dist > 1e-12 else state.heading

    dv = desired_speed - state.speed
    dv_cap = accel_cap * step_period
    new_speed = state.speed + max(-dv_cap, min(dv_cap, dv))
    new_speed = max(new_speed, 0.0)
    dh = wrap_angle(desired_heading - state.heading)
    dh_cap = yaw_rate_cap * step_period
    new_heading = wrap_angle(state.heading + max(-dh_cap, min(dh_cap, dh)))
    step = new_speed * step_period
    new_pos = Point2(state.pos.x + step * math.cos(new_heading),
                     state.pos.y + step * math.sin(new_heading))
    return EgoState(pos=new_pos, heading=new_heading, speed=new_speed,
                    t=state.t + step_period)


def check_collisions(ego_box: OrientedBox, log: TrafficLog, t: float,
                     exclude_track_id: Optional[int] = None) -> Optional[CollisionHit]:
    """First collision at time t: replay vehicles by ascending track id, then
    curb polylines by index."""
    ex, ey, er = ego_box.center.x, ego_box.center.y, ego_box.radius
    ego_corners = None
    for tid in sorted(log.tracks):
        if tid == exclude_track_id:
            continue
        track = log.tracks[tid]
        st = track.state_at(t)
        if st is None:
            continue
        other_r = 0.5 * math.hypot(track.length, track.width)
        dx, dy = st.pos.x - ex, st.pos.y - ey
        if dx * dx + dy * dy > (er + other_r) ** 2:
            continue
        if ego_corners is None:
            ego_corners = ego_box.corners()
        other = OrientedBox(st.pos, st.heading, track.length, track.width)
        if corners_overlap(ego_corners, other.corners()):
            return CollisionHit(kind="vehicle", index=tid)
    segs = log.curb_segments()
    if len(segs):
        hits = box_hits_segments(ego_box, segs)
        idx = np.flatnonzero(hits)
        if len(idx):
            return CollisionHit(kind="curb", index=log.curb_index_of_segment(int(idx[0])))
    return None


def _realize_prediction(pred: WaypointPrediction, state: EgoState,
                        cfg: SimConfig) -> Trajectory:
    if cfg.smooth_output and pred.n >= 3:
        return qp_smooth(pred.offsets, state, cfg.refine, pred.period)
    pts = offsets_to_world(pred.offsets, state.pos.as_array(), state.heading)
    times = state.t + pred.period * np.arange(1, pred.n + 1)
    return Trajectory(times=np.concatenate([[state.t], times]),
                      points=np.vstack([state.pos.as_array(), pts]))


def run_episode(spec: EpisodeSpec, policy, cfg: SimConfig = SimConfig()) -> RolloutResult:
    """Closed-loop rollout of one episode.

    Per step: observe, query the policy, smooth its waypoints, advance the
    ego one tracking step; replay vehicles are pure functions of time. The
    outcome checks run in order vehicle collision, curb collision, success,
    then timeout once the horizon is exhausted.
    """
    log = spec.log
    track = log.tracks[spec.ego_track_id]
    path = log.path_by_id(spec.path_id)
    ratio = log.frame_period / cfg.step_period
    if abs(ratio - round(ratio)) > 1e-9 or ratio < 1.0 - 1e-9:
        raise ValueError("step_period must divide frame_period")
    steps_per_frame = int(round(ratio))
    max_steps = spec.horizon_frames * steps_per_frame

    st0 = track.state_at_frame(spec.start_frame)
    state = EgoState(pos=st0.pos, heading=st0.heading, speed=st0.speed,
                     t=float(track.times[spec.start_frame]))
    goal = path.end

    frames: list = []
    outcome: Optional[Outcome] = None
    failure_frame = None
    hit_record = None
    for k in range(max_steps + 1):
        obs = make_observation(log, state, path, cfg.grid,
                               exclude_track_id=spec.ego_track_id)
        feats = featurize(obs)
        try:
            if hasattr(policy, "act_on_features"):
                pred = policy.act_on_features(feats, obs)
            else:
                pred = policy.act(obs)
        except Exception as exc:
            raise EpisodeError(
                f"policy failed at step {k} of episode "
                f"(track {spec.ego_track_id}, frame {spec.start_frame}): {exc}") from exc
        frames.append(FrameRecord(state=state, features=feats, pred_offsets=pred.offsets))

        ego_box = OrientedBox(state.pos, state.heading, track.length, track.width)
        hit = check_collisions(ego_box, log, state.t, exclude_track_id=spec.ego_track_id)
        if hit is not None:
            outcome = Outcome.FAIL_VEHICLE if hit.kind == "vehicle" else Outcome.FAIL_CURB
            failure_frame = k
            hit_record = hit
            break
        if state.pos.distance_to(goal) <= cfg.goal_radius:
            outcome = Outcome.SUCCESS
            break
        if k == max_steps:
            outcome = Outcome.TIMEOUT
            break
        traj = _realize_prediction(pred, state, cfg)
        state = track_waypoints(state, traj, cfg.step_period,
                                accel_cap=cfg.accel_cap, yaw_rate_cap=cfg.yaw_rate_cap)

    return RolloutResult(ego_track_id=spec.ego_track_id, start_frame=spec.start_frame,
                         horizon_frames=spec.horizon_frames, path_id=spec.path_id,
                         outcome=outcome, frames=frames, failure_frame=failure_frame,
                         collided_with=hit_record)


# ---------------------------------------------------------------------------
# Batch evaluation
# ---------------------------------------------------------------------------

_WORKER_STATE: dict = {}


def _init_worker(log, policy, cfg):
    _WORKER_STATE["log"] = log
    _WORKER_STATE["policy"] = policy
    _WORKER_STATE["cfg"] = cfg


def _run_episode_task(args):
    idx, tid, start, horizon, path_id = args
    spec = EpisodeSpec(log=_WORKER_STATE["log"], ego_track_id=tid, start_frame=start,
                       horizon_frames=horizon, path_id=path_id)
    return idx, run_episode(spec, _WORKER_STATE["policy"], _WORKER_STATE["cfg"])


def rollout_many(specs: list, policy, cfg: SimConfig = SimConfig(),
                 workers: int = 1) -> list:
    """Run episodes (optionally in parallel); results ordered by episode index."""
    if not specs:
        return []
    if workers <= 1:
        return [run_episode(s, policy, cfg) for s in specs]
    log = specs[0].log
    for s in specs:
        if s.log is not log:
            raise ValueError("parallel rollout requires all specs to share one log")
    tasks = [(i, s.ego_track_id, s.start_frame, s.horizon_frames, s.path_id)
             for i, s in enumerate(specs)]
    results: list = [None] * len(specs)
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(log, policy, cfg)) as pool:
        for idx, res in pool.map(_run_episode_task, tasks, chunksize=8):
            results[idx] = res
    return results


@dataclass(eq=False)
class EvalMetrics:
    """Episode outcome counts; rates are exact fractions of the total."""

    counts: dict

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def rate(self, outcome: Outcome) -> Fraction:
        return Fraction(self.counts.get(outcome.value, 0), self.total)

    @property
    def suc_rate(self) -> Fraction:
        return self.rate(Outcome.SUCCESS)

    @property
    def fail_v_rate(self) -> Fraction:
        return self.rate(Outcome.FAIL_VEHICLE)

    @property
    def fail_c_rate(self) -> Fraction:
        return self.rate(Outcome.FAIL_CURB)

    @property
    def timeout_rate(self) -> Fraction:
        return self.rate(Outcome.TIMEOUT)

    def rates_float(self) -> dict:
        return {o.value: float(self.rate(o)) for o in Outcome}

    def as_dict(self) -> dict:
        return {"counts": {o.value: self.counts.get(o.value, 0) for o in Outcome},
                "rates": self.rates_float(), "total": self.total}


def metrics_from_results(results: list) -> EvalMetrics:
    counts = {o.value: 0 for o in Outcome}
    for r in results:
        counts[r.outcome.value] += 1
    return EvalMetrics(counts=counts)


def evaluate(specs: list, policy, cfg: SimConfig = SimConfig(),
             workers: int = 1) -> EvalMetrics:
    """Outcome rates over episodes; the four rates always sum to exactly 1."""
    if not specs:
        raise ValueError("no episodes to evaluate")
    return metrics_from_results(rollout_many(specs, policy, cfg, workers))


def save_rollouts(results: list, path) -> None:
    """JSONL: one episode per line with its spec, outcome, and ego states."""
    with open(path, "w") as fh:
        for r in results:
            fh.write(json.dumps({
                "ego_track_id": r.ego_track_id,
                "start_frame": r.start_frame,
                "horizon_frames": r.horizon_frames,
                "path_id": r.path_id,
                "outcome": r.outcome.value,
                "failure_frame": r.failure_frame,
                "frames": [{"t": f.state.t, "x": f.state.pos.x, "y": f.state.pos.y,
                            "heading": f.state.heading, "speed": f.state.speed}
                           for f in r.frames],
            }) + "\n")


def load_rollout_records(path) -> list:
    """Parsed JSONL rollout records (plain dicts, for rendering/inspection)."""
    records = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records
