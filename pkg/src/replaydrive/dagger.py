"""Iterative imitation improvement: train, roll out, select critical states,
label them with the planner-based pseudo-expert, and aggregate.

Two critical-state selection strategies are provided: the frames immediately
preceding a failure (k-Failure), and the rollout frame a learned
discriminator rates least expert-like (Adversary).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from .dataset import EpisodeSpec, TrafficLog, enumerate_episodes
from .geometry import OrientedBox, corners_overlap, project_to_path
from .motion import EgoState
from .planner import InfeasiblePlanError, PlannerConfig, plan
from .policy import (Dataset, GridConfig, LabeledSample, ego_frame_xy, featurize,
                     knn_bc_fit, make_observation)
from .refine import BlendInfeasibleError, RefineConfig, blend_to_ego
from .simulator import (FAILURE_OUTCOMES, EvalMetrics, Outcome, RolloutResult,
                        SimConfig, metrics_from_results, rollout_many)

logger = logging.getLogger(__name__)

STRATEGIES = ("k_failure", "adversary")


@dataclass(frozen=True)
class DaggerConfig:
    iterations: int = 10
    strategy: str = "k_failure"
    k_failure_frames: int = 20
    duplication: int = 10  # multiplicity applied to each new expert sample
    samples_per_state: int = 1  # >1 extracts extra samples along the expert trajectory
    episode_stride: int = 25
    episode_min_remaining: int = 80
    episode_horizon_slack: int = 60
    extraction_stride: int = 1
    knn_k: int = 5
    workers: int = 1
    policy_n: int = 10
    policy_period: float = 0.3
    v_goal_value: Optional[float] = None  # None: per-episode logged mean speed
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.k_failure_frames < 1 or self.duplication < 1 or self.samples_per_state < 1:
            raise ValueError("k, duplication, and samples_per_state must be >= 1")


def extract_original_dataset(log: TrafficLog, n: int = 10, period: float = 0.3,
                             grid: GridConfig = GridConfig(),
                             frame_stride: int = 1) -> Dataset:
    """Behavioral-cloning samples from the log itself.

    Every track frame with n future waypoints inside the recorded interval
    yields one sample: the vehicle's own scene features paired with its
    logged future offsets in its ego frame.
    """
    samples = []
    for tid in sorted(log.tracks):
        track = log.tracks[tid]
        path = log.best_path_for_track(tid)
        for f in range(0, track.frame_count, frame_stride):
            t0 = float(track.times[f])
            if t0 + n * period > float(track.times[-1]) + 1e-9:
                continue
            st = track.state_at_frame(f)
            ego = EgoState(pos=st.pos, heading=st.heading, speed=st.speed, t=t0)
            obs = make_observation(log, ego, path, grid, exclude_track_id=tid)
            future = np.array([[log.tracks[tid].state_at(t0 + i * period).pos.x,
                                log.tracks[tid].state_at(t0 + i * period).pos.y]
                               for i in range(1, n + 1)])
            offsets = ego_frame_xy(future, st.pos.as_array(), st.heading)
            samples.append(LabeledSample(features=featurize(obs), target_offsets=offsets,
                                         source="original"))
    return Dataset(samples=samples, n=n, period=period)


def select_k_failure(result: RolloutResult, k: int) -> list:
    """The up-to-k frame indices preceding the failure frame (which is
    excluded: the expert is queried where recovery is still possible)."""
    if result.outcome not in FAILURE_OUTCOMES or result.failure_frame is None:
        return []
    lo = max(0, result.failure_frame - k)
    return list(range(lo, result.failure_frame))


@dataclass(eq=False)
class Discriminator:
    """Logistic model scoring how expert-like a (features, offsets) pair is."""

    weights: np.ndarray
    bias: float
    feat_mean: np.ndarray
    feat_std: np.ndarray

    def expert_probability(self, features: np.ndarray, offsets: np.ndarray) -> float:
        x = np.concatenate([np.asarray(features, dtype=float),
                            np.asarray(offsets, dtype=float).ravel()])
        z = (x - self.feat_mean) / self.feat_std
        logit = float(z @ self.weights + self.bias)
        return 1.0 / (1.0 + math.exp(-logit))


def _behavior_matrix_expert(expert: Dataset) -> np.ndarray:
    return np.stack([np.concatenate([s.features, s.target_offsets.ravel()])
                     for s in expert.samples])


def _behavior_matrix_rollouts(rollouts: list) -> np.ndarray:
    rows = []
    for r in rollouts:
        for fr in r.frames:
            rows.append(np.concatenate([fr.features, np.asarray(fr.pred_offsets).ravel()]))
    return np.stack(rows) if rows else np.zeros((0, 0))


def fit_discriminator(expert: Dataset, rollouts: list, epochs: int = 400,
                      lr: float = 0.5, l2: float = 1e-4, tol: float = 1e-9) -> Discriminator:
    """Full-batch logistic regression (label 1 = expert), deterministic:
    pooled standardization, zero initialization, fixed learning rate."""
    x_expert = _behavior_matrix_expert(expert)
    x_policy = _behavior_matrix_rollouts(rollouts)
    if len(x_expert) == 0 or len(x_policy) == 0:
        raise ValueError("both classes must be non-empty")
    x = np.vstack([x_expert, x_policy])
    y = np.concatenate([np.ones(len(x_expert)), np.zeros(len(x_policy))])
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std < 1e-12] = 1.0
    z = (x - mean) / std
    w = np.zeros(z.shape[1])
    b = 0.0
    n = len(z)
    prev_loss = math.inf
    for _ in range(epochs):
        logits = z @ w + b
        p = 1.0 / (1.0 + np.exp(-logits))
        eps = 1e-12
        loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
                     + 0.5 * l2 * float(w @ w))
        grad_w = z.T @ (p - y) / n + l2 * w
        grad_b = float(np.mean(p - y))
        w -= lr * grad_w
        b -= lr * grad_b
        if abs(prev_loss - loss) < tol:
            break
        prev_loss = loss
    return Discriminator(weights=w, bias=b, feat_mean=mean, feat_std=std)


def select_adversary(result: RolloutResult, disc: Discriminator) -> list:
    """The single frame with the lowest expert probability (earliest on ties)."""
    probs = np.array([disc.expert_probability(fr.features, fr.pred_offsets)
                      for fr in result.frames])
    return [int(np.argmin(probs))]


def _trajectory_collides(points: np.ndarray, times: np.ndarray, log: TrafficLog,
                         ego_dims: tuple, headings: np.ndarray,
                         exclude_track_id: Optional[int]) -> bool:
    length, width = ego_dims
    for p, t, h in zip(points, times, headings):
        ego = OrientedBox(center=_pt(p), heading=float(h), length=length, width=width)
        ex, ey, er = ego.center.x, ego.center.y, ego.radius
        for tid in sorted(log.tracks):
            if tid == exclude_track_id:
                continue
            track = log.tracks[tid]
            box = track.box_at(float(t))
            if box is None:
                continue
            dx, dy = box.center.x - ex, box.center.y - ey
            if dx * dx + dy * dy > (er + box.radius) ** 2:
                continue
            if corners_overlap(ego.corners(), box.corners()):
                return True
    return False


def _pt(arr):
    from .geometry import Point2

    return Point2(float(arr[0]), float(arr[1]))


def _traj_headings(points: np.ndarray, fallback: float) -> np.ndarray:
    d = np.diff(points, axis=0)
    out = np.empty(len(points))
    last = fallback
    for i in range(len(d)):
        if abs(d[i, 0]) > 1e-9 or abs(d[i, 1]) > 1e-9:
            last = math.atan2(d[i, 1], d[i, 0])
        out[i] = last
    out[-1] = last
    return out


def label_with_expert(state: EgoState, log: TrafficLog, path, planner_cfg: PlannerConfig,
                      refine_cfg: RefineConfig, n: int, period: float,
                      grid: GridConfig, ego_dims: tuple, iteration: int,
                      exclude_track_id: Optional[int] = None,
                      samples_per_state: int = 1) -> list:
    """Pseudo-expert labels for one rollout state.

    Plans along the reference path from the state's projection, blends the
    rough trajectory back to the actual pose, resamples it at the policy
    waypoint period, and validates that the labeled motion is collision-free.
    Returns [] when the plan or blend is infeasible or validation fails (the
    state is skipped, not fatal).
    """
    proj = project_to_path(state.pos, path)
    try:
        result = plan(proj.s, max(state.speed, 0.0), path, log, state.t, planner_cfg,
                      exclude_track_id=exclude_track_id)
    except InfeasiblePlanError:
        logger.debug("labeling skipped: infeasible plan at t=%.2f", state.t)
        return []
    try:
        refined = blend_to_ego(result.trajectory, state, path, refine_cfg)
    except BlendInfeasibleError:
        logger.debug("labeling skipped: blend infeasible at t=%.2f", state.t)
        return []

    headings = _traj_headings(refined.points, state.heading)
    if _trajectory_collides(refined.points, refined.times, log, ego_dims, headings,
                            exclude_track_id):
        logger.debug("labeling skipped: refined trajectory collides at t=%.2f", state.t)
        return []

    samples = []
    source = f"pseudo_expert:{iteration}"
    max_anchor = min(samples_per_state,
                     int((refined.t_end - state.t - n * period) / period) + 1)
    max_anchor = max(max_anchor, 1)
    for j in range(max_anchor):
        t_anchor = state.t + j * period
        if j == 0:
            anchor_state = state
        else:
            p = refined.position_at(t_anchor)
            p_prev = refined.position_at(t_anchor - period)
            disp = p - p_prev
            speed = float(np.hypot(*disp) / period)
            heading = math.atan2(disp[1], disp[0]) if speed > 1e-9 else state.heading
            anchor_state = EgoState(pos=_pt(p), heading=heading, speed=speed, t=t_anchor)
        wp_times = t_anchor + period * np.arange(1, n + 1)
        wp = np.stack([refined.position_at(float(t)) for t in wp_times])
        offsets = ego_frame_xy(wp, anchor_state.pos.as_array(), anchor_state.heading)
        obs = make_observation(log, anchor_state, path, grid,
                               exclude_track_id=exclude_track_id)
        samples.append(LabeledSample(features=featurize(obs), target_offsets=offsets,
                                     source=source))
    return samples


@dataclass(eq=False)
class IterationReport:
    iteration: int
    metrics: EvalMetrics
    dataset_unique: int
    dataset_multiset: int
    selected_states: int
    labeled_samples: int
    skipped_states: int
    train_loss_pred: float

    def as_dict(self) -> dict:
        d = self.metrics.as_dict()
        d.update({
            "iteration": self.iteration,
            "dataset_unique": self.dataset_unique,
            "dataset_multiset": self.dataset_multiset,
            "selected_states": self.selected_states,
            "labeled_samples": self.labeled_samples,
            "skipped_states": self.skipped_states,
            "train_loss_pred": self.train_loss_pred,
        })
        return d


@dataclass(eq=False)
class DaggerReport:
    iterations: list
    config: dict

    def as_dict(self) -> dict:
        return {"config": self.config,
                "iterations": [it.as_dict() for it in self.iterations]}

    def success_rates(self) -> list:
        return [float(it.metrics.suc_rate) for it in self.iterations]


def _train_loss(policy, data: Dataset, sample_cap: int = 512) -> float:
    stride = max(1, len(data) // sample_cap)
    losses = []
    for s in data.samples[::stride]:
        pred = policy.predict_features(s.features)
        losses.append(float(np.sum((pred - s.target_offsets) ** 2)))
    return float(np.mean(losses)) if losses else 0.0


def run_dagger(log: TrafficLog, cfg: DaggerConfig,
               checkpoint_hook=None,
               start_iteration: int = 0,
               initial_dataset: Optional[Dataset] = None,
               prior_iterations: Optional[list] = None) -> DaggerReport:
    """The full improvement loop.

    Per iteration: fit the kNN policy on the aggregated dataset, roll out all
    training episodes with smoothed predictions, select critical states,
    label them with the pseudo-expert, and aggregate the new samples with the
    configured duplication multiplicity. Episodes are enumerated once from
    the training log and reused every iteration.

    ``checkpoint_hook(iteration, dataset, report)`` is called after each
    iteration when provided. ``start_iteration`` / ``initial_dataset`` /
    ``prior_iterations`` resume a previous run from its checkpoint.
    """
    episodes = enumerate_episodes(log, cfg.episode_stride, cfg.episode_min_remaining,
                                  horizon_slack_frames=cfg.episode_horizon_slack)
    if not episodes:
        raise ValueError("no episodes satisfy the enumeration constraints")
    base = extract_original_dataset(log, n=cfg.policy_n, period=cfg.policy_period,
                                    grid=cfg.sim.grid, frame_stride=cfg.extraction_stride)
    if initial_dataset is not None:
        data = initial_dataset
    else:
        data = Dataset(samples=list(base.samples), n=base.n, period=base.period)

    reports = list(prior_iterations) if prior_iterations else []
    for i in range(start_iteration, cfg.iterations):
        policy = knn_bc_fit(data, cfg.knn_k)
        results = rollout_many(episodes, policy, cfg.sim, workers=cfg.workers)
        metrics = metrics_from_results(results)

        disc = None
        if cfg.strategy == "adversary":
            disc = fit_discriminator(base, results)

        selected = 0
        skipped = 0
        new_samples = []
        for spec, result in zip(episodes, results):
            if cfg.strategy == "k_failure":
                frames = select_k_failure(result, cfg.k_failure_frames)
            else:
                frames = select_adversary(result, disc)
            if not frames:
                continue
            track = log.tracks[spec.ego_track_id]
            v_goal = cfg.v_goal_value if cfg.v_goal_value is not None else track.mean_speed
            planner_cfg = replace(cfg.planner, v_goal=float(v_goal),
                                  ego_length=track.length, ego_width=track.width)
            path = log.path_by_id(spec.path_id)
            for fidx in frames:
                selected += 1
                labels = label_with_expert(
                    result.frames[fidx].state, log, path, planner_cfg, cfg.refine,
                    n=cfg.policy_n, period=cfg.policy_period, grid=cfg.sim.grid,
                    ego_dims=(track.length, track.width), iteration=i,
                    exclude_track_id=spec.ego_track_id,
                    samples_per_state=cfg.samples_per_state)
                if not labels:
                    skipped += 1
                    continue
                for s in labels:
                    s.multiplicity = cfg.duplication
                new_samples.extend(labels)

        entry = IterationReport(
            iteration=i, metrics=metrics,
            dataset_unique=len(data), dataset_multiset=data.multiset_size,
            selected_states=selected, labeled_samples=len(new_samples),
            skipped_states=skipped, train_loss_pred=_train_loss(policy, data))
        reports.append(entry)
        data.extend(new_samples)
        if checkpoint_hook is not None:
            checkpoint_hook(i, data, reports)
        logger.info("iteration %d: suc=%.3f fail_v=%.3f fail_c=%.3f timeout=%.3f "
                    "selected=%d labeled=%d skipped=%d dataset=%d/%d",
                    i, float(metrics.suc_rate), float(metrics.fail_v_rate),
                    float(metrics.fail_c_rate), float(metrics.timeout_rate),
                    selected, len(new_samples), skipped, len(data), data.multiset_size)

    config_echo = {
        "iterations": cfg.iterations, "strategy": cfg.strategy,
        "k_failure_frames": cfg.k_failure_frames, "duplication": cfg.duplication,
        "samples_per_state": cfg.samples_per_state,
        "episode_stride": cfg.episode_stride,
        "episode_min_remaining": cfg.episode_min_remaining,
        "episode_horizon_slack": cfg.episode_horizon_slack,
        "knn_k": cfg.knn_k, "policy_n": cfg.policy_n, "policy_period": cfg.policy_period,
    }
    return DaggerReport(iterations=reports, config=config_echo)
