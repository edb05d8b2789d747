"""Run configuration: one YAML/JSON file covering every module, with CLI
flag overrides. Every field has a default, so an empty config is valid."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .dagger import DaggerConfig
from .planner import PlannerConfig
from .policy import GridConfig
from .refine import RefineConfig
from .simulator import SimConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 7
    # scenario
    scenario_kind: str = "roundabout"
    scenario_vehicles: int = 20
    # episodes
    episode_stride: int = 25
    episode_min_remaining: int = 80
    episode_horizon_slack: int = 60
    # policy
    policy_n: int = 10
    policy_period: float = 0.3
    knn_k: int = 5
    grid_resolution: float = 0.5
    grid_h: int = 128
    grid_w: int = 128
    # planner
    planner_dt: float = 0.5
    planner_horizon: float = 8.0
    w1: float = 1.0
    w2: float = 2.0
    w3: float = 0.5
    bin_s: float = 0.5
    bin_v: float = 0.25
    bin_t: float = 0.5
    safety_margin: float = 0.3
    v_goal: float | None = None  # None: per-episode logged mean speed
    heuristic_eps: float = 0.0
    # refine
    max_heading_dev_deg: float = 20.0
    alpha_fidelity: float = 1.0
    alpha_vel_var: float = 5.0
    alpha_curv_var: float = 5.0
    # simulator
    step_period: float = 0.1
    accel_cap: float = 4.0
    yaw_rate_cap: float = 0.6
    goal_radius: float = 2.0
    smooth_output: bool = True
    # dagger
    iterations: int = 10
    strategy: str = "k_failure"
    k_failure_frames: int = 20
    duplication: int = 10
    samples_per_state: int = 1
    extraction_stride: int = 1
    workers: int = 1

    def grid(self) -> GridConfig:
        return GridConfig(resolution=self.grid_resolution, h=self.grid_h, w=self.grid_w)

    def refine_config(self) -> RefineConfig:
        return RefineConfig(max_heading_dev=math.radians(self.max_heading_dev_deg),
                            alpha_fidelity=self.alpha_fidelity,
                            alpha_vel_var=self.alpha_vel_var,
                            alpha_curv_var=self.alpha_curv_var)

    def planner_config(self, v_goal: float | None = None) -> PlannerConfig:
        goal = v_goal if v_goal is not None else (self.v_goal if self.v_goal is not None else 8.0)
        return PlannerConfig(dt=self.planner_dt, horizon=self.planner_horizon,
                             w1=self.w1, w2=self.w2, w3=self.w3,
                             bin_s=self.bin_s, bin_v=self.bin_v, bin_t=self.bin_t,
                             safety_margin=self.safety_margin, v_goal=goal,
                             heuristic_eps=self.heuristic_eps)

    def sim_config(self) -> SimConfig:
        return SimConfig(step_period=self.step_period, accel_cap=self.accel_cap,
                         yaw_rate_cap=self.yaw_rate_cap, goal_radius=self.goal_radius,
                         smooth_output=self.smooth_output, refine=self.refine_config(),
                         grid=self.grid())

    def dagger_config(self) -> DaggerConfig:
        return DaggerConfig(iterations=self.iterations, strategy=self.strategy,
                            k_failure_frames=self.k_failure_frames,
                            duplication=self.duplication,
                            samples_per_state=self.samples_per_state,
                            episode_stride=self.episode_stride,
                            episode_min_remaining=self.episode_min_remaining,
                            episode_horizon_slack=self.episode_horizon_slack,
                            extraction_stride=self.extraction_stride,
                            knn_k=self.knn_k, workers=self.workers,
                            policy_n=self.policy_n, policy_period=self.policy_period,
                            v_goal_value=self.v_goal,
                            planner=self.planner_config(), refine=self.refine_config(),
                            sim=self.sim_config())


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


class ConfigError(ValueError):
    """The config file is malformed or holds invalid values."""


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional YAML/JSON file plus overrides
    (overrides win)."""
    values: dict = {}
    if path is not None:
        raw = yaml.safe_load(Path(path).read_text())
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        unknown = set(raw) - _FIELD_NAMES
        if unknown:
            logger.warning("%s: ignoring unknown config keys %s", path, sorted(unknown))
        values.update({k: v for k, v in raw.items() if k in _FIELD_NAMES})
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = RunConfig(**values)
        cfg.dagger_config()  # validate derived configs eagerly
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg
