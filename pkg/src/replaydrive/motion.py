"""Kinematic value types shared by the planner, refiners, policy, and simulator."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Point2, wrap_angle


@dataclass(frozen=True)
class EgoState:
    """Pose, speed, and time of the controlled vehicle."""

    pos: Point2
    heading: float
    speed: float
    t: float

    def __post_init__(self) -> None:
        if self.speed < 0.0 or not all(map(math.isfinite,
                                           (self.pos.x, self.pos.y, self.heading, self.speed, self.t))):
            raise ValueError(f"invalid ego state: {self}")


@dataclass(eq=False)
class Trajectory:
    """Timestamped world-frame waypoint sequence.

    ``times`` is strictly increasing; ``headings`` is optional and parallel
    to ``points`` when present.
    """

    times: np.ndarray  # (n,)
    points: np.ndarray  # (n, 2)
    headings: Optional[np.ndarray] = None  # (n,)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if len(self.times) < 1 or len(self.times) != len(self.points):
            raise ValueError("trajectory needs >= 1 waypoint with matching times")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("trajectory timestamps must strictly increase")
        if self.headings is not None:
            self.headings = np.asarray(self.headings, dtype=float)
            if len(self.headings) != len(self.times):
                raise ValueError("headings must parallel waypoints")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def position_at(self, t: float) -> np.ndarray:
        """Linearly interpolated position; clamps outside the time range."""
        x = np.interp(t, self.times, self.points[:, 0])
        y = np.interp(t, self.times, self.points[:, 1])
        return np.array([x, y])


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def to_ego_frame(points_world: np.ndarray, pose_xy: np.ndarray, heading: float) -> np.ndarray:
    """World points -> ego frame (x forward along heading, y to the left)."""
    d = np.atleast_2d(points_world) - np.asarray(pose_xy, dtype=float)
    c, s = math.cos(heading), math.sin(heading)
    fwd = d[:, 0] * c + d[:, 1] * s
    left = -d[:, 0] * s + d[:, 1] * c
    return np.stack([fwd, left], axis=1)


def to_world_frame(points_ego: np.ndarray, pose_xy: np.ndarray, heading: float) -> np.ndarray:
    """Ego-frame (forward, left) points -> world frame."""
    p = np.atleast_2d(points_ego)
    c, s = math.cos(heading), math.sin(heading)
    x = p[:, 0] * c - p[:, 1] * s
    y = p[:, 0] * s + p[:, 1] * c
    return np.stack([x, y], axis=1) + np.asarray(pose_xy, dtype=float)


def heading_difference(a: float, b: float) -> float:
    """Smallest signed difference a - b on the circle."""
    return wrap_angle(a - b)
