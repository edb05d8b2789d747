"""Shared fixtures: hand-built straight-road logs and synthetic scenes."""
from __future__ import annotations

import math

import numpy as np
import pytest

from replaydrive.dataset import TrafficLog, VehicleTrack
from replaydrive.geometry import ReferencePath


def straight_path(length: float = 200.0, step: float = 1.0, y: float = 0.0,
                  path_id: str = "straight") -> ReferencePath:
    n = int(length / step) + 1
    xs = np.linspace(0.0, length, n)
    pts = np.stack([xs, np.full(n, y)], axis=1)
    return ReferencePath.from_points(pts, path_id=path_id)


def make_track(track_id: int, positions: np.ndarray, speeds: np.ndarray,
               headings: np.ndarray, entry_frame: int = 0, frame_period: float = 0.1,
               length: float = 4.5, width: float = 1.8) -> VehicleTrack:
    period_ms = int(round(frame_period * 1000))
    n = len(positions)
    times_ms = entry_frame * period_ms + period_ms * np.arange(n)
    vel = np.asarray(speeds)[:, None] * np.stack(
        [np.cos(headings), np.sin(headings)], axis=1)
    return VehicleTrack(track_id=track_id, times=times_ms / 1000.0,
                        xy=np.asarray(positions, dtype=float), vel=vel,
                        heading=np.asarray(headings, dtype=float),
                        length=length, width=width)


def straight_track(track_id: int, x0: float, speed: float, frames: int,
                   y: float = 0.0, entry_frame: int = 0,
                   frame_period: float = 0.1) -> VehicleTrack:
    t = np.arange(frames) * frame_period
    pos = np.stack([x0 + speed * t, np.full(frames, y)], axis=1)
    return make_track(track_id, pos, np.full(frames, speed), np.zeros(frames),
                      entry_frame=entry_frame, frame_period=frame_period)


def straight_log(n_tracks: int = 2, frames: int = 120, speed: float = 8.0,
                 gap: float = 40.0, curb_y: float = 4.0,
                 length: float = 260.0) -> TrafficLog:
    """Vehicles in a row on a straight road with curbs at +-curb_y."""
    tracks = {tid: straight_track(tid, x0=10.0 + gap * tid, speed=speed, frames=frames)
              for tid in range(n_tracks)}
    curbs = [np.array([[-20.0, curb_y], [length, curb_y]]),
             np.array([[-20.0, -curb_y], [length, -curb_y]])]
    return TrafficLog(tracks=tracks, frame_period=0.1, curbs=curbs,
                      reference_paths=[straight_path(length=length)])


def ego_only_log(frames: int = 200, speed: float = 8.0, curb_y: float = 6.0) -> TrafficLog:
    """A single (ego) track: replay traffic is empty once the ego is excluded."""
    return straight_log(n_tracks=1, frames=frames, speed=speed, curb_y=curb_y)


@pytest.fixture(scope="session")
def roundabout_log():
    from replaydrive.dataset import make_synthetic_scenario

    return make_synthetic_scenario("roundabout", 8, seed=7)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
