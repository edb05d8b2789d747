"""Trajectory refiners.

``blend_to_ego`` translates a rough on-path trajectory so it starts at the
ego's actual pose and eases back onto the path, keeping the refined heading
within a configured bound of the rough heading at every step.

``qp_smooth`` solves a small unconstrained least-squares problem over the
waypoint coordinates: stay close to the raw prediction while minimizing the
variation of velocity (second differences) and curvature (third differences),
with the current position as a hard anchor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ReferencePath, project_to_path, wrap_angle
from .motion import EgoState, Trajectory, to_world_frame

ZERO_SNAP = 1e-6  # meters; lateral offsets below this count as "on the path"


class BlendInfeasibleError(RuntimeError):
    """No offset schedule satisfies the heading bound within the trajectory."""


@dataclass(frozen=True)
class RefineConfig:
    max_heading_dev: float = math.radians(20.0)
    alpha_fidelity: float = 1.0
    alpha_vel_var: float = 5.0
    alpha_curv_var: float = 5.0
    # When False, difference penalties that span the fixed anchor point are
    # dropped and only fully-free stencils are penalized.
    anchor_diffs: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.max_heading_dev < 0.5 * math.pi:
            raise ValueError("max_heading_dev must be in (0, pi/2)")
        if self.alpha_fidelity <= 0.0 or min(self.alpha_vel_var, self.alpha_curv_var) < 0.0:
            raise ValueError("alpha_fidelity must be > 0 and variation weights >= 0")


def _local_headings(points: np.ndarray, headings) -> np.ndarray:
    """Per-waypoint headings: provided ones, else outgoing segment directions."""
    if headings is not None:
        return np.asarray(headings, dtype=float)
    d = np.diff(points, axis=0)
    out = np.empty(len(points))
    last = 0.0
    for i in range(len(d)):
        if abs(d[i, 0]) > 1e-12 or abs(d[i, 1]) > 1e-12:
            last = math.atan2(d[i, 1], d[i, 0])
        out[i] = last
    out[-1] = last
    return out


def _offsets_schedule(d0: float, rho: float, n: int) -> np.ndarray:
    """Exponentially decaying offsets, snapped to exactly 0 once negligible."""
    out = np.empty(n)
    d = d0
    for k in range(n):
        out[k] = d
        d *= rho
        if abs(d) < ZERO_SNAP:
            d = 0.0
    return out


def _max_heading_dev(points: np.ndarray, refined: np.ndarray) -> float:
    dev = 0.0
    for k in range(len(points) - 1):
        rough_seg = points[k + 1] - points[k]
        ref_seg = refined[k + 1] - refined[k]
        if (abs(rough_seg[0]) < 1e-12 and abs(rough_seg[1]) < 1e-12) or \
           (abs(ref_seg[0]) < 1e-12 and abs(ref_seg[1]) < 1e-12):
            continue
        ang = wrap_angle(math.atan2(ref_seg[1], ref_seg[0]) - math.atan2(rough_seg[1], rough_seg[0]))
        dev = max(dev, abs(ang))
    return dev


def blend_to_ego(rough: Trajectory, ego: EgoState, path: ReferencePath,
                 cfg: RefineConfig) -> Trajectory:
    """Move each rough waypoint along its local normal so the trajectory
    starts at the ego and decays back onto the path.

    The offset schedule is exponential decay from the ego's signed lateral
    offset; the decay rate is the fastest one whose induced heading never
    deviates from the rough heading by more than ``cfg.max_heading_dev``.
    Raises :class:`BlendInfeasibleError` when no rate both satisfies the
    bound and returns to the path within the trajectory length.
    """
    d0 = project_to_path(ego.pos, path).lateral_offset
    points = rough.points
    if abs(d0) < ZERO_SNAP:
        return Trajectory(times=rough.times.copy(), points=points.copy(),
                          headings=None if rough.headings is None else rough.headings.copy())

    headings = _local_headings(points, rough.headings)
    normals = np.stack([-np.sin(headings), np.cos(headings)], axis=1)
    n = len(points)

    def build(rho: float):
        d = _offsets_schedule(d0, rho, n)
        return d, points + d[:, None] * normals

    def heading_ok(rho: float) -> bool:
        _, refined = build(rho)
        return _max_heading_dev(points, refined) <= cfg.max_heading_dev + 1e-12

    # The heading bound favors slow decay (large rho), returning to the path
    # favors fast decay (small rho). Find the smallest decay rate satisfying
    # the heading bound, then require that it still reaches zero in time.
    ladder = (1e-9, 0.03, 0.1, 0.3, 0.5, 0.7, 0.85, 0.95, 0.99, 0.999, 0.9999)
    lo, hi = None, None
    for probe in ladder:
        if heading_ok(probe):
            hi = probe
            break
        lo = probe
    if hi is None:
        raise BlendInfeasibleError(
            f"offset {d0:.3f} m violates the "
            f"{math.degrees(cfg.max_heading_dev):.1f} deg heading bound at any decay rate")
    if lo is not None:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if heading_ok(mid):
                hi = mid
            else:
                lo = mid
    d, refined = build(hi)
    if _max_heading_dev(points, refined) > cfg.max_heading_dev + 1e-9 or d[-1] != 0.0:
        raise BlendInfeasibleError(
            f"offset {d0:.3f} m cannot rejoin the path within {n} waypoints "
            f"under a {math.degrees(cfg.max_heading_dev):.1f} deg heading bound")
    return Trajectory(times=rough.times.copy(), points=refined, headings=None)


_QP_CACHE: dict = {}


def _difference_matrix(n_points: int, order: int) -> np.ndarray:
    """Rows of the order-2 or order-3 finite difference operator."""
    coeffs = {2: (1.0, -2.0, 1.0), 3: (-1.0, 3.0, -3.0, 1.0)}[order]
    rows = n_points - order
    m = np.zeros((max(rows, 0), n_points))
    for r in range(rows):
        m[r, r:r + order + 1] = coeffs
    return m


def _qp_system(n: int, cfg: RefineConfig):
    """Factorized normal-equation solve for n free waypoints plus the anchor."""
    key = (n, cfg.alpha_fidelity, cfg.alpha_vel_var, cfg.alpha_curv_var, cfg.anchor_diffs)
    cached = _QP_CACHE.get(key)
    if cached is not None:
        return cached
    total = n + 1
    d2 = _difference_matrix(total, 2)
    d3 = _difference_matrix(total, 3)
    if not cfg.anchor_diffs:
        d2 = d2[1:] if len(d2) > 0 else d2
        d3 = d3[1:] if len(d3) > 0 else d3
    m = cfg.alpha_fidelity * np.eye(n)
    m += cfg.alpha_vel_var * d2[:, 1:].T @ d2[:, 1:]
    m += cfg.alpha_curv_var * d3[:, 1:].T @ d3[:, 1:]
    m_inv = np.linalg.inv(m)
    cached = (m_inv, d2, d3)
    _QP_CACHE[key] = cached
    return cached


def qp_objective(points: np.ndarray, raw_points: np.ndarray, cfg: RefineConfig) -> float:
    """The smoothing objective at a candidate waypoint sequence.

    ``points`` and ``raw_points`` both include the anchor at index 0.
    """
    n = len(points) - 1
    _, d2, d3 = _qp_system(n, cfg)
    fid = cfg.alpha_fidelity * float(np.sum((points[1:] - raw_points[1:]) ** 2))
    vel = cfg.alpha_vel_var * float(np.sum((d2 @ points) ** 2))
    curv = cfg.alpha_curv_var * float(np.sum((d3 @ points) ** 2))
    return fid + vel + curv


def qp_smooth(raw_offsets: np.ndarray, current: EgoState, cfg: RefineConfig,
              period: float) -> Trajectory:
    """Exact minimizer of the anchored smoothing objective.

    ``raw_offsets`` are the policy's n relative waypoint displacements in the
    ego frame (x right, y forward); the output trajectory starts at the
    current position (hard anchor) with waypoints every ``period`` seconds.
    """
    raw_offsets = np.asarray(raw_offsets, dtype=float).reshape(-1, 2)
    n = len(raw_offsets)
    if n < 3:
        raise ValueError("qp_smooth needs at least 3 waypoints")
    anchor = current.pos.as_array()
    fwd_left = np.stack([raw_offsets[:, 1], -raw_offsets[:, 0]], axis=1)
    raw_world = to_world_frame(fwd_left, anchor, current.heading)

    m_inv, d2, d3 = _qp_system(n, cfg)
    solution = np.empty((n, 2))
    for axis in range(2):
        x0 = anchor[axis]
        rhs = cfg.alpha_fidelity * raw_world[:, axis]
        rhs -= cfg.alpha_vel_var * (d2[:, 1:].T @ (d2[:, 0] * x0))
        rhs -= cfg.alpha_curv_var * (d3[:, 1:].T @ (d3[:, 0] * x0))
        solution[:, axis] = m_inv @ rhs
    times = current.t + period * np.arange(n + 1)
    points = np.vstack([anchor, solution])
    return Trajectory(times=times, points=points)
