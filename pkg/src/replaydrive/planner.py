"""Pseudo-expert trajectory planner.

Best-first search over (arc-length, speed, time) nodes along a reference
path. Transitions are a discrete set of tangent accelerations applied over a
fixed time step; the transition cost penalizes acceleration, centripetal
acceleration, and deviation from a goal speed, and is infinite when the ego
footprint at the new node overlaps any replayed vehicle. The search space is
binned into uniform (s, v, t) cells and the first expansion in a cell wins.
"""
from __future__ import annotations

import bisect
import heapq
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import TrafficLog
from .geometry import ReferencePath, corners_overlap, eval_path
from .motion import Trajectory

DEFAULT_ACCEL_SET = (-4.0, -3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)

_BIN_EPS = 1e-9


class InfeasiblePlanError(RuntimeError):
    """No node reaches the planning horizon (all corridors blocked)."""


@dataclass(frozen=True)
class PlannerConfig:
    accel_set: tuple = DEFAULT_ACCEL_SET
    dt: float = 0.5
    w1: float = 1.0  # tangent acceleration weight
    w2: float = 2.0  # centripetal (curvature * v^2) weight
    w3: float = 0.5  # goal-speed deviation weight
    v_goal: float = 8.0
    horizon: float = 8.0
    bin_s: float = 0.5
    bin_v: float = 0.25
    bin_t: float = 0.5
    ego_length: float = 4.5
    ego_width: float = 1.8
    safety_margin: float = 0.3
    heuristic_eps: float = 0.0  # > 0 enables the inadmissible speed-up heuristic
    max_expansions: int = 500_000
    debug_check: bool = False

    def __post_init__(self) -> None:
        if not self.accel_set:
            raise ValueError("accel_set must be non-empty")
        if self.dt <= 0.0 or self.bin_s <= 0.0 or self.bin_v <= 0.0 or self.bin_t <= 0.0:
            raise ValueError("dt and bin sizes must be positive")
        if min(self.w1, self.w2, self.w3) < 0.0:
            raise ValueError("cost weights must be >= 0")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9 or steps < 1:
            raise ValueError("horizon must be a positive multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(eq=False)
class PlanNode:
    """Search node: position along the path, speed, and relative time."""

    s: float
    v: float
    t: float
    parent: Optional["PlanNode"] = None
    accel_in: Optional[float] = None
    g_cost: float = 0.0


def step_node(n: PlanNode, a: float, dt: float) -> PlanNode:
    """Kinematic transition (s + v dt + a dt^2 / 2, v + a dt, t + dt).

    A transition that would cross zero speed is clamped to a stop within the
    step: v becomes 0 and s advances by the stopping distance v^2 / (2|a|).
    """
    v_next = n.v + a * dt
    if v_next < 0.0:
        s_next = n.s + (n.v * n.v) / (2.0 * abs(a))
        v_next = 0.0
    else:
        s_next = n.s + n.v * dt + 0.5 * a * dt * dt
    return PlanNode(s=s_next, v=v_next, t=n.t + dt, parent=n, accel_in=a)


def bin_key(node: PlanNode, cfg: PlannerConfig) -> tuple:
    """Uniform (s, v, t) cell identity used for node deduplication."""
    return (math.floor(node.s / cfg.bin_s + _BIN_EPS),
            math.floor(node.v / cfg.bin_v + _BIN_EPS),
            math.floor(node.t / cfg.bin_t + _BIN_EPS))


class PlanningContext:
    """Pre-resolved collision world and cost evaluator for one planning call.

    Path geometry is unpacked into scalar lists and replay footprints are
    cached per time slice so repeated cost evaluations stay cheap; the
    arithmetic matches :func:`geometry.eval_path` exactly.
    """

    def __init__(self, path: ReferencePath, log: TrafficLog, t0: float, cfg: PlannerConfig,
                 exclude_track_id: Optional[int] = None):
        self.path = path
        self.log = log
        self.t0 = t0
        self.cfg = cfg
        self.exclude_track_id = exclude_track_id
        self._slices: dict[int, list] = {}
        self._cum = path.cum_s.tolist()
        self._xs = path.points[:, 0].tolist()
        self._ys = path.points[:, 1].tolist()
        self._kap = path.curvature.tolist()
        self._total = path.total_length
        d = np.diff(path.points, axis=0)
        self._head = np.arctan2(d[:, 1], d[:, 0]).tolist()
        self._half_l = 0.5 * (cfg.ego_length + 2.0 * cfg.safety_margin)
        self._half_w = 0.5 * (cfg.ego_width + 2.0 * cfg.safety_margin)
        self._ego_radius = math.hypot(self._half_l, self._half_w)

    def _seg(self, s: float) -> int:
        i = bisect.bisect_right(self._cum, s) - 1
        return min(max(i, 0), len(self._cum) - 2)

    def _kappa_at(self, s: float) -> float:
        i = self._seg(s)
        frac = (s - self._cum[i]) / (self._cum[i + 1] - self._cum[i])
        return self._kap[i] + frac * (self._kap[i + 1] - self._kap[i])

    def _slice(self, node_t: float) -> list:
        key = int(round(node_t / self.cfg.dt))
        boxes = self._slices.get(key)
        if boxes is None:
            boxes = []
            t_world = self.t0 + node_t
            for tid in sorted(self.log.tracks):
                if tid == self.exclude_track_id:
                    continue
                box = self.log.tracks[tid].box_at(t_world)
                if box is not None:
                    corners = tuple((float(x), float(y)) for x, y in box.corners())
                    boxes.append((box.center.x, box.center.y, box.radius, corners))
            self._slices[key] = boxes
        return boxes

    def collides(self, s: float, node_t: float) -> bool:
        boxes = self._slice(node_t)
        if not boxes:
            return False
        s_cl = min(max(s, 0.0), self._total)
        i = self._seg(s_cl)
        frac = (s_cl - self._cum[i]) / (self._cum[i + 1] - self._cum[i])
        ex = self._xs[i] + frac * (self._xs[i + 1] - self._xs[i])
        ey = self._ys[i] + frac * (self._ys[i + 1] - self._ys[i])
        er = self._ego_radius
        ego_corners = None
        for (bx, by, br, corners) in boxes:
            dx, dy = bx - ex, by - ey
            if dx * dx + dy * dy > (er + br) ** 2:
                continue
            if ego_corners is None:
                c = math.cos(self._head[i])
                sn = math.sin(self._head[i])
                hl, hw = self._half_l, self._half_w
                ego_corners = ((ex + c * hl - sn * hw, ey + sn * hl + c * hw),
                               (ex - c * hl - sn * hw, ey - sn * hl + c * hw),
                               (ex - c * hl + sn * hw, ey - sn * hl - c * hw),
                               (ex + c * hl + sn * hw, ey + sn * hl - c * hw))
            if corners_overlap(ego_corners, corners):
                return True
        return False

    def transition_cost(self, n: PlanNode, a: float, n_next: PlanNode) -> float:
        cfg = self.cfg
        s_eval = min(max(n_next.s, 0.0), self._total)
        kappa = self._kappa_at(s_eval)
        cost = (cfg.w1 * a * a
                + cfg.w2 * abs(kappa) * n_next.v * n_next.v
                + cfg.w3 * (n_next.v - cfg.v_goal) ** 2)
        if self.collides(n_next.s, n_next.t):
            return math.inf
        return cost


def transition_cost(n: PlanNode, a: float, n_next: PlanNode, path: ReferencePath,
                    log: TrafficLog, cfg: PlannerConfig, t0: float = 0.0,
                    exclude_track_id: Optional[int] = None) -> float:
    """Four-term transition cost; +inf when the new node collides.

    Curvature is evaluated at the new node's arc length (clamped to the path
    end) and enters as an absolute value so both turning directions penalize
    equally.
    """
    ctx = PlanningContext(path, log, t0, cfg, exclude_track_id)
    return ctx.transition_cost(n, a, n_next)


@dataclass(eq=False)
class PlanResult:
    nodes: list  # root-to-leaf PlanNode chain
    trajectory: Trajectory
    total_cost: float

    def accel_sequence(self) -> list:
        return [n.accel_in for n in self.nodes[1:]]

    def to_json_dict(self) -> dict:
        return {
            "total_cost": self.total_cost,
            "nodes": [{"s": n.s, "v": n.v, "t": n.t, "accel_in": n.accel_in,
                       "g_cost": n.g_cost} for n in self.nodes],
            "trajectory": {
                "times": [float(t) for t in self.trajectory.times],
                "points": [[float(x), float(y)] for x, y in self.trajectory.points],
                "headings": [float(h) for h in self.trajectory.headings],
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, d: dict) -> "PlanResult":
        nodes = []
        prev = None
        for nd in d["nodes"]:
            node = PlanNode(s=nd["s"], v=nd["v"], t=nd["t"], parent=prev,
                            accel_in=nd["accel_in"], g_cost=nd["g_cost"])
            nodes.append(node)
            prev = node
        traj = d["trajectory"]
        trajectory = Trajectory(times=np.array(traj["times"]),
                                points=np.array(traj["points"]),
                                headings=np.array(traj["headings"]))
        return cls(nodes=nodes, trajectory=trajectory, total_cost=d["total_cost"])


def to_world_trajectory(nodes: list, path: ReferencePath, t0: float) -> Trajectory:
    """Realize a node chain as world-frame waypoints on the reference path."""
    times = np.array([t0 + n.t for n in nodes])
    points = np.empty((len(nodes), 2))
    headings = np.empty(len(nodes))
    for i, n in enumerate(nodes):
        pose = eval_path(path, min(max(n.s, 0.0), path.total_length))
        points[i] = (pose.pos.x, pose.pos.y)
        headings[i] = pose.heading
    return Trajectory(times=times, points=points, headings=headings)


def plan(start_s: float, start_v: float, path: ReferencePath, log: TrafficLog,
         t0: float, cfg: PlannerConfig,
         exclude_track_id: Optional[int] = None) -> PlanResult:
    """Best-first search to the planning horizon.

    Nodes are deduplicated by their (s, v, t) bin: the first expansion in a
    bin wins and later arrivals are discarded. With the default zero
    heuristic this is Dijkstra over the binned graph, so the first
    horizon-level node popped carries the minimum reachable cost.
    """
    if not 0.0 <= start_s <= path.total_length:
        raise ValueError(f"start_s={start_s} outside path [0, {path.total_length}]")
    ctx = PlanningContext(path, log, t0, cfg, exclude_track_id)
    n_steps = cfg.n_steps
    eps = cfg.heuristic_eps
    w3 = cfg.w3

    root = PlanNode(s=start_s, v=max(start_v, 0.0), t=0.0, g_cost=0.0)
    counter = 0
    heap = [(0.0, counter, 0, root)]
    closed: set = set()
    expansions = 0
    goal = None
    while heap:
        _, _, level, node = heapq.heappop(heap)
        key = bin_key(node, cfg)
        if key in closed:
            continue
        closed.add(key)
        if level == n_steps:
            goal = node
            break
        expansions += 1
        if expansions > cfg.max_expansions:
            raise InfeasiblePlanError(
                f"search exceeded {cfg.max_expansions} expansions without reaching the horizon")
        remaining = n_steps - level - 1
        for a in cfg.accel_set:
            child = step_node(node, a, cfg.dt)
            cost = ctx.transition_cost(node, a, child)
            if math.isinf(cost):
                continue
            child.g_cost = node.g_cost + cost
            h = eps * w3 * (child.v - cfg.v_goal) ** 2 * remaining if eps > 0.0 else 0.0
            counter += 1
            heapq.heappush(heap, (child.g_cost + h, counter, level + 1, child))
    if goal is None:
        raise InfeasiblePlanError("no node reaches the planning horizon")

    chain = []
    node = goal
    while node is not None:
        chain.append(node)
        node = node.parent
    chain.reverse()
    if cfg.debug_check and eps == 0.0:
        for n in chain:
            assert goal.g_cost + 1e-9 >= n.g_cost, "inadmissible heuristic behavior"
    return PlanResult(nodes=chain, trajectory=to_world_trajectory(chain, path, t0),
                      total_cost=goal.g_cost)


def plan_from_state(pos, speed: float, path: ReferencePath, log: TrafficLog, t0: float,
                    cfg: PlannerConfig, exclude_track_id: Optional[int] = None) -> PlanResult:
    """Project a world pose onto the path and plan from there."""
    from .geometry import project_to_path

    proj = project_to_path(pos, path)
    return plan(proj.s, max(speed, 0.0), path, log, t0, cfg, exclude_track_id)
