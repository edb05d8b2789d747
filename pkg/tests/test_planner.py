import math

import numpy as np
import pytest

from replaydrive.dataset import TrafficLog
from replaydrive.geometry import OrientedBox, Point2, boxes_overlap, project_to_path
from replaydrive.planner import (DEFAULT_ACCEL_SET, InfeasiblePlanError, PlanNode,
                                 PlannerConfig, PlanningContext, PlanResult, bin_key,
                                 plan, plan_from_state, step_node, to_world_trajectory,
                                 transition_cost)

from conftest import straight_log, straight_path, straight_track


def dp_oracle(start_s, start_v, path, log, t0, cfg, exclude=None):
    """Exhaustive binned dynamic programming over all action sequences:
    per time level, keep the cheapest node in each (s, v, t) bin."""
    ctx = PlanningContext(path, log, t0, cfg, exclude)
    root = PlanNode(s=start_s, v=start_v, t=0.0, g_cost=0.0)
    level = {bin_key(root, cfg): root}
    for _ in range(cfg.n_steps):
        nxt = {}
        for node in level.values():
            for a in cfg.accel_set:
                child = step_node(node, a, cfg.dt)
                cost = ctx.transition_cost(node, a, child)
                if math.isinf(cost):
                    continue
                child.g_cost = node.g_cost + cost
                key = bin_key(child, cfg)
                cur = nxt.get(key)
                if cur is None or child.g_cost < cur.g_cost:
                    nxt[key] = child
        if not nxt:
            return None
        level = nxt
    return min(n.g_cost for n in level.values())


def crossing_log(cross_time: float = 6.0, cross_x: float = 60.0,
                 crosser_speed: float = 6.0) -> TrafficLog:
    """Ego path along x; one replay vehicle crossing it at (cross_x, 0)."""
    frames = 160
    period = 0.1
    y0 = -cross_time * crosser_speed
    t = np.arange(frames) * period
    pos = np.stack([np.full(frames, cross_x), y0 + crosser_speed * t], axis=1)
    from conftest import make_track

    crosser = make_track(9, pos, np.full(frames, crosser_speed),
                         np.full(frames, math.pi / 2))
    ego = straight_track(0, x0=0.0, speed=8.0, frames=frames)
    return TrafficLog(tracks={0: ego, 9: crosser}, frame_period=period,
                      curbs=[], reference_paths=[straight_path(length=260.0)])


class TestStepNode:
    def test_paper_transition_example(self):
        n = PlanNode(s=0.0, v=10.0, t=0.0)
        out = step_node(n, 1.0, 0.1)
        assert out.s == pytest.approx(1.005, abs=1e-12)
        assert out.v == pytest.approx(10.1, abs=1e-12)
        assert out.t == pytest.approx(0.1, abs=1e-12)

    def test_zero_accel(self):
        out = step_node(PlanNode(s=3.0, v=7.0, t=0.5), 0.0, 0.5)
        assert out.s == 3.0 + 7.0 * 0.5
        assert out.v == 7.0

    def test_stop_clamp(self):
        out = step_node(PlanNode(s=0.0, v=0.2, t=0.0), -4.0, 0.1)
        assert out.v == 0.0
        assert out.s == pytest.approx(0.005, abs=1e-15)

    def test_randomized_arithmetic(self, rng):
        for _ in range(300):
            s, v, t = rng.uniform(0, 100), rng.uniform(0.5, 20), rng.uniform(0, 10)
            a = float(rng.choice(DEFAULT_ACCEL_SET))
            dt = float(rng.uniform(0.05, 1.0))
            out = step_node(PlanNode(s=s, v=v, t=t), a, dt)
            if v + a * dt >= 0:
                assert abs(out.s - (s + v * dt + 0.5 * a * dt * dt)) < 1e-12
                assert abs(out.v - (v + a * dt)) < 1e-12
            else:
                assert out.v == 0.0
                assert out.s >= s
            assert abs(out.t - (t + dt)) < 1e-12

    def test_s_never_decreases(self, rng):
        for _ in range(200):
            v = rng.uniform(0, 5)
            node = PlanNode(s=10.0, v=v, t=0.0)
            out = step_node(node, -4.0, 0.5)
            assert out.s >= node.s

    def test_default_accel_set(self):
        assert PlannerConfig().accel_set == (-4.0, -3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)


class TestTransitionCost:
    def test_zero_at_goal_speed_on_straight(self):
        log = straight_log(n_tracks=1, frames=20)
        path = log.reference_paths[0]
        cfg = PlannerConfig(v_goal=8.0)
        n = PlanNode(s=0.0, v=8.0, t=0.0)
        child = step_node(n, 0.0, cfg.dt)
        assert transition_cost(n, 0.0, child, path, log, cfg, t0=0.0,
                               exclude_track_id=0) == 0.0

    def test_pure_accel_term(self):
        log = straight_log(n_tracks=1, frames=20)
        path = log.reference_paths[0]
        cfg = PlannerConfig(w1=1.0, w2=0.0, w3=0.0, v_goal=8.0)
        n = PlanNode(s=0.0, v=8.0, t=0.0)
        child = step_node(n, 2.0, cfg.dt)
        assert transition_cost(n, 2.0, child, path, log, cfg,
                               exclude_track_id=0) == pytest.approx(4.0)

    def test_collision_is_infinite(self):
        log = straight_log(n_tracks=2, frames=50, gap=30.0)
        path = log.reference_paths[0]
        cfg = PlannerConfig()
        # place the next node right on top of replay vehicle 1 at t=0
        other_x = log.tracks[1].xy[0, 0]
        n = PlanNode(s=other_x - 4.0, v=8.0, t=-0.5)
        child = PlanNode(s=other_x, v=8.0, t=0.0, parent=n, accel_in=0.0)
        assert transition_cost(n, 0.0, child, path, log, cfg,
                               exclude_track_id=0) == math.inf

    def test_curvature_enters_as_absolute(self):
        ang = np.linspace(0.0, 1.2, 120)
        from replaydrive.geometry import ReferencePath

        left = ReferencePath.from_points(30.0 * np.stack([np.cos(ang), np.sin(ang)], axis=1))
        right = ReferencePath.from_points(
            30.0 * np.stack([np.cos(-ang), np.sin(-ang)], axis=1))
        log = straight_log(n_tracks=1, frames=10)
        cfg = PlannerConfig(w1=0.0, w2=1.0, w3=0.0, v_goal=8.0)
        n = PlanNode(s=5.0, v=8.0, t=0.0)
        child = step_node(n, 0.0, cfg.dt)
        cl = transition_cost(n, 0.0, child, left, log, cfg, exclude_track_id=0)
        cr = transition_cost(n, 0.0, child, right, log, cfg, exclude_track_id=0)
        assert cl > 0.0 and cr > 0.0
        assert cl == pytest.approx(cr, rel=1e-9)


class TestPlan:
    def test_zero_cost_optimum_on_empty_road(self):
        log = straight_log(n_tracks=1, frames=20)
        path = log.reference_paths[0]
        cfg = PlannerConfig(v_goal=8.0)
        result = plan(0.0, 8.0, path, log, t0=0.0, cfg=cfg, exclude_track_id=0)
        assert result.total_cost == 0.0
        assert result.accel_sequence() == [0.0] * cfg.n_steps

    def test_node_times_are_exact_multiples(self):
        log = straight_log(n_tracks=1, frames=20)
        cfg = PlannerConfig(v_goal=8.0)
        result = plan(0.0, 8.0, log.reference_paths[0], log, 0.0, cfg, exclude_track_id=0)
        for k, node in enumerate(result.nodes):
            assert node.t == k * cfg.dt

    def test_crossing_vehicle_slows_and_stays_safe(self):
        # a slow crosser blocks the conflict point exactly when the ego would
        # reach it at constant speed, and outrunning it is kinematically out
        # of reach, so the optimal plan has to give way
        log = crossing_log(cross_time=3.5, cross_x=40.0, crosser_speed=3.0)
        path = log.reference_paths[0]
        cfg = PlannerConfig(v_goal=8.0, safety_margin=0.3)
        result = plan(0.0, 8.0, path, log, t0=0.0, cfg=cfg, exclude_track_id=0)
        speeds = [n.v for n in result.nodes]
        assert min(speeds) < 8.0 - 0.25  # slowed before the conflict
        # zero footprint overlap at every dt sample
        for node in result.nodes:
            pose_s = min(node.s, path.total_length)
            from replaydrive.geometry import eval_path

            pose = eval_path(path, pose_s)
            ego = OrientedBox(pose.pos, pose.heading, cfg.ego_length, cfg.ego_width)
            box = log.tracks[9].box_at(node.t)
            if box is not None:
                assert not boxes_overlap(ego, box)

    def test_matches_dp_oracle_small_instances(self, rng):
        for trial in range(8):
            log = crossing_log(cross_time=rng.uniform(3.0, 7.0),
                               cross_x=rng.uniform(30.0, 70.0))
            path = log.reference_paths[0]
            cfg = PlannerConfig(dt=0.5, horizon=5.0, bin_s=2.0, bin_v=1.0, bin_t=0.5,
                                w1=rng.uniform(0.2, 2.0), w2=rng.uniform(0.2, 2.0),
                                w3=rng.uniform(0.2, 2.0), v_goal=rng.uniform(4.0, 10.0))
            v0 = rng.uniform(2.0, 10.0)
            expect = dp_oracle(5.0, v0, path, log, 0.0, cfg, exclude=0)
            result = plan(5.0, v0, path, log, 0.0, cfg, exclude_track_id=0)
            assert result.total_cost == expect

    def test_infeasible_when_fully_blocked(self):
        # a wall of stopped vehicles across every reachable s at every time
        frames = 100
        tracks = {0: straight_track(0, x0=0.0, speed=6.0, frames=frames)}
        from conftest import make_track

        for i, x in enumerate(np.arange(2.0, 80.0, 3.0)):
            pos = np.tile([x, 0.0], (frames, 1))
            tracks[i + 1] = make_track(i + 1, pos, np.zeros(frames), np.zeros(frames))
        log = TrafficLog(tracks=tracks, frame_period=0.1, curbs=[],
                         reference_paths=[straight_path()])
        cfg = PlannerConfig(v_goal=6.0)
        with pytest.raises(InfeasiblePlanError):
            plan(0.0, 6.0, log.reference_paths[0], log, 0.0, cfg, exclude_track_id=0)

    def test_cost_nonnegative_and_finite(self, rng):
        log = crossing_log()
        path = log.reference_paths[0]
        cfg = PlannerConfig(v_goal=7.0)
        result = plan(0.0, rng.uniform(2.0, 10.0), path, log, 0.0, cfg, exclude_track_id=0)
        assert result.total_cost >= 0.0
        g_prev = 0.0
        for node in result.nodes[1:]:
            assert node.g_cost >= g_prev  # per-transition cost >= 0
            g_prev = node.g_cost

    def test_debug_admissibility_check(self):
        log = straight_log(n_tracks=1, frames=20)
        cfg = PlannerConfig(v_goal=8.0, debug_check=True)
        result = plan(0.0, 5.0, log.reference_paths[0], log, 0.0, cfg, exclude_track_id=0)
        assert result.total_cost > 0.0

    def test_plan_from_state_projects(self):
        log = straight_log(n_tracks=1, frames=20)
        cfg = PlannerConfig(v_goal=8.0)
        result = plan_from_state(Point2(12.0, 0.7), 8.0, log.reference_paths[0],
                                 log, 0.0, cfg, exclude_track_id=0)
        assert result.nodes[0].s == pytest.approx(12.0)


class TestWorldTrajectory:
    def test_zero_accel_straight_equally_spaced(self):
        log = straight_log(n_tracks=1, frames=20)
        path = log.reference_paths[0]
        cfg = PlannerConfig(v_goal=8.0)
        result = plan(0.0, 8.0, path, log, 0.0, cfg, exclude_track_id=0)
        pts = result.trajectory.points
        steps = np.diff(pts, axis=0)
        assert np.allclose(steps[:, 0], 8.0 * cfg.dt, atol=1e-9)
        assert np.allclose(pts[:, 1], 0.0, atol=1e-12)

    def test_single_node(self):
        path = straight_path()
        traj = to_world_trajectory([PlanNode(s=5.0, v=3.0, t=0.0)], path, t0=2.0)
        assert len(traj) == 1
        assert traj.points[0, 0] == pytest.approx(5.0)
        assert traj.times[0] == 2.0

    def test_projection_round_trip(self):
        log = crossing_log()
        path = log.reference_paths[0]
        cfg = PlannerConfig(v_goal=8.0)
        result = plan(0.0, 8.0, path, log, 0.0, cfg, exclude_track_id=0)
        for node, p in zip(result.nodes, result.trajectory.points):
            s_expected = min(node.s, path.total_length)
            assert abs(project_to_path(p, path).s - s_expected) <= cfg.bin_s

    def test_trajectory_length_contract(self):
        log = straight_log(n_tracks=1, frames=20)
        cfg = PlannerConfig(v_goal=8.0)
        result = plan(0.0, 8.0, log.reference_paths[0], log, 0.0, cfg, exclude_track_id=0)
        assert len(result.trajectory) == cfg.n_steps + 1

    def test_json_round_trip(self):
        log = straight_log(n_tracks=1, frames=20)
        cfg = PlannerConfig(v_goal=8.0)
        result = plan(0.0, 6.0, log.reference_paths[0], log, 0.0, cfg, exclude_track_id=0)
        import json

        again = PlanResult.from_json_dict(json.loads(result.to_json()))
        assert again.total_cost == result.total_cost
        assert [n.s for n in again.nodes] == [n.s for n in result.nodes]
        assert np.array_equal(again.trajectory.points, result.trajectory.points)


class TestPlannerConfigValidation:
    def test_horizon_must_be_multiple_of_dt(self):
        with pytest.raises(ValueError):
            PlannerConfig(dt=0.5, horizon=8.3)

    def test_weights_nonnegative(self):
        with pytest.raises(ValueError):
            PlannerConfig(w1=-1.0)

    def test_empty_accel_set(self):
        with pytest.raises(ValueError):
            PlannerConfig(accel_set=())
