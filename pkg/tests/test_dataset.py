import logging
import math

import numpy as np
import pytest

from replaydrive.dataset import (EpisodeSpec, ParseError, ScenarioParams, TrafficLog,
                                 ValidationError, enumerate_episodes, load_log,
                                 make_synthetic_scenario, state_at, write_log)
from replaydrive.geometry import OrientedBox, Point2, boxes_overlap

from conftest import straight_log, straight_track


def _logs_equal(a: TrafficLog, b: TrafficLog) -> bool:
    if sorted(a.tracks) != sorted(b.tracks):
        return False
    for tid in a.tracks:
        ta, tb = a.tracks[tid], b.tracks[tid]
        if not (np.array_equal(ta.times, tb.times) and np.array_equal(ta.xy, tb.xy)
                and np.array_equal(ta.vel, tb.vel)
                and np.array_equal(ta.heading, tb.heading)
                and ta.length == tb.length and ta.width == tb.width):
            return False
    if a.frame_period != b.frame_period or len(a.curbs) != len(b.curbs):
        return False
    if any(not np.array_equal(ca, cb) for ca, cb in zip(a.curbs, b.curbs)):
        return False
    if len(a.reference_paths) != len(b.reference_paths):
        return False
    return all(pa.path_id == pb.path_id and np.array_equal(pa.points, pb.points)
               for pa, pb in zip(a.reference_paths, b.reference_paths))


class TestLogIO:
    def test_round_trip_exact(self, tmp_path):
        log = straight_log(n_tracks=3)
        write_log(log, tmp_path / "tracks.csv", tmp_path / "map.json")
        again = load_log(tmp_path / "tracks.csv", tmp_path / "map.json")
        assert _logs_equal(log, again)

    def test_round_trip_synthetic(self, tmp_path, roundabout_log):
        write_log(roundabout_log, tmp_path / "t.csv", tmp_path / "m.json")
        again = load_log(tmp_path / "t.csv", tmp_path / "m.json")
        assert _logs_equal(roundabout_log, again)

    def test_decreasing_timestamps_rejected(self, tmp_path):
        (tmp_path / "map.json").write_text(
            '{"curbs": [], "reference_paths": [{"id": "p", '
            '"points": [[0,0],[5,0],[10,0]]}]}')
        rows = ["track_id,frame_id,timestamp_ms,x,y,vx,vy,psi_rad,length,width",
                "7,0,1000,0,0,1,0,0,4,2",
                "7,1,900,1,0,1,0,0,4,2"]
        (tmp_path / "tracks.csv").write_text("\n".join(rows) + "\n")
        with pytest.raises(ValidationError, match="7"):
            load_log(tmp_path / "tracks.csv", tmp_path / "map.json")

    def test_empty_tracks_file(self, tmp_path):
        (tmp_path / "map.json").write_text('{"curbs": [], "reference_paths": []}')
        (tmp_path / "tracks.csv").write_text(
            "track_id,frame_id,timestamp_ms,x,y,vx,vy,psi_rad,length,width\n")
        with pytest.raises(ValidationError, match="no tracks"):
            load_log(tmp_path / "tracks.csv", tmp_path / "map.json")

    def test_malformed_row_names_line(self, tmp_path):
        (tmp_path / "map.json").write_text('{"curbs": [], "reference_paths": []}')
        rows = ["track_id,frame_id,timestamp_ms,x,y,vx,vy,psi_rad,length,width",
                "1,0,0,0,0,1,0,0,4,2",
                "1,1,100,oops,0,1,0,0,4,2"]
        (tmp_path / "tracks.csv").write_text("\n".join(rows) + "\n")
        with pytest.raises(ParseError, match=":3"):
            load_log(tmp_path / "tracks.csv", tmp_path / "map.json")

    def test_unknown_column_warns_not_fatal(self, tmp_path, caplog):
        (tmp_path / "map.json").write_text(
            '{"curbs": [], "reference_paths": [{"id": "p", '
            '"points": [[0,0],[5,0],[10,0]]}]}')
        rows = ["track_id,frame_id,timestamp_ms,x,y,vx,vy,psi_rad,length,width,extra",
                "1,0,0,0,0,1,0,0,4,2,9",
                "1,1,100,0.1,0,1,0,0,4,2,9"]
        (tmp_path / "tracks.csv").write_text("\n".join(rows) + "\n")
        with caplog.at_level(logging.WARNING):
            log = load_log(tmp_path / "tracks.csv", tmp_path / "map.json")
        assert 1 in log.tracks
        assert any("unknown columns" in r.message for r in caplog.records)

    def test_unknown_map_key_warns(self, tmp_path, caplog):
        (tmp_path / "map.json").write_text(
            '{"curbs": [], "reference_paths": [{"id": "p", '
            '"points": [[0,0],[5,0],[10,0]]}], "mystery": 1}')
        rows = ["track_id,frame_id,timestamp_ms,x,y,vx,vy,psi_rad,length,width",
                "1,0,0,0,0,1,0,0,4,2",
                "1,1,100,0.1,0,1,0,0,4,2"]
        (tmp_path / "tracks.csv").write_text("\n".join(rows) + "\n")
        with caplog.at_level(logging.WARNING):
            load_log(tmp_path / "tracks.csv", tmp_path / "map.json")
        assert any("unknown keys" in r.message for r in caplog.records)


class TestStateAt:
    def test_exact_frame_reproduces_logged_row(self):
        track = straight_track(0, x0=3.0, speed=7.0, frames=50)
        for k in (0, 13, 49):
            st = state_at(track, float(track.times[k]))
            assert st.pos.x == track.xy[k, 0] and st.pos.y == track.xy[k, 1]
            assert st.heading == track.heading[k]
            assert st.speed == math.hypot(track.vel[k, 0], track.vel[k, 1])

    def test_midpoint_interpolation(self):
        pos = np.array([[0.0, 0.0], [1.0, 0.0]])
        track_times = None
        track = straight_track(0, x0=0.0, speed=10.0, frames=2)
        st = state_at(track, 0.05)
        assert st.pos.x == pytest.approx(0.5)
        assert st.pos.y == 0.0

    def test_outside_interval_absent(self):
        track = straight_track(0, x0=0.0, speed=5.0, frames=10, entry_frame=50)
        assert state_at(track, 0.0) is None
        assert state_at(track, float(track.times[-1]) + 0.01) is None

    def test_continuity(self):
        track = straight_track(0, x0=0.0, speed=9.0, frames=100)
        eps = 1e-6
        for t in (0.31, 2.57, 7.0):
            a = state_at(track, t)
            b = state_at(track, t + eps)
            assert abs(a.pos.x - b.pos.x) < 1e-4
            assert abs(a.speed - b.speed) < 1e-4
            assert abs(a.heading - b.heading) < 1e-4

    def test_heading_interpolates_on_circle(self):
        positions = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        headings = np.array([math.pi - 0.1, -math.pi + 0.1, math.pi - 0.1])
        track = straight_track(0, 0.0, 1.0, 3)
        track = type(track)(track_id=0, times=track.times, xy=positions,
                            vel=track.vel, heading=headings, length=4.0, width=2.0)
        st = track.state_at(0.05)
        assert abs(abs(st.heading) - math.pi) < 0.2  # wraps through pi, not through 0


class TestEnumerateEpisodes:
    def test_counting_with_stride(self):
        log = straight_log(n_tracks=1, frames=100)
        specs = enumerate_episodes(log, stride_frames=50, min_remaining=40)
        assert [(s.ego_track_id, s.start_frame) for s in specs] == [(0, 0), (0, 50)]

    def test_min_remaining_filters_all(self):
        log = straight_log(n_tracks=1, frames=100)
        assert enumerate_episodes(log, 10, min_remaining=1000) == []

    def test_brute_force_count(self):
        log = straight_log(n_tracks=3, frames=77)
        specs = enumerate_episodes(log, stride_frames=1, min_remaining=30)
        expect = sum(1 for tid in log.tracks
                     for f in range(log.tracks[tid].frame_count)
                     if log.tracks[tid].frame_count - 1 - f >= 30)
        assert len(specs) == expect

    def test_deterministic_order(self):
        log = straight_log(n_tracks=3, frames=60)
        a = enumerate_episodes(log, 7, 20)
        b = enumerate_episodes(log, 7, 20)
        assert [(s.ego_track_id, s.start_frame) for s in a] == \
               [(s.ego_track_id, s.start_frame) for s in b]

    def test_horizon_slack(self):
        log = straight_log(n_tracks=1, frames=100)
        specs = enumerate_episodes(log, 50, 40, horizon_slack_frames=25)
        assert specs[0].horizon_frames == 99 + 25

    def test_spec_validation(self):
        log = straight_log(n_tracks=1, frames=20)
        with pytest.raises(ValidationError):
            EpisodeSpec(log=log, ego_track_id=5, start_frame=0, horizon_frames=10,
                        path_id="straight")
        with pytest.raises(ValidationError):
            EpisodeSpec(log=log, ego_track_id=0, start_frame=50, horizon_frames=10,
                        path_id="straight")


def _all_pairs_collision_free(log: TrafficLog) -> bool:
    ids = sorted(log.tracks)
    for i in range(len(ids)):
        a = log.tracks[ids[i]]
        for j in range(i + 1, len(ids)):
            b = log.tracks[ids[j]]
            for k in range(a.frame_count):
                t = float(a.times[k])
                stb = b.state_at(t)
                if stb is None:
                    continue
                sta = a.state_at_frame(k)
                box_a = OrientedBox(sta.pos, sta.heading, a.length, a.width)
                box_b = OrientedBox(stb.pos, stb.heading, b.length, b.width)
                if boxes_overlap(box_a, box_b):
                    return False
    return True


class TestSyntheticScenarios:
    def test_same_seed_identical_bytes(self, tmp_path):
        for kind in ("roundabout", "intersection", "merging"):
            a = make_synthetic_scenario(kind, 4, seed=11)
            b = make_synthetic_scenario(kind, 4, seed=11)
            write_log(a, tmp_path / "a.csv", tmp_path / "a.json")
            write_log(b, tmp_path / "b.csv", tmp_path / "b.json")
            assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
            assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_single_vehicle_trivially_safe(self):
        log = make_synthetic_scenario("intersection", 1, seed=3)
        assert _all_pairs_collision_free(log)

    def test_replay_is_collision_free_every_frame(self, roundabout_log):
        assert _all_pairs_collision_free(roundabout_log)

    def test_merging_replay_collision_free(self):
        log = make_synthetic_scenario("merging", 10, seed=5)
        assert _all_pairs_collision_free(log)

    def test_invalid_kind(self):
        with pytest.raises(ValueError, match="unknown scenario kind"):
            make_synthetic_scenario("freeway", 3, seed=0)

    def test_vehicle_count(self, roundabout_log):
        assert len(roundabout_log.tracks) == 8

    def test_tracks_share_frame_period(self, roundabout_log):
        for track in roundabout_log.tracks.values():
            assert abs(track.frame_period - roundabout_log.frame_period) < 1e-9

    def test_best_path_matches_route(self, roundabout_log):
        # every generated vehicle follows its assigned route end to end, so
        # the best-fit path must trace it within lane width everywhere
        for tid in roundabout_log.track_ids:
            track = roundabout_log.tracks[tid]
            path = roundabout_log.best_path_for_track(tid)
            from replaydrive.geometry import project_to_path

            for p in track.xy[::25]:
                assert abs(project_to_path(p, path).lateral_offset) < 1.0
