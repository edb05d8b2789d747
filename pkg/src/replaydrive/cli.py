"""Command-line entry points.

Subcommands: ``gen`` (synthetic scenes), ``plan`` (one pseudo-expert plan),
``eval`` (outcome table for a policy checkpoint), ``dagger`` (the full
improvement loop with per-iteration checkpoints, CSV metrics, and a success
curve figure), and ``render`` (scene SVG for a rollout or plan).

Exit codes: 0 success, 1 runtime failure, 2 usage/config error, 3 infeasible
plan.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from .config import ConfigError, load_config
from .dagger import run_dagger
from .planner import InfeasiblePlanError, PlanResult, plan_from_state
from .policy import load_dataset, knn_bc_fit
from .render import (render_scene_svg, write_outcome_bars, write_scene_svg,
                     write_success_curve)
from .simulator import evaluate, load_rollout_records

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3


def _load_scene(scene_dir: str) -> ds.TrafficLog:
    scene = Path(scene_dir)
    return ds.load_log(scene / "tracks.csv", scene / "map.json")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def cmd_gen(args) -> int:
    log = ds.make_synthetic_scenario(args.kind, args.vehicles, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds.write_log(log, out / "tracks.csv", out / "map.json")
    print(f"wrote {out / 'tracks.csv'} and {out / 'map.json'} "
          f"({len(log.tracks)} tracks, {len(log.reference_paths)} paths)")
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = load_config(args.config)
    log = _load_scene(args.scene)
    track = log.tracks.get(args.ego_track)
    if track is None:
        print(f"error: track {args.ego_track} not in scene", file=sys.stderr)
        return EXIT_USAGE
    if not 0 <= args.frame < track.frame_count:
        print(f"error: frame {args.frame} outside track", file=sys.stderr)
        return EXIT_USAGE
    path = log.best_path_for_track(args.ego_track)
    v_goal = args.v_goal if args.v_goal is not None else track.mean_speed
    planner_cfg = cfg.planner_config(v_goal=v_goal)
    st = track.state_at_frame(args.frame)
    try:
        result = plan_from_state(st.pos, st.speed, path, log, float(track.times[args.frame]),
                                 planner_cfg, exclude_track_id=args.ego_track)
    except InfeasiblePlanError as exc:
        print(f"infeasible plan: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    payload = result.to_json_dict()
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out} (total cost {result.total_cost:.4f})")
    else:
        print(text, end="")
    if args.svg:
        write_scene_svg(args.svg, log, ego_points=result.trajectory.points,
                        reference_path_id=path.path_id)
        print(f"wrote {args.svg}")
    return EXIT_OK


def _eval_table(metrics_dict: dict) -> str:
    rates = metrics_dict["rates"]
    counts = metrics_dict["counts"]
    lines = [f"{'outcome':<14}{'rate':>9}{'count':>8}"]
    for key, label in (("success", "Suc."), ("fail_vehicle", "Fail-V"),
                       ("fail_curb", "Fail-C"), ("timeout", "Timeout")):
        lines.append(f"{label:<14}{rates[key] * 100:>8.1f}%{counts[key]:>8}")
    lines.append(f"{'total':<14}{'':>9}{metrics_dict['total']:>8}")
    return "\n".join(lines)


def cmd_eval(args) -> int:
    cfg = load_config(args.config, {"workers": args.workers})
    log = _load_scene(args.scene)
    data = load_dataset(args.dataset)
    policy = knn_bc_fit(data, cfg.knn_k)
    episodes = ds.enumerate_episodes(log, cfg.episode_stride, cfg.episode_min_remaining,
                                     horizon_slack_frames=cfg.episode_horizon_slack)
    if not episodes:
        print("error: no episodes satisfy the enumeration constraints", file=sys.stderr)
        return EXIT_USAGE
    metrics = evaluate(episodes, policy, cfg.sim_config(), workers=cfg.workers)
    table = metrics.as_dict()
    print(_eval_table(table))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "eval.json", table)
        with open(out / "eval.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["outcome", "rate", "count"])
            for key in ("success", "fail_vehicle", "fail_curb", "timeout"):
                writer.writerow([key, repr(table["rates"][key]), table["counts"][key]])
        write_outcome_bars(table, out / "outcomes.svg")
        print(f"wrote {out / 'eval.json'}, {out / 'eval.csv'}, {out / 'outcomes.svg'}")
    return EXIT_OK


def _iterations_csv(path: Path, iteration_dicts: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "success", "fail_vehicle", "fail_curb", "timeout",
                         "dataset_unique", "dataset_multiset", "selected_states",
                         "labeled_samples", "skipped_states", "train_loss_pred"])
        for d in iteration_dicts:
            writer.writerow([d["iteration"], repr(d["rates"]["success"]),
                             repr(d["rates"]["fail_vehicle"]), repr(d["rates"]["fail_curb"]),
                             repr(d["rates"]["timeout"]), d["dataset_unique"],
                             d["dataset_multiset"], d["selected_states"],
                             d["labeled_samples"], d["skipped_states"],
                             repr(d["train_loss_pred"])])


def cmd_dagger(args) -> int:
    overrides = {"strategy": args.strategy.replace("-", "_") if args.strategy else None,
                 "k_failure_frames": args.k, "iterations": args.iterations,
                 "workers": args.workers}
    cfg = load_config(args.config, overrides)
    log = _load_scene(args.scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dcfg = cfg.dagger_config()

    start_iteration = 0
    initial_dataset = None
    prior = None
    if args.resume:
        done = sorted(out.glob("dataset_iter_*.jsonl"))
        report_file = out / "report.json"
        if done and report_file.exists():
            last = max(int(p.stem.split("_")[-1]) for p in done)
            start_iteration = last + 1
            initial_dataset = load_dataset(out / f"dataset_iter_{last}.jsonl")
            prior = json.loads(report_file.read_text())["iterations"][:start_iteration]
            print(f"resuming after iteration {last}")

    from .policy import save_dataset

    def checkpoint(iteration, data, reports):
        save_dataset(data, out / f"dataset_iter_{iteration}.jsonl")
        dicts = [r if isinstance(r, dict) else r.as_dict() for r in reports]
        _write_json(out / "report.json", {"config": report_config, "iterations": dicts})

    report_config = {"scenario": str(args.scene), "seed": cfg.seed}
    report = run_dagger(log, dcfg, checkpoint_hook=checkpoint,
                        start_iteration=start_iteration,
                        initial_dataset=initial_dataset, prior_iterations=prior)
    payload = report.as_dict()
    payload["config"].update(report_config)
    _write_json(out / "report.json", payload)
    _iterations_csv(out / "iterations.csv", payload["iterations"])
    write_success_curve(payload["iterations"], out / "success_curve.svg")
    last = payload["iterations"][-1]
    print(f"finished {len(payload['iterations'])} iterations; "
          f"final success rate {last['rates']['success'] * 100:.1f}%")
    print(f"wrote {out / 'report.json'}, {out / 'iterations.csv'}, {out / 'success_curve.svg'}")
    return EXIT_OK


def cmd_render(args) -> int:
    log = _load_scene(args.scene)
    ego_points = None
    path_id = None
    if args.rollout:
        records = load_rollout_records(args.rollout)
        if not records:
            print("error: empty rollout file", file=sys.stderr)
            return EXIT_USAGE
        if not 0 <= args.episode < len(records):
            print(f"error: episode {args.episode} outside rollout file "
                  f"({len(records)} episodes)", file=sys.stderr)
            return EXIT_USAGE
        rec = records[args.episode]
        ego_points = np.array([[f["x"], f["y"]] for f in rec["frames"]])
        path_id = rec["path_id"]
    elif args.plan:
        result = PlanResult.from_json_dict(json.loads(Path(args.plan).read_text()))
        ego_points = result.trajectory.points
    svg = render_scene_svg(log, ego_points=ego_points, reference_path_id=path_id)
    Path(args.out).write_text(svg)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="replaydrive",
                                     description="Dataset-replay driving simulator, "
                                                 "pseudo-expert planner, and iterative "
                                                 "imitation training")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic scene")
    p.add_argument("--kind", required=True, choices=ds.SCENARIO_KINDS)
    p.add_argument("--vehicles", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("plan", help="run the pseudo-expert once")
    p.add_argument("--scene", required=True)
    p.add_argument("--ego-track", type=int, required=True)
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--v-goal", type=float)
    p.add_argument("--out")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="evaluate a policy checkpoint")
    p.add_argument("--scene", required=True)
    p.add_argument("--dataset", required=True, help="dataset JSONL checkpoint")
    p.add_argument("--config")
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dagger", help="run the full improvement loop")
    p.add_argument("--scene", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--strategy", choices=["k-failure", "adversary"])
    p.add_argument("--k", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_dagger)

    p = sub.add_parser("render", help="render a rollout or plan to SVG")
    p.add_argument("--scene", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--rollout", help="rollout JSONL file")
    group.add_argument("--plan", help="plan JSON file")
    p.add_argument("--episode", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasiblePlanError as exc:
        print(f"infeasible plan: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ds.ParseError, ds.ValidationError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("command failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
