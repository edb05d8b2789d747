"""Batch rendering: deterministic scene SVGs and matplotlib report figures.

Scene SVGs follow fixed drawing conventions: road structure (curbs) grey,
replay vehicle paths red with a dot at each start position, the ego/expert
trajectory blue, and the reference path pink dashed. Output bytes depend only
on the input data, so renders are golden-file testable.
"""
from __future__ import annotations

import numpy as np

from .dataset import TrafficLog

CURB_COLOR = "#999999"
VEHICLE_COLOR = "#d62728"
EGO_COLOR = "#1f77b4"
PATH_COLOR = "#e377c2"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _polyline(points, color: str, width: float, dashed: bool = False,
              opacity: float = 1.0) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
    dash = ' stroke-dasharray="6,5"' if dashed else ""
    op = f' stroke-opacity="{opacity:g}"' if opacity != 1.0 else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width:g}"'
            f'{dash}{op} points="{pts}" />')


def _circle(x: float, y: float, r: float, color: str) -> str:
    return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r:g}" fill="{color}" />'


def render_scene_svg(log: TrafficLog, ego_points=None, reference_path_id=None,
                     pixels_per_meter: float = 4.0, margin: float = 8.0) -> str:
    """A static scene picture as an SVG string."""
    groups = [np.asarray(c, dtype=float) for c in log.curbs]
    groups += [p.points for p in log.reference_paths]
    groups += [log.tracks[tid].xy for tid in sorted(log.tracks)]
    if ego_points is not None and len(ego_points):
        groups.append(np.asarray(ego_points, dtype=float))
    allpts = np.vstack(groups)
    xmin, ymin = allpts.min(axis=0) - margin
    xmax, ymax = allpts.max(axis=0) + margin
    scale = pixels_per_meter
    width = (xmax - xmin) * scale
    height = (ymax - ymin) * scale

    def to_px(pts):
        pts = np.atleast_2d(pts)
        return np.stack([(pts[:, 0] - xmin) * scale, (ymax - pts[:, 1]) * scale], axis=1)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="white" />',
    ]
    for curb in log.curbs:
        parts.append(_polyline(to_px(curb), CURB_COLOR, 2.5))
    ref_ids = ([reference_path_id] if reference_path_id is not None
               else [p.path_id for p in log.reference_paths])
    for path in log.reference_paths:
        if path.path_id in ref_ids:
            parts.append(_polyline(to_px(path.points), PATH_COLOR, 1.5, dashed=True))
    for tid in sorted(log.tracks):
        track = log.tracks[tid]
        parts.append(_polyline(to_px(track.xy), VEHICLE_COLOR, 1.5, opacity=0.8))
        start = to_px(track.xy[0])[0]
        parts.append(_circle(start[0], start[1], 4.0, VEHICLE_COLOR))
    if ego_points is not None and len(ego_points):
        parts.append(_polyline(to_px(ego_points), EGO_COLOR, 2.5))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_scene_svg(out_path, log: TrafficLog, ego_points=None,
                    reference_path_id=None) -> None:
    svg = render_scene_svg(log, ego_points=ego_points,
                           reference_path_id=reference_path_id)
    with open(out_path, "w") as fh:
        fh.write(svg)


def write_success_curve(iteration_dicts: list, out_path) -> None:
    """Success/failure rates per improvement iteration as a line figure."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    its = [d["iteration"] for d in iteration_dicts]
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, label, style in (("success", "Suc.", "o-"), ("fail_vehicle", "Fail-V", "s--"),
                              ("fail_curb", "Fail-C", "^--"), ("timeout", "Timeout", "x:")):
        ax.plot(its, [d["rates"][key] for d in iteration_dicts], style, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("rate")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def write_outcome_bars(metrics_dict: dict, out_path) -> None:
    """Evaluation outcome rates as a bar figure."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rates = metrics_dict["rates"]
    keys = ["success", "fail_vehicle", "fail_curb", "timeout"]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(range(len(keys)), [rates[k] for k in keys],
           color=["#2ca02c", "#d62728", "#ff7f0e", "#7f7f7f"])
    ax.set_xticks(range(len(keys)))
    ax.set_xticklabels(["Suc.", "Fail-V", "Fail-C", "Timeout"])
    ax.set_ylim(0, 1.0)
    ax.set_ylabel("rate")
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
