"""Static SVG 1.1 scene figures: goal, predicted modes with 1-sigma ellipses, ground truth and method outputs.

Coordinates are written with fixed precision and elements in a fixed order,
so rendering the same inputs twice gives identical bytes.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .geom import Polyline
from .stitcher import PredictedTrajectory

COLORS = {
    "goal": "#1f5fd6",
    "candidate": "#b8b8b8",
    "prediction": "#f28e2b",
    "gt": "#2ca02c",
    "us": "#000000",
    "pp": "#8e44ad",
    "ballistic": "#d62728",
    "raw": "#e377c2",
    "ls1": "#17becf",
    "ls3": "#7f7f7f",
    "ls5": "#8c564b",
}
_FALLBACK = ("#bcbd22", "#9edae5", "#c49c94", "#dbdb8d")
WIDTH = 800
MARGIN_M = 8.0
ELLIPSE_EVERY = 5


def _fmt(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


class _Frame:
    """World (meters, y up) to canvas (pixels, y down) mapping."""

    def __init__(self, points: np.ndarray):
        lo = points.min(axis=0) - MARGIN_M
        hi = points.max(axis=0) + MARGIN_M
        span = np.maximum(hi - lo, 1.0)
        self.scale = WIDTH / span[0]
        self.lo, self.hi = lo, hi
        self.height = int(math.ceil(span[1] * self.scale))

    def xy(self, p) -> tuple[str, str]:
        return _fmt((p[0] - self.lo[0]) * self.scale), _fmt((self.hi[1] - p[1]) * self.scale)

    def path(self, points) -> str:
        return " ".join(",".join(self.xy(p)) for p in points)


def _polyline(frame: _Frame, points, color: str, width: float, label: str, dash: str | None = None) -> str:
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<polyline class="{escape(label)}" points="{frame.path(points)}" fill="none" '
        f'stroke="{color}" stroke-width="{width}"{extra}/>'
    )


def _ellipse(frame: _Frame, mean, cov, color: str) -> str:
    vals, vecs = np.linalg.eigh(cov)
    # major axis direction in world frame; canvas y is flipped so the angle negates
    angle = -math.degrees(math.atan2(vecs[1, 1], vecs[0, 1]))
    rx = math.sqrt(max(vals[1], 0.0)) * frame.scale
    ry = math.sqrt(max(vals[0], 0.0)) * frame.scale
    cx, cy = frame.xy(mean)
    return (
        f'<ellipse cx="{cx}" cy="{cy}" rx="{_fmt(rx)}" ry="{_fmt(ry)}" '
        f'transform="rotate({_fmt(angle)} {cx} {cy})" fill="{color}" fill-opacity="0.12" '
        f'stroke="{color}" stroke-width="0.6"/>'
    )


def render_scene(
    goal: Polyline,
    candidates: list[Polyline],
    modes: list[PredictedTrajectory],
    gt: np.ndarray,
    outputs: dict[str, np.ndarray] | None = None,
    title: str = "",
) -> str:
    """SVG document for one scene; ``outputs`` maps method name to an ``(n, 2)`` path."""
    outputs = outputs or {}
    gt = np.asarray(gt, dtype=float)
    focus = [gt] + [m.means for m in modes] + [np.asarray(p, dtype=float) for p in outputs.values()]
    pts_all = np.vstack(focus)
    frame = _Frame(pts_all)

    def clip(line: Polyline) -> np.ndarray:
        # only the stretch of a lane next to the scene is drawn; distant lanes are dropped
        if line.distances(pts_all).min() > 50.0:
            return np.empty((0, 2))
        arcs = line.project_many(pts_all)[1]
        part = line.sub(float(arcs.min()) - 20.0, float(arcs.max()) + 20.0)
        return part.vertices if part is not None else np.empty((0, 2))

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{frame.height}" '
        f'viewBox="0 0 {WIDTH} {frame.height}">',
        f"<title>{escape(title)}</title>",
        f'<rect width="{WIDTH}" height="{frame.height}" fill="#ffffff"/>',
    ]
    for line in candidates:
        if line is goal:
            continue
        pts = clip(line)
        if len(pts) >= 2:
            parts.append(_polyline(frame, pts, COLORS["candidate"], 1.5, "candidate", "6 4"))
    pts = clip(goal)
    if len(pts) >= 2:
        parts.append(_polyline(frame, pts, COLORS["goal"], 3, "goal"))
    for mode in modes:
        for t in range(ELLIPSE_EVERY - 1, len(mode), ELLIPSE_EVERY):
            parts.append(_ellipse(frame, mode.means[t], mode.covs[t], COLORS["prediction"]))
        parts.append(_polyline(frame, mode.means, COLORS["prediction"], 1.5, "prediction"))
    parts.append(_polyline(frame, gt, COLORS["gt"], 2.5, "gt"))
    extra = iter(_FALLBACK * (1 + len(outputs) // len(_FALLBACK)))
    colors = {**COLORS, **{n: next(extra) for n in sorted(outputs) if n not in COLORS}}
    for name in sorted(outputs):
        parts.append(_polyline(frame, outputs[name], colors[name], 2, name))
    legend = ["goal", "prediction", "gt", *sorted(outputs)]
    for i, name in enumerate(legend):
        color = colors[name]
        y = 18 + 16 * i
        parts.append(f'<rect x="10" y="{y - 9}" width="14" height="4" fill="{color}"/>')
        parts.append(f'<text x="30" y="{y}" font-family="sans-serif" font-size="12">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
