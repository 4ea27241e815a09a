"""Cross-track metrics, goal-path and mode selection, and per-horizon aggregation."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .geom import SEGMENT_EPS, Polyline, as_point, resample
from .stitcher import PredictedTrajectory
from .tracker import TimedTrajectory

HORIZONS = (1, 2, 3, 4, 5, 6)
LANE_RADIUS = 100.0
CSV_COLUMNS = ("method", "horizon_s", "maneuver", "mean_cte_m", "count")


class NoGoalError(LookupError):
    """No goal-path candidate lies within range of the actor."""


def cross_track_error(pred, gt_track: Polyline) -> float:
    """Distance from ``pred`` to the ground-truth track.

    Past either end of the track, the track is continued as a straight ray
    along its endpoint heading and the perpendicular distance to that ray is used.
    """
    p = as_point(pred)
    closest, arc = gt_track.project(p)
    if arc <= SEGMENT_EPS or arc >= gt_track.length - SEGMENT_EPS:
        end = gt_track.start if arc <= SEGMENT_EPS else gt_track.end
        t = gt_track.tangent_at(arc)
        v = p - end
        along = float(v @ t)
        beyond = along < 0 if arc <= SEGMENT_EPS else along > 0
        if beyond:
            return abs(t[0] * v[1] - t[1] * v[0])
    return float(np.hypot(*(p - closest)))


def select_goal_path(
    candidates: Sequence[Polyline], gt_track: Polyline, actor_pos, radius: float = LANE_RADIUS
) -> Polyline:
    return candidates[select_goal_index(candidates, gt_track, actor_pos, radius)]


def select_goal_index(
    candidates: Sequence[Polyline], gt_track: Polyline, actor_pos, radius: float = LANE_RADIUS
) -> int:
    """Index of the in-range candidate with the smallest mean distance to the ground truth."""
    actor_pos = as_point(actor_pos)
    best, best_cost = None, math.inf
    for i, lane in enumerate(candidates):
        if lane.distance(actor_pos) > radius:
            continue
        cost = float(np.mean(lane.distances(gt_track.vertices)))
        if cost < best_cost:
            best, best_cost = i, cost
    if best is None:
        raise NoGoalError(f"no goal candidate within {radius} m of the actor")
    return best


def dtw_distance(a, b) -> float:
    """Classical dynamic time warping with Euclidean point cost and no window."""
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("dtw needs nonempty sequences")
    cost = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1]).tolist()
    m = len(b)
    prev = [math.inf] * (m + 1)
    prev[0] = 0.0
    for i, row in enumerate(cost):
        cur = [math.inf] * (m + 1)
        for j in range(1, m + 1):
            cur[j] = row[j - 1] + min(prev[j - 1], prev[j], cur[j - 1])
        prev = cur
        prev[0] = math.inf
    return prev[m]


def select_mode(modes: Sequence[PredictedTrajectory], goal: Polyline) -> PredictedTrajectory:
    return modes[select_mode_index(modes, goal)]


def select_mode_index(modes: Sequence[PredictedTrajectory], goal: Polyline) -> int:
    """Index of the mode whose means are DTW-closest to the goal resampled at 1 m.

    The goal is clipped to the arc range spanned by all modes so that unrelated
    goal length does not dominate the alignment cost.
    """
    if not modes:
        raise ValueError("need at least one mode")
    arcs = np.concatenate([goal.project_many(m.means)[1] for m in modes])
    ref = goal.sub(float(arcs.min()), float(arcs.max()))
    ref_pts = resample(ref, 1.0).vertices if ref is not None else goal.project_many(modes[0].means[:1])[0]
    costs = [dtw_distance(m.means, ref_pts) for m in modes]
    return int(np.argmin(costs))


@dataclass
class MetricsTable:
    """Sum/count accumulator keyed by ``(method, horizon_s, maneuver)``.

    Merging is order independent, so scenario results can be combined in any order.
    """

    cells: dict = field(default_factory=dict)

    def add(self, method: str, horizon: int, maneuver: str, error: float, count: int = 1) -> None:
        key = (method, int(horizon), maneuver)
        total, n = self.cells.get(key, (0.0, 0))
        self.cells[key] = (total + error, n + count)

    def merge(self, other: MetricsTable) -> MetricsTable:
        for key, (total, n) in other.cells.items():
            t0, n0 = self.cells.get(key, (0.0, 0))
            self.cells[key] = (t0 + total, n0 + n)
        return self

    def mean(self, method: str, horizon: int, maneuver: str | None = None) -> float:
        total, n = 0.0, 0
        for (m, h, man), (t, c) in self.cells.items():
            if m == method and h == horizon and (maneuver is None or man == maneuver):
                total += t
                n += c
        return total / n if n else math.nan

    def rows(self) -> list[tuple[str, int, str, float, int]]:
        out = []
        for key in sorted(self.cells):
            total, n = self.cells[key]
            out.append((*key, total / n if n else math.nan, n))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for method, h, maneuver, mean, n in self.rows():
            writer.writerow([method, h, maneuver, f"{mean:.6f}", n])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> MetricsTable:
        table = cls()
        for row in csv.DictReader(io.StringIO(text)):
            n = int(row["count"])
            table.cells[(row["method"], int(row["horizon_s"]), row["maneuver"])] = (
                float(row["mean_cte_m"]) * n,
                n,
            )
        return table


def horizon_errors(pred: TimedTrajectory, gt_track: Polyline, horizons: Iterable[int] = HORIZONS) -> dict[int, float]:
    errors = {}
    for h in horizons:
        k = int(round(h / pred.dt))
        if k < len(pred):
            errors[h] = cross_track_error(pred.positions[k], gt_track)
    return errors


def evaluate(
    outputs: Mapping[str, TimedTrajectory], gt: TimedTrajectory, maneuver: str, horizons: Iterable[int] = HORIZONS
) -> MetricsTable:
    """Per-method, per-horizon cross-track errors of time-aligned outputs against ``gt``."""
    track = gt.track()
    table = MetricsTable()
    for name, traj in outputs.items():
        errs = horizon_errors(traj, track, horizons)
        for h in horizons:
            if h in errs:
                table.add(name, h, maneuver, errs[h])
    return table
