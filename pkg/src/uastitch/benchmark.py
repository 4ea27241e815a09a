"""Run stitching and baselines over scenario records and aggregate cross-track errors."""

from __future__ import annotations

import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baselines import ballistic, linear_stitch, pp_on_goal
from .evaluation import HORIZONS, MetricsTable, NoGoalError, horizon_errors, select_goal_path, select_mode
from .geom import Polyline
from .scenarios import ScenarioRecord
from .stitcher import StitchParams, stitch
from .tracker import ActorState, TimedTrajectory, retime, rollout

logger = logging.getLogger(__name__)

METHODS = ("ballistic", "pp", "raw", "ls1", "ls3", "ls5", "us")
_LS = re.compile(r"^ls(\d+(?:\.\d+)?)$")


def check_methods(methods) -> list[str]:
    out = []
    for m in methods:
        if m not in METHODS and not _LS.match(m):
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        out.append(m)
    return out


def track_path(state0: ActorState, points, tracking: str = "pp") -> TimedTrajectory:
    """Turn a spatial path into a timed trajectory starting at the actor."""
    pts = np.vstack([state0.position, np.asarray(points, dtype=float)])
    if tracking == "retime":
        return retime(pts, state0)
    return rollout(state0, Polyline(pts, dedupe=True))


@dataclass
class ScenarioResult:
    table: MetricsTable
    details: list
    skipped: bool = False


def method_outputs(
    record: ScenarioRecord, methods, params: StitchParams, tracking: str = "pp", labels: dict | None = None
) -> dict[str, TimedTrajectory]:
    """Timed trajectory of every requested method for one scenario."""
    gt_track = record.gt_track.track()
    goal = select_goal_path(record.goal_candidates, gt_track, record.actor0.position)
    mode = select_mode(record.predicted, goal)
    a0 = record.actor0
    labels = labels or {}
    out = {}
    for m in methods:
        name = labels.get(m, m)
        if m == "ballistic":
            out[name] = ballistic(a0)
        elif m == "pp":
            out[name] = pp_on_goal(a0, goal)
        elif m == "raw":
            out[name] = retime(np.vstack([a0.position, mode.means]), a0)
        elif m == "us":
            path = stitch(mode, goal, (a0.length, a0.width), params)
            out[name] = track_path(a0, path.points, tracking)
        else:
            n = float(_LS.match(m).group(1))
            path = linear_stitch(mode, goal, n, params)
            out[name] = track_path(a0, path.points, tracking)
    return out


def run_scenario(record: ScenarioRecord, methods, params: StitchParams, tracking: str = "pp") -> ScenarioResult:
    try:
        outputs = method_outputs(record, methods, params, tracking)
    except NoGoalError as exc:
        logger.warning("skipping %s: %s", record.id, exc)
        return ScenarioResult(MetricsTable(), [], skipped=True)
    track = record.gt_track.track()
    table = MetricsTable()
    details = []
    for name, traj in outputs.items():
        for h, err in horizon_errors(traj, track, HORIZONS).items():
            table.add(name, h, record.maneuver, err)
            details.append((record.id, name, h, record.maneuver, err))
    return ScenarioResult(table, details)


def _run_one(args):
    return run_scenario(*args)


def run_all(records, methods, params: StitchParams, tracking: str = "pp", parallel: int = 1):
    """Evaluate every record; results merge in record order regardless of ``parallel``."""
    jobs = [(r, methods, params, tracking) for r in records]
    if parallel > 1:
        with ProcessPoolExecutor(parallel) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=8))
    else:
        results = [_run_one(j) for j in jobs]
    table = MetricsTable()
    details = []
    for res in results:
        table.merge(res.table)
        details.extend(res.details)
    details.sort()
    return table, details


def sweep_params(base: StitchParams, lambda0: float, alpha: float | None) -> StitchParams:
    """Parameters for one ablation cell; ``alpha=None`` is the constant-lambda variant."""
    if alpha is None:
        return replace(base, lambda0=lambda0, adaptive=False)
    return replace(base, lambda0=lambda0, alpha=alpha, adaptive=True)


def cell_label(lambda0: float, alpha: float | None) -> str:
    return f"us({lambda0:g},{'-' if alpha is None else format(alpha, 'g')})"


def details_csv(details) -> str:
    lines = ["scenario_id,method,horizon_s,maneuver,cte_m"]
    lines += [f"{sid},{m},{h},{man},{err:.6f}" for sid, m, h, man, err in details]
    return "\n".join(lines) + "\n"
