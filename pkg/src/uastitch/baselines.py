"""Comparison methods: ballistic rollout, pure pursuit on the goal, linear decay-stitching."""

from __future__ import annotations

import math

import numpy as np

from .geom import Polyline
from .stitcher import PredictedTrajectory, SolutionPath, StitchParams, extend_path
from .tracker import HORIZON_STEPS, OUTPUT_DT, ActorState, TimedTrajectory, rollout


def ballistic(state0: ActorState, horizon_steps: int = HORIZON_STEPS, dt: float = OUTPUT_DT) -> TimedTrajectory:
    """Constant heading, constant acceleration until the speed reaches zero."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v0, a0 = state0.speed, state0.acceleration
    t = dt * np.arange(horizon_steps + 1)
    dist = v0 * t + 0.5 * a0 * t**2
    if a0 < 0:
        t_stop = v0 / -a0
        dist = np.where(t >= t_stop, 0.5 * v0 * t_stop, dist)
    direction = np.array([math.cos(state0.heading), math.sin(state0.heading)])
    positions = state0.position + dist[:, None] * direction
    speeds = np.maximum(v0 + a0 * t, 0.0)
    return TimedTrajectory(dt, positions, np.full(len(t), state0.heading), speeds)


def pp_on_goal(state0: ActorState, goal: Polyline, horizon_steps: int = HORIZON_STEPS, **kwargs) -> TimedTrajectory:
    return rollout(state0, goal, horizon_steps, **kwargs)


def linear_stitch(traj: PredictedTrajectory, goal: Polyline, n: float, params: StitchParams | None = None) -> SolutionPath:
    """LS(n): keep the first ``n`` seconds of means verbatim, then decay onto the goal.

    Covariances are ignored entirely.
    """
    params = params or StitchParams()
    T = int(math.floor(n / traj.dt + 1e-9))
    if not 1 <= T <= len(traj):
        raise ValueError(f"n={n} s gives breakaway step {T}, outside 1..{len(traj)}")
    return extend_path(traj.means[:T].copy(), T, goal, params)
