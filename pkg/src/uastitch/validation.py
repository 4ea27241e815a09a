"""Input coercion helpers shared by the estimator API and the CLI."""

from __future__ import annotations

import numpy as np

from .geom import Polyline
from .stitcher import PredictedTrajectory


def check_polyline(line, dedupe: bool = True) -> Polyline:
    """Accept a ``Polyline`` or an ``(n, 2)`` array-like of vertices."""
    if isinstance(line, Polyline):
        return line
    return Polyline(np.asarray(line, dtype=float), dedupe=dedupe)


def check_trajectory(traj, dt: float = 0.1) -> PredictedTrajectory:
    """Accept a ``PredictedTrajectory`` or a ``(means, covs)`` pair sampled every ``dt``."""
    if isinstance(traj, PredictedTrajectory):
        return traj
    try:
        means, covs = traj
    except (TypeError, ValueError) as exc:
        raise TypeError("expected a PredictedTrajectory or a (means, covs) pair") from exc
    return PredictedTrajectory(dt, means, covs)


def check_trajectories(X, dt: float = 0.1) -> list[PredictedTrajectory]:
    if isinstance(X, PredictedTrajectory) or (isinstance(X, tuple) and len(X) == 2 and np.ndim(X[0]) == 2):
        return [check_trajectory(X, dt)]
    return [check_trajectory(x, dt) for x in X]
