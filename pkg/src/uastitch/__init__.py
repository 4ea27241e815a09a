"""Uncertainty-aware stitching of learned short-term trajectories with lane goal paths."""

from .estimators import LinearDecayStitcher, UncertaintyAwareStitcher
from .geom import OrientedBox, Polyline
from .stitcher import GaussianWaypoint, PredictedTrajectory, SolutionPath, StitchParams, stitch
from .tracker import ActorState, SpeedProfileParams, TimedTrajectory

__all__ = [
    "ActorState",
    "GaussianWaypoint",
    "LinearDecayStitcher",
    "OrientedBox",
    "Polyline",
    "PredictedTrajectory",
    "SolutionPath",
    "SpeedProfileParams",
    "StitchParams",
    "TimedTrajectory",
    "UncertaintyAwareStitcher",
    "stitch",
]
__version__ = "0.1.0"
