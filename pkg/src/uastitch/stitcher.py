"""Uncertainty-aware stitching of a short-term Gaussian trajectory onto a goal path.

Each predicted waypoint ``N(mu_t, Sigma_t)`` is pulled toward the goal polyline by
solving

    min_y  ||y - mu||^2_{Sigma^-1} + lam_t * min_{g in goal} ||y - g||^2

with alternating minimization. ``lam_t`` stays at ``lambda0`` up to the breakaway
step ``T`` (the last waypoint whose footprint is still compatible with the goal)
and grows afterwards so the solution converges onto the goal. Past the
prediction horizon the remaining lateral offset is decayed linearly over
``shrink_distance`` and the rest of the goal path is attached.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geom import (
    SEGMENT_EPS,
    OrientedBox,
    Polyline,
    as_point,
    box_intersects_polyline,
    mahalanobis_distance,
    mahalanobis_project,
    normal_at,
    precision,
    regularize_cov,
    signed_offset,
)

logger = logging.getLogger(__name__)

DEFAULT_PATH_BUDGET = 100.0


@dataclass(frozen=True)
class GaussianWaypoint:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", as_point(self.mean))
        object.__setattr__(self, "cov", regularize_cov(self.cov))


@dataclass(frozen=True, eq=False)
class PredictedTrajectory:
    """Learned short-term prediction: ``H`` Gaussian waypoints every ``dt`` seconds.

    Waypoint ``t`` (1-based) describes the position at time ``t * dt``.
    """

    dt: float
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=float).reshape(-1, 2)
        covs = np.array(self.covs, dtype=float).reshape(-1, 2, 2)
        if len(means) < 1:
            raise ValueError("trajectory needs at least one waypoint")
        if len(covs) != len(means):
            raise ValueError(f"{len(means)} means but {len(covs)} covariances")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(means)):
            raise ValueError("trajectory means must be finite")
        covs = np.stack([regularize_cov(c) for c in covs])
        means.setflags(write=False)
        covs.setflags(write=False)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    def __len__(self) -> int:
        return len(self.means)

    @property
    def horizon(self) -> int:
        return len(self.means)

    @property
    def waypoints(self) -> list[GaussianWaypoint]:
        return [GaussianWaypoint(m, c) for m, c in zip(self.means, self.covs)]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PredictedTrajectory)
            and self.dt == other.dt
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.covs, other.covs)
        )


@dataclass(frozen=True)
class StitchParams:
    """Stitching parameters; defaults are the tuned values used throughout the benchmarks.

    ``target_length`` of ``None`` keeps appending goal remainder until the
    path spans ``path_budget`` meters or the goal runs out. ``adaptive=False``
    holds ``lambda0`` for every waypoint (the constant-lambda ablation).
    """

    lambda0: float = 0.55
    iterations: int = 10
    alpha: float = 0.5
    c: float = 1.0
    sample_step: float = 1.0
    shrink_distance: float = 10.0
    target_length: int | None = None
    adaptive: bool = True
    path_budget: float = DEFAULT_PATH_BUDGET

    def __post_init__(self):
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be nonnegative")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if not 0 < self.sample_step <= self.shrink_distance:
            raise ValueError("need 0 < sample_step <= shrink_distance")


@dataclass(frozen=True, eq=False)
class SolutionPath:
    points: np.ndarray
    prefix_length: int
    breakaway: int
    lambdas: np.ndarray = field(default=None, repr=False)
    scores: np.ndarray = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def prefix(self) -> np.ndarray:
        return self.points[: self.prefix_length]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SolutionPath)
            and self.prefix_length == other.prefix_length
            and self.breakaway == other.breakaway
            and np.array_equal(self.points, other.points)
        )


def objective(y, g, mean, prec, lam: float) -> float:
    """Alternating-minimization objective L(y, g)."""
    dy = np.asarray(y) - mean
    dg = np.asarray(y) - np.asarray(g)
    return float(dy @ prec @ dy + lam * (dg @ dg))


def compatibility_score(wp: GaussianWaypoint, goal: Polyline, footprint: OrientedBox) -> float:
    """Compatibility of a waypoint with the goal in [0, 1].

    1 when the footprint overlaps the goal; otherwise the best footprint
    vertex's p-value ``exp(-D^2 / 2)`` of the goal point closest to it.
    """
    if box_intersects_polyline(footprint, goal):
        return 1.0
    best = 0.0
    for corner in footprint.corners():
        g = mahalanobis_project(goal, corner, wp.cov)
        d = mahalanobis_distance(g, corner, wp.cov)
        best = max(best, math.exp(-0.5 * d * d))
    return best


def footprint_headings(means: np.ndarray, goal: Polyline) -> np.ndarray:
    """Central-difference heading of each mean, falling back to the goal heading when stalled."""
    means = np.asarray(means, dtype=float)
    n = len(means)
    headings = np.empty(n)
    for t in range(n):
        lo, hi = max(t - 1, 0), min(t + 1, n - 1)
        d = means[hi] - means[lo]
        if np.hypot(*d) < 1e-6:
            headings[t] = goal.heading_at(goal.project(means[t])[1])
        else:
            headings[t] = math.atan2(d[1], d[0])
    return headings


def footprints_for(traj: PredictedTrajectory, goal: Polyline, length: float, width: float) -> list[OrientedBox]:
    headings = footprint_headings(traj.means, goal)
    return [OrientedBox(m, h, length, width) for m, h in zip(traj.means, headings)]


def breakaway_horizon(
    traj: PredictedTrajectory, goal: Polyline, footprints, alpha: float
) -> int:
    """Largest 1-based step whose compatibility score reaches ``alpha``; 0 if none does."""
    T, _ = _breakaway_with_scores(traj, goal, footprints, alpha)
    return T


def _breakaway_with_scores(traj, goal, footprints, alpha):
    if len(footprints) != len(traj):
        raise ValueError("need one footprint per waypoint")
    scores = np.array(
        [compatibility_score(wp, goal, fp) for wp, fp in zip(traj.waypoints, footprints)]
    )
    hits = np.flatnonzero(scores >= alpha)
    T = int(hits[-1]) + 1 if len(hits) else 0
    return T, scores


def lambda_schedule(t: int, T: int, wp: GaussianWaypoint, goal: Polyline, params: StitchParams) -> float:
    """Regularization weight for 1-based step ``t`` given breakaway step ``T``.

    Past ``T`` the weight is chosen so the solved offset from the goal shrinks
    like ``c / (t - T)``.
    """
    if t <= T or not params.adaptive:
        return params.lambda0
    offset = wp.mean - goal.project(wp.mean)[0]
    pull = float(np.linalg.norm(precision(wp.cov) @ offset))
    return params.lambda0 + pull * (t - T) / params.c


def solve_waypoint(
    wp: GaussianWaypoint, goal: Polyline, lam: float, iterations: int, return_history: bool = False
):
    """Alternating minimization for one waypoint, starting from the mean.

    With ``return_history`` also returns the ``(M + 1, 2)`` arrays of y and g
    iterates (``g[0]`` is the projection of the mean).
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    prec = precision(wp.cov)
    system = prec + lam * np.eye(2)
    if abs(np.linalg.det(system)) < 1e-300:
        raise np.linalg.LinAlgError("singular y-update system")
    rhs0 = prec @ wp.mean
    y = wp.mean.copy()
    ys = [y]
    gs = [goal.project(y)[0]]
    for _ in range(iterations):
        g = goal.project(y)[0]
        # with no pull toward the goal the update is the mean itself; skip the solve so it stays bit-exact
        y = wp.mean.copy() if lam == 0 else np.linalg.solve(system, rhs0 + lam * g)
        ys.append(y)
        gs.append(g)
    if return_history:
        return y, np.array(ys), np.array(gs)
    return y


def stitch_prefix(
    traj: PredictedTrajectory, goal: Polyline, footprints, params: StitchParams
) -> tuple[np.ndarray, int]:
    points, T, _, _ = _stitch_prefix(traj, goal, footprints, params)
    return points, T


def _stitch_prefix(traj, goal, footprints, params):
    T, scores = _breakaway_with_scores(traj, goal, footprints, params.alpha)
    points = np.empty((len(traj), 2))
    lambdas = np.empty(len(traj))
    for i, wp in enumerate(traj.waypoints):
        lam = lambda_schedule(i + 1, T, wp, goal, params)
        if i + 1 > T and logger.isEnabledFor(logging.DEBUG):
            eig = np.linalg.eigvalsh(precision(wp.cov))[-1]
            logger.debug("step %d: lambda %.4g is %.3g x largest precision eigenvalue", i + 1, lam, lam / eig)
        lambdas[i] = lam
        points[i] = solve_waypoint(wp, goal, lam, params.iterations)
    return points, T, lambdas, scores


def _decay_points(goal: Polyline, s_start: float, offset: float, params: StitchParams):
    """Points along the goal after ``s_start`` whose signed offset decays linearly to zero."""
    remaining = goal.length - s_start
    if remaining <= SEGMENT_EPS:
        return np.empty((0, 2)), goal.length
    s, d = params.sample_step, params.shrink_distance
    if remaining >= d:
        span = d
        steps = np.arange(1, int(math.floor(d / s + 1e-9)) + 1) * s
    else:
        span = remaining
        n = int(math.floor(remaining / s + 1e-9))
        steps = np.arange(1, n + 1) * s
        if len(steps) == 0 or steps[-1] < remaining - SEGMENT_EPS:
            steps = np.append(steps, remaining)
    pts = []
    for step in steps:
        arc = s_start + step
        frac = max(0.0, 1.0 - step / span)
        pts.append(goal.point_at(arc) + offset * frac * normal_at(goal, arc))
    return np.array(pts), s_start + steps[-1]


def extend_path(prefix, T: int, goal: Polyline, params: StitchParams) -> SolutionPath:
    """Append the offset-decay ramp and the remaining goal path after ``prefix``."""
    prefix = np.asarray(prefix, dtype=float).reshape(-1, 2)
    if len(prefix) == 0:
        raise ValueError("prefix must be nonempty")
    offset, s_end = signed_offset(goal, prefix[-1])
    ramp, s_goal = _decay_points(goal, s_end, offset, params)
    parts = [prefix, ramp]
    n_max = params.target_length
    if n_max is not None and n_max < len(prefix):
        raise ValueError("target_length must be >= prefix length")
    used = _path_length(np.vstack(parts))
    s = s_goal
    tail = []
    while True:
        s += params.sample_step
        if s > goal.length - SEGMENT_EPS:
            if goal.length - (s - params.sample_step) > SEGMENT_EPS:
                tail.append(goal.end)
            break
        tail.append(goal.point_at(s))
        if n_max is None and used + params.sample_step * len(tail) >= params.path_budget:
            break
        if n_max is not None and len(prefix) + len(ramp) + len(tail) >= n_max:
            break
    if tail:
        parts.append(np.array(tail))
    points = np.vstack(parts)
    if n_max is not None:
        points = points[:n_max]
    points.setflags(write=False)
    return SolutionPath(points, len(prefix), T)


def _path_length(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    return float(np.sum(np.hypot(*np.diff(points, axis=0).T)))


def stitch(
    traj: PredictedTrajectory,
    goal: Polyline,
    actor_dims: tuple[float, float] = (4.5, 2.0),
    params: StitchParams | None = None,
) -> SolutionPath:
    """Full pipeline: footprints, breakaway, per-waypoint solves, extension."""
    params = params or StitchParams()
    length, width = actor_dims
    footprints = footprints_for(traj, goal, length, width)
    points, T, lambdas, scores = _stitch_prefix(traj, goal, footprints, params)
    path = extend_path(points, T, goal, params)
    return SolutionPath(path.points, path.prefix_length, T, lambdas, scores)
