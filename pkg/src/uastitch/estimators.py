"""scikit-learn style wrappers so stitching composes with the usual estimator tooling.

``fit`` binds the goal path, ``predict`` stitches one or many predicted
trajectories onto it::

    us = UncertaintyAwareStitcher(lambda0=0.55, alpha=0.5).fit(goal_vertices)
    path = us.predict(trajectory)[0]
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .baselines import linear_stitch
from .stitcher import SolutionPath, StitchParams, stitch
from .validation import check_polyline, check_trajectories


class _GoalStitcher(BaseEstimator):
    def fit(self, X, y=None):
        """Bind the goal path ``X`` (a ``Polyline`` or ``(n, 2)`` vertices)."""
        self.goal_ = check_polyline(X)
        self.params_ = self._make_params()
        return self

    def predict(self, X) -> list[SolutionPath]:
        check_is_fitted(self, "goal_")
        return [self._stitch_one(t) for t in check_trajectories(X, self.dt)]

    def transform(self, X) -> list:
        """Stitched point arrays, one ``(N, 2)`` array per trajectory."""
        return [p.points for p in self.predict(X)]

    def fit_predict(self, X, trajectories) -> list[SolutionPath]:
        return self.fit(X).predict(trajectories)


class UncertaintyAwareStitcher(_GoalStitcher):
    """Uncertainty-aware stitching with the tuned defaults.

    ``alpha=None`` switches off the breakaway schedule and keeps ``lambda0``
    for every waypoint.
    """

    def __init__(
        self,
        lambda0: float = 0.55,
        alpha: float | None = 0.5,
        iterations: int = 10,
        c: float = 1.0,
        sample_step: float = 1.0,
        shrink_distance: float = 10.0,
        target_length: int | None = None,
        actor_length: float = 4.5,
        actor_width: float = 2.0,
        dt: float = 0.1,
    ):
        self.lambda0 = lambda0
        self.alpha = alpha
        self.iterations = iterations
        self.c = c
        self.sample_step = sample_step
        self.shrink_distance = shrink_distance
        self.target_length = target_length
        self.actor_length = actor_length
        self.actor_width = actor_width
        self.dt = dt

    def _make_params(self) -> StitchParams:
        return StitchParams(
            lambda0=self.lambda0,
            iterations=self.iterations,
            alpha=0.5 if self.alpha is None else self.alpha,
            c=self.c,
            sample_step=self.sample_step,
            shrink_distance=self.shrink_distance,
            target_length=self.target_length,
            adaptive=self.alpha is not None,
        )

    def _stitch_one(self, traj) -> SolutionPath:
        return stitch(traj, self.goal_, (self.actor_length, self.actor_width), self.params_)


class LinearDecayStitcher(_GoalStitcher):
    """LS(n): keep ``n_seconds`` of predicted means, then decay onto the goal."""

    def __init__(
        self,
        n_seconds: float = 1.0,
        sample_step: float = 1.0,
        shrink_distance: float = 10.0,
        target_length: int | None = None,
        dt: float = 0.1,
    ):
        self.n_seconds = n_seconds
        self.sample_step = sample_step
        self.shrink_distance = shrink_distance
        self.target_length = target_length
        self.dt = dt

    def _make_params(self) -> StitchParams:
        return StitchParams(
            sample_step=self.sample_step, shrink_distance=self.shrink_distance, target_length=self.target_length
        )

    def _stitch_one(self, traj) -> SolutionPath:
        return linear_stitch(traj, self.goal_, self.n_seconds, self.params_)
