"""Pure-pursuit path tracking and retiming under a fixed longitudinal speed profile.

All timed outputs share the same speed profile (hold the initial acceleration,
then decay it to zero at a fixed jerk, clamp the speed), so trajectories of
different methods differ only laterally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geom import Polyline, SEGMENT_EPS, as_point, rotation, wrap_angle

LOOKAHEAD = 5.0
TURN_RADIUS = 5.0
TURN_RADIUS_LARGE = 10.0
OUTPUT_DT = 0.1
HORIZON_STEPS = 60


@dataclass(frozen=True)
class ActorState:
    position: np.ndarray
    heading: float
    speed: float
    acceleration: float = 0.0
    length: float = 4.5
    width: float = 2.0
    is_large: bool = False

    def __post_init__(self):
        object.__setattr__(self, "position", as_point(self.position))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))
        if self.speed < 0:
            raise ValueError("speed must be nonnegative")
        if not (self.length > 0 and self.width > 0):
            raise ValueError("actor dimensions must be positive")

    @property
    def min_turn_radius(self) -> float:
        return TURN_RADIUS_LARGE if self.is_large else TURN_RADIUS


@dataclass(frozen=True)
class SpeedProfileParams:
    hold_duration: float = 2.0
    jerk: float = 1.0
    v_min: float = 0.0
    v_max: float = 15.0

    def __post_init__(self):
        if self.hold_duration < 0 or self.jerk <= 0 or self.v_min > self.v_max:
            raise ValueError("invalid speed profile parameters")


class SpeedProfile:
    """Speed, acceleration and travelled distance over time from an initial ``(v0, a0)``.

    The acceleration never changes sign, so speed is monotone and a clamp,
    once hit, holds for the rest of the profile. That makes clamping pointwise
    in time equivalent to clamping the unclamped speed curve.
    """

    def __init__(self, v0: float, a0: float, params: SpeedProfileParams | None = None):
        self.params = params or SpeedProfileParams()
        p = self.params
        self.v0 = min(max(float(v0), p.v_min), p.v_max)
        self.a0 = float(a0)
        # piecewise polynomial speed: (t_start, t_end, v_start, a_start, jerk)
        sign = math.copysign(1.0, self.a0) if self.a0 != 0 else 0.0
        t_decay = abs(self.a0) / p.jerk
        v_hold = self.v0 + self.a0 * p.hold_duration
        self._pieces = [
            (0.0, p.hold_duration, self.v0, self.a0, 0.0),
            (p.hold_duration, p.hold_duration + t_decay, v_hold, self.a0, -sign * p.jerk),
        ]
        self._t_end = p.hold_duration + t_decay
        self._v_end = v_hold + 0.5 * self.a0 * t_decay
        self._clamp = self._find_clamp()

    def _find_clamp(self):
        """First time the unclamped speed leaves [v_min, v_max], with the bound hit."""
        p = self.params
        if self.a0 == 0:
            return None
        bound = p.v_max if self.a0 > 0 else p.v_min
        for t0, t1, v, a, j in self._pieces:
            if t1 <= t0:
                continue
            # v + a u + j u^2 / 2 = bound, smallest root in [0, t1 - t0]
            roots = np.roots([0.5 * j, a, v - bound]) if j != 0 else ([(bound - v) / a] if a != 0 else [])
            cands = [float(r.real) for r in np.atleast_1d(roots) if abs(np.imag(r)) < 1e-12]
            cands = [u for u in cands if -1e-12 <= u <= t1 - t0 + 1e-12]
            if cands:
                u = max(0.0, min(cands))
                return t0 + u, bound
        return None

    def _raw_speed(self, t: float) -> float:
        for t0, t1, v, a, j in self._pieces:
            if t < t1:
                u = t - t0
                return v + a * u + 0.5 * j * u * u
        return self._v_end

    def _raw_distance(self, t: float) -> float:
        dist = 0.0
        for t0, t1, v, a, j in self._pieces:
            if t1 <= t0:
                continue
            u = min(t, t1) - t0
            if u <= 0:
                return dist
            dist += v * u + 0.5 * a * u * u + j * u**3 / 6.0
            if t <= t1:
                return dist
        return dist + self._v_end * (t - self._t_end)

    def speed(self, t: float) -> float:
        if t < 0:
            raise ValueError("time must be nonnegative")
        if self._clamp is not None and t >= self._clamp[0]:
            return self._clamp[1]
        p = self.params
        return min(max(self._raw_speed(t), p.v_min), p.v_max)

    def acceleration(self, t: float) -> float:
        if self._clamp is not None and t >= self._clamp[0]:
            return 0.0
        for t0, t1, v, a, j in self._pieces:
            if t < t1:
                return a + j * (t - t0)
        return 0.0

    def distance(self, t: float) -> float:
        """Distance travelled in ``[0, t]``."""
        if t <= 0:
            return 0.0
        if self._clamp is not None and t >= self._clamp[0]:
            tc, bound = self._clamp
            return self._raw_distance(tc) + bound * (t - tc)
        return self._raw_distance(t)


def profile_speed(v0: float, a0: float, t: float, params: SpeedProfileParams | None = None) -> float:
    return SpeedProfile(v0, a0, params).speed(t)


@dataclass(frozen=True, eq=False)
class TimedTrajectory:
    """States sampled every ``dt`` seconds; ``positions[k]`` is at time ``k * dt``."""

    dt: float
    positions: np.ndarray
    headings: np.ndarray | None = None
    speeds: np.ndarray | None = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.positions))

    def at(self, t: float) -> np.ndarray:
        k = int(round(t / self.dt))
        if not 0 <= k < len(self.positions):
            raise IndexError(f"no sample at t={t}")
        return self.positions[k]

    def track(self) -> Polyline:
        return Polyline(self.positions, dedupe=True)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TimedTrajectory)
            and self.dt == other.dt
            and np.array_equal(self.positions, other.positions)
        )


def pure_pursuit_step(
    state: ActorState,
    path: Polyline,
    lookahead: float,
    step_dt: float,
    profile: SpeedProfile,
    elapsed: float,
) -> ActorState:
    """Advance ``state`` by one controller step of ``step_dt`` seconds.

    ``elapsed`` is the time of ``state`` on ``profile``; the travelled distance
    is the profile's distance over ``[elapsed, elapsed + step_dt]``.
    """
    if lookahead <= 0:
        raise ValueError("lookahead must be positive")
    _, s = path.project(state.position)
    target = path.point_at(min(s + lookahead, path.length))
    local = (target - state.position) @ rotation(state.heading)
    dist2 = float(local @ local)
    if dist2 < SEGMENT_EPS**2 or (s >= path.length - SEGMENT_EPS and local[0] <= 0):
        # path exhausted: hold position
        return replace(state, speed=0.0, acceleration=0.0)
    kappa = 2.0 * local[1] / dist2
    k_max = 1.0 / state.min_turn_radius
    kappa = min(max(kappa, -k_max), k_max)
    ds = profile.distance(elapsed + step_dt) - profile.distance(elapsed)
    position, heading = arc_advance(state.position, state.heading, kappa, ds)
    return replace(
        state,
        position=position,
        heading=heading,
        speed=profile.speed(elapsed + step_dt),
        acceleration=profile.acceleration(elapsed + step_dt),
    )


def arc_advance(position, heading: float, kappa: float, ds: float):
    """Exact motion along a circular arc of curvature ``kappa`` for distance ``ds``."""
    x, y = position
    turn = kappa * ds
    if abs(turn) < 1e-12:
        return np.array([x + ds * math.cos(heading), y + ds * math.sin(heading)]), heading
    h1 = heading + turn
    x += (math.sin(h1) - math.sin(heading)) / kappa
    y += (math.cos(heading) - math.cos(h1)) / kappa
    return np.array([x, y]), wrap_angle(h1)


def rollout(
    state0: ActorState,
    path: Polyline,
    horizon_steps: int = HORIZON_STEPS,
    output_dt: float = OUTPUT_DT,
    lookahead: float = LOOKAHEAD,
    profile: SpeedProfileParams | None = None,
) -> TimedTrajectory:
    """Track ``path`` with pure pursuit, two controller steps per output sample.

    The result holds ``horizon_steps + 1`` samples, the first being ``state0``.
    """
    speed = SpeedProfile(state0.speed, state0.acceleration, profile)
    sub_dt = 0.5 * output_dt
    state = state0
    positions = [state.position]
    headings = [state.heading]
    speeds = [speed.speed(0.0)]
    for k in range(horizon_steps):
        for j in range(2):
            state = pure_pursuit_step(state, path, lookahead, sub_dt, speed, k * output_dt + j * sub_dt)
        positions.append(state.position)
        headings.append(state.heading)
        speeds.append(state.speed)
    return TimedTrajectory(output_dt, np.array(positions), np.array(headings), np.array(speeds))


def retime(
    path_points,
    state0: ActorState,
    profile: SpeedProfileParams | None = None,
    output_dt: float = OUTPUT_DT,
    horizon_steps: int = HORIZON_STEPS,
) -> TimedTrajectory:
    """Place the actor along ``path_points`` at the distances the speed profile dictates.

    Beyond the last point the path is extended straight along its terminal heading.
    """
    line = Polyline(path_points, dedupe=True)
    speed = SpeedProfile(state0.speed, state0.acceleration, profile)
    arcs = np.array([speed.distance(k * output_dt) for k in range(horizon_steps + 1)])
    positions = line.point_at(arcs)
    over = arcs > line.length
    if np.any(over):
        t = line.tangent_at(line.length)
        positions[over] = line.end + (arcs[over] - line.length)[:, None] * t
    speeds = np.array([speed.speed(k * output_dt) for k in range(horizon_steps + 1)])
    return TimedTrajectory(output_dt, positions, speeds=speeds)
