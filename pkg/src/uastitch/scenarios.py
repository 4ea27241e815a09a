"""Synthetic driving scenarios: lane geometry, corner-cutting ground truth and a
simulated uncertainty-aware short-term predictor, plus JSON persistence."""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .geom import OrientedBox, Polyline, box_intersects_polyline, normal_at, resample
from .stitcher import PredictedTrajectory
from .tracker import HORIZON_STEPS, OUTPUT_DT, ActorState, SpeedProfileParams, TimedTrajectory, retime

SCHEMA_VERSION = 1
MANEUVERS = ("straight", "left_turn", "right_turn", "intersection_straight_vs_turn", "u_turn")
LEAD_BEHIND = 10.0
LEAD_OUT = 130.0
ARC_CHORD = 0.5
CUT_PER_CURVATURE = 20.0
CUT_CAP = 1.5
CURVATURE_WINDOW = 4.0
LANE_WIDTH = 3.7


class ScenarioFormatError(ValueError):
    """A scenario file could not be parsed."""


@dataclass(frozen=True)
class Divergence:
    """Lateral drift of the predicted means: ``rate`` m/s (signed, left positive) from ``start`` s.

    The drift is applied along the normal of ``reference`` when given, else
    along the left normal of the direction of motion.
    """

    start: float
    rate: float
    reference: Polyline | None = None


@dataclass
class GeneratorConfig:
    counts: dict = field(
        default_factory=lambda: {
            "straight": 807,
            "left_turn": 60,
            "right_turn": 53,
            "intersection_straight_vs_turn": 60,
            "u_turn": 20,
        }
    )
    radius_range: tuple = (8.0, 25.0)
    speed_range: tuple = (4.0, 12.0)
    accel_range: tuple = (-0.5, 0.5)
    corner_cut_gain: float = 1.0
    noise: float = 0.3
    growth: float = 0.5
    base_variance: float = 0.25
    aspect_range: tuple = (0.25, 1.0)
    divergence_fraction: float = 0.3
    divergence_start_range: tuple = (1.0, 3.0)
    divergence_severity_range: tuple = (1.3, 1.6)
    n_modes: int = 3
    large_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        unknown = set(self.counts) - set(MANEUVERS)
        if unknown:
            raise ValueError(f"unknown maneuvers in counts: {sorted(unknown)}")
        if any(int(n) < 0 for n in self.counts.values()):
            raise ValueError("counts must be nonnegative")
        for name in ("radius_range", "speed_range", "accel_range", "aspect_range",
                     "divergence_start_range", "divergence_severity_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} is empty")
            setattr(self, name, (float(lo), float(hi)))
        if self.radius_range[0] < 5.0:
            raise ValueError("turn radius must be >= 5 m")
        if self.speed_range[0] <= 0:
            raise ValueError("speeds must be positive")
        if not 0 <= self.corner_cut_gain <= 1:
            raise ValueError("corner_cut_gain must lie in [0, 1]")
        if not 0 <= self.divergence_fraction <= 1 or not 0 <= self.large_fraction <= 1:
            raise ValueError("fractions must lie in [0, 1]")
        if not 0 < self.aspect_range[0] <= self.aspect_range[1] <= 1:
            raise ValueError("aspect_range must lie in (0, 1]")
        if self.noise < 0 or self.growth < 0 or self.base_variance <= 0:
            raise ValueError("noise, growth must be >= 0 and base_variance > 0")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> GeneratorConfig:
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


@dataclass(frozen=True, eq=False)
class ScenarioRecord:
    id: str
    maneuver: str
    goal_candidates: list
    gt_track: TimedTrajectory
    predicted: list
    actor0: ActorState
    rng_seed: int
    diverging: bool = False

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScenarioRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.maneuver == other.maneuver
            and self.rng_seed == other.rng_seed
            and self.diverging == other.diverging
            and self.goal_candidates == other.goal_candidates
            and self.gt_track == other.gt_track
            and self.predicted == other.predicted
            and _actor_to_dict(self.actor0) == _actor_to_dict(other.actor0)
        )


# --- geometry ---------------------------------------------------------------


def _arc_points(center, radius, theta0, sweep):
    n = max(2, int(math.ceil(abs(sweep) * radius / ARC_CHORD)))
    ang = theta0 + sweep * np.arange(1, n + 1) / n
    return center + radius * np.column_stack([np.cos(ang), np.sin(ang)])


def gen_goal(maneuver: str, radius: float, rng: np.random.Generator, lead: float | None = None) -> Polyline:
    """Lane centerline starting ``LEAD_BEHIND`` m behind the origin, heading +x.

    Turns start ``lead`` m ahead of the origin (sampled when omitted) and are
    circular arcs sampled at chords of at most ``ARC_CHORD`` m. The
    intersection maneuver yields its turning branch.
    """
    if radius < 5.0:
        raise ValueError("radius must be >= 5 m")
    if maneuver not in MANEUVERS:
        raise ValueError(f"unknown maneuver {maneuver!r}")
    if lead is None:
        lead = float(rng.uniform(5.0, 25.0))
    start = np.array([-LEAD_BEHIND, 0.0])
    if maneuver == "straight":
        return Polyline([start, [lead + LEAD_OUT + 60.0, 0.0]])
    if maneuver == "intersection_straight_vs_turn":
        maneuver = "left_turn" if rng.random() < 0.5 else "right_turn"
    turn_start = np.array([lead, 0.0])
    side = -1.0 if maneuver == "right_turn" else 1.0
    sweep = side * (math.pi if maneuver == "u_turn" else math.pi / 2)
    center = turn_start + np.array([0.0, side * radius])
    arc = _arc_points(center, radius, -side * math.pi / 2, sweep)
    heading = sweep
    lead_out = arc[-1] + LEAD_OUT * np.array([math.cos(heading), math.sin(heading)])
    return Polyline(np.vstack([start, turn_start, arc, lead_out]))


def lateral_offset_line(line: Polyline, offset: float) -> Polyline:
    """Polyline shifted sideways by ``offset`` (left positive) along vertex normals."""
    v = line.vertices
    seg = np.diff(v, axis=0)
    seg /= np.hypot(seg[:, 0], seg[:, 1])[:, None]
    tang = np.vstack([seg[:1], seg[:-1] + seg[1:], seg[-1:]])
    tang /= np.hypot(tang[:, 0], tang[:, 1])[:, None]
    normals = np.column_stack([-tang[:, 1], tang[:, 0]])
    return Polyline(v + offset * normals, dedupe=True)


def curvature_profile(line: Polyline) -> np.ndarray:
    """Signed discrete curvature at each vertex (0 at the ends)."""
    v = line.vertices
    seg = np.diff(v, axis=0)
    lens = np.hypot(seg[:, 0], seg[:, 1])
    ang = np.arctan2(seg[:, 1], seg[:, 0])
    turn = (np.diff(ang) + math.pi) % (2 * math.pi) - math.pi
    kappa = np.zeros(len(v))
    kappa[1:-1] = turn / (0.5 * (lens[:-1] + lens[1:]))
    return kappa


def warp_inward(goal: Polyline, cut_gain: float) -> Polyline:
    """Goal shifted toward the inside of its curves, emulating corner cutting."""
    dense = resample(goal, ARC_CHORD)
    kappa = curvature_profile(dense)
    half = int(round(CURVATURE_WINDOW / ARC_CHORD))
    kernel = np.ones(2 * half + 1) / (2 * half + 1)
    smooth = np.convolve(np.pad(kappa, half, mode="edge"), kernel, mode="valid")
    offset = cut_gain * np.sign(smooth) * np.minimum(CUT_PER_CURVATURE * np.abs(smooth), CUT_CAP)
    offset[np.abs(smooth) < 1e-12] = 0.0
    v = dense.vertices
    seg = np.diff(v, axis=0)
    seg /= np.hypot(seg[:, 0], seg[:, 1])[:, None]
    tang = np.vstack([seg[:1], seg[:-1] + seg[1:], seg[-1:]])
    tang /= np.hypot(tang[:, 0], tang[:, 1])[:, None]
    normals = np.column_stack([-tang[:, 1], tang[:, 0]])
    return Polyline(v + offset[:, None] * normals, dedupe=True)


def gen_ground_truth(
    goal: Polyline,
    cut_gain: float,
    state0: ActorState,
    profile: SpeedProfileParams | None = None,
    horizon_steps: int = HORIZON_STEPS,
) -> TimedTrajectory:
    """Corner-cutting ground truth retimed from ``state0`` under the shared speed profile."""
    if not 0 <= cut_gain <= 1:
        raise ValueError("cut_gain must lie in [0, 1]")
    warped = warp_inward(goal, cut_gain) if cut_gain > 0 else goal
    _, s0 = warped.project(state0.position)
    path = warped.sub(s0, warped.length)
    pts = np.vstack([state0.position, path.vertices[1:]])
    return retime(pts, state0, profile, OUTPUT_DT, horizon_steps)


# --- predictions ------------------------------------------------------------


def _smooth_noise(rng: np.random.Generator, n: int, width: float = 8.0) -> np.ndarray:
    """Unit-variance, temporally correlated 2-D noise of length ``n``."""
    half = int(3 * width)
    x = np.arange(-half, half + 1)
    kernel = np.exp(-0.5 * (x / width) ** 2)
    kernel /= np.sqrt(np.sum(kernel**2))
    white = rng.standard_normal((n + 2 * half, 2))
    return np.column_stack([np.convolve(white[:, i], kernel, mode="valid") for i in range(2)])


def _motion_directions(points: np.ndarray) -> np.ndarray:
    n = len(points)
    out = np.empty(n)
    for i in range(n):
        d = points[min(i + 1, n - 1)] - points[max(i - 1, 0)]
        out[i] = math.atan2(d[1], d[0]) if np.hypot(*d) > 1e-9 else (out[i - 1] if i else 0.0)
    return out


def apply_drift(means: np.ndarray, dt: float, divergence: Divergence) -> np.ndarray:
    means = np.array(means, dtype=float)
    t = dt * np.arange(1, len(means) + 1)
    ramp = divergence.rate * np.maximum(0.0, t - divergence.start)
    if divergence.reference is not None:
        arcs = divergence.reference.project_many(means)[1]
        normals = np.array([normal_at(divergence.reference, s) for s in arcs])
    else:
        theta = _motion_directions(means)
        normals = np.column_stack([-np.sin(theta), np.cos(theta)])
    return means + ramp[:, None] * normals


def gen_prediction(
    gt: TimedTrajectory,
    noise: float,
    growth: float,
    divergence: Divergence | None,
    rng: np.random.Generator,
    base_variance: float = 0.25,
    aspect: float | None = None,
    horizon: int = HORIZON_STEPS,
) -> PredictedTrajectory:
    """Simulated learned prediction around the ground-truth positions.

    Means are the ground truth plus smooth noise whose scale grows with the
    horizon; covariances grow linearly in time and are elongated along the
    direction of motion with lateral/longitudinal variance ratio ``aspect``.
    """
    if len(gt) < horizon + 1:
        raise ValueError(f"ground truth needs {horizon + 1} samples")
    dt = gt.dt
    truth = gt.positions[1 : horizon + 1]
    if aspect is None:
        aspect = float(rng.uniform(0.25, 1.0))
    ramp = 0.25 + 0.75 * np.arange(1, horizon + 1) / horizon
    means = truth + noise * ramp[:, None] * _smooth_noise(rng, horizon)
    if divergence is not None:
        means = apply_drift(means, dt, divergence)
    theta = _motion_directions(gt.positions[: horizon + 2])[1 : horizon + 1]
    scale = base_variance + growth * dt * np.arange(1, horizon + 1)
    c, s = np.cos(theta), np.sin(theta)
    covs = np.empty((horizon, 2, 2))
    covs[:, 0, 0] = scale * (c * c + aspect * s * s)
    covs[:, 1, 1] = scale * (s * s + aspect * c * c)
    covs[:, 0, 1] = covs[:, 1, 0] = scale * (1.0 - aspect) * c * s
    return PredictedTrajectory(dt, means, covs)


# --- records ----------------------------------------------------------------


def record_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0] >> 1)


def gen_record(
    index: int, maneuver: str, config: GeneratorConfig, rng_seed: int | None = None, diverging: bool | None = None
) -> ScenarioRecord:
    """One scenario, fully determined by ``rng_seed`` and ``config``."""
    if rng_seed is None:
        rng_seed = record_seed(config.seed, index)
    rng = np.random.default_rng(rng_seed)
    is_large = bool(rng.random() < config.large_fraction)
    length = float(rng.uniform(10.0, 12.0) if is_large else rng.uniform(4.3, 5.0))
    width = float(2.5 if is_large else rng.uniform(1.8, 2.0))
    radius = float(rng.uniform(*config.radius_range))
    if is_large:
        radius = max(radius, 12.0)
    lead = float(rng.uniform(5.0, 25.0))
    goal = gen_goal(maneuver, radius, rng, lead=lead)
    candidates = [goal]
    straight = None
    if maneuver == "intersection_straight_vs_turn":
        straight = gen_goal("straight", radius, rng, lead=lead)
        candidates.append(straight)
    neighbor_side = 1.0 if rng.random() < 0.5 else -1.0
    candidates.append(lateral_offset_line(goal, neighbor_side * LANE_WIDTH))
    candidates.append(Polyline(goal.vertices + np.array([0.0, 250.0])))
    order = rng.permutation(len(candidates))
    candidates = [candidates[i] for i in order]

    v0 = float(rng.uniform(*config.speed_range))
    a0 = float(rng.uniform(*config.accel_range))
    cut = config.corner_cut_gain * float(rng.uniform(0.5, 1.0))
    actor0 = ActorState(np.zeros(2), 0.0, v0, a0, length, width, is_large)
    gt = gen_ground_truth(goal, cut, actor0)

    if diverging is None:
        diverging = maneuver != "intersection_straight_vs_turn" and bool(rng.random() < config.divergence_fraction)
    aspect = float(rng.uniform(*config.aspect_range))
    source = gt
    if straight is not None:
        # the predictor commits to the wrong branch
        source = gen_ground_truth(straight, 0.0, actor0)
    turning = float(np.sum(curvature_profile(goal)))
    coin = 1.0 if rng.random() < 0.5 else -1.0
    # drift goes to the outside of a turn (the prediction under-turns)
    outward = -math.copysign(1.0, turning) if abs(turning) > 0.1 else coin
    main = gen_prediction(source, config.noise, config.growth, None, rng, config.base_variance, aspect)
    base_means = main.means
    if diverging:
        main = _calibrated_drift(main, goal, length, width, outward, config, rng, aspect)
    modes = [main]
    reference = straight if straight is not None else goal
    for _ in range(config.n_modes - 1):
        # alternates stray further from the goal than the main mode
        side = outward if diverging or straight is not None else (1.0 if rng.random() < 0.5 else -1.0)
        drift = Divergence(float(rng.uniform(0.3, 1.0)), side * float(rng.uniform(1.5, 2.5)), reference)
        modes.append(PredictedTrajectory(main.dt, apply_drift(base_means, main.dt, drift), main.covs))
    order = rng.permutation(len(modes))
    modes = [modes[i] for i in order]
    return ScenarioRecord(f"{maneuver}-{index:05d}", maneuver, candidates, gt, modes, actor0, rng_seed, diverging)


def _terminal_gap(means: np.ndarray, goal: Polyline, length: float, width: float) -> float:
    """Distance from the goal to the nearest corner of the last footprint (0 if they overlap)."""
    d = means[-1] - means[-2]
    box = OrientedBox(means[-1], math.atan2(d[1], d[0]), length, width)
    if box_intersects_polyline(box, goal):
        return 0.0
    return float(goal.distances(box.corners()).min())


def _calibrated_drift(pred, goal, length, width, side, config, rng, aspect):
    """Add a lateral drift ramp toward ``side`` whose end point leaves the nearest
    footprint corner a sampled number of lateral standard deviations from the goal."""
    start = float(rng.uniform(*config.divergence_start_range))
    severity = float(rng.uniform(*config.divergence_severity_range))
    horizon_s = pred.dt * len(pred)
    target = severity * math.sqrt(aspect * (config.base_variance + config.growth * horizon_s))

    def drifted(rate):
        return apply_drift(pred.means, pred.dt, Divergence(start, side * rate, goal))

    lo, hi = 0.0, 4.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if _terminal_gap(drifted(mid), goal, length, width) < target:
            lo = mid
        else:
            hi = mid
    return PredictedTrajectory(pred.dt, drifted(hi), pred.covs)


def generate(config: GeneratorConfig) -> list[ScenarioRecord]:
    records = []
    index = 0
    for maneuver in MANEUVERS:
        for _ in range(int(config.counts.get(maneuver, 0))):
            records.append(gen_record(index, maneuver, config))
            index += 1
    return records


# --- persistence ------------------------------------------------------------


def _actor_to_dict(a: ActorState) -> dict:
    return {
        "position": [float(a.position[0]), float(a.position[1])],
        "heading": float(a.heading),
        "speed": float(a.speed),
        "acceleration": float(a.acceleration),
        "length": float(a.length),
        "width": float(a.width),
        "is_large": bool(a.is_large),
    }


def record_to_dict(r: ScenarioRecord) -> dict:
    return {
        "id": r.id,
        "maneuver": r.maneuver,
        "rng_seed": int(r.rng_seed),
        "diverging": bool(r.diverging),
        "actor0": _actor_to_dict(r.actor0),
        "goal_candidates": [g.vertices.tolist() for g in r.goal_candidates],
        "gt_track": {"dt": r.gt_track.dt, "positions": r.gt_track.positions.tolist()},
        "predicted": [{"dt": p.dt, "means": p.means.tolist(), "covs": p.covs.tolist()} for p in r.predicted],
    }


def _need(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ScenarioFormatError(f"{where}: missing field '{key}'")
    return obj[key]


def record_from_dict(d: dict, where: str = "record") -> ScenarioRecord:
    try:
        a = _need(d, "actor0", where)
        actor = ActorState(
            np.array(_need(a, "position", f"{where}.actor0"), dtype=float),
            _need(a, "heading", f"{where}.actor0"),
            _need(a, "speed", f"{where}.actor0"),
            _need(a, "acceleration", f"{where}.actor0"),
            _need(a, "length", f"{where}.actor0"),
            _need(a, "width", f"{where}.actor0"),
            bool(_need(a, "is_large", f"{where}.actor0")),
        )
        gt = _need(d, "gt_track", where)
        preds = _need(d, "predicted", where)
        maneuver = _need(d, "maneuver", where)
        if maneuver not in MANEUVERS:
            raise ScenarioFormatError(f"{where}.maneuver: unknown value {maneuver!r}")
        return ScenarioRecord(
            id=str(_need(d, "id", where)),
            maneuver=maneuver,
            goal_candidates=[Polyline(g) for g in _need(d, "goal_candidates", where)],
            gt_track=TimedTrajectory(_need(gt, "dt", f"{where}.gt_track"), _need(gt, "positions", f"{where}.gt_track")),
            predicted=[
                PredictedTrajectory(
                    _need(p, "dt", f"{where}.predicted[{i}]"),
                    _need(p, "means", f"{where}.predicted[{i}]"),
                    _need(p, "covs", f"{where}.predicted[{i}]"),
                )
                for i, p in enumerate(preds)
            ],
            actor0=actor,
            rng_seed=int(_need(d, "rng_seed", where)),
            diverging=bool(d.get("diverging", False)),
        )
    except ScenarioFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"{where}: {exc}") from exc


def dumps(records) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "records": [record_to_dict(r) for r in records]}
    # float repr round-trips exactly
    return json.dumps(doc, indent=1) + "\n"


def loads(text: str) -> list[ScenarioRecord]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        head = text[: exc.pos]
        keys = re.findall(r'"([A-Za-z_0-9]+)"\s*:', head)
        ctx = f" while reading field '{keys[-1]}'" if keys else ""
        rec = len(re.findall(r'"id"\s*:', head)) - 1
        where = f" (record {rec})" if rec >= 0 else ""
        raise ScenarioFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}{ctx}{where}") from exc
    version = _need(doc, "schema_version", "document")
    if version != SCHEMA_VERSION:
        raise ScenarioFormatError(f"unsupported schema_version {version!r}")
    return [record_from_dict(d, f"records[{i}]") for i, d in enumerate(_need(doc, "records", "document"))]


def save(records, path) -> None:
    Path(path).write_text(dumps(records), encoding="utf-8")


def load(path) -> list[ScenarioRecord]:
    return loads(Path(path).read_text(encoding="utf-8"))
