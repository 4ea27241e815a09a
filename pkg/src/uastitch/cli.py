"""Command-line experiment runner.

Verbs: ``generate`` (scenario file), ``run`` (metrics CSV), ``sweep`` (one CSV
per (lambda0, alpha) cell plus a combined table) and ``render`` (SVG scene).
Settings come from an optional JSON config with ``generator``, ``stitch``,
``run`` and ``sweep`` sections; command-line flags override it.

Exit status is 0 on success, 2 for usage, config or input errors and 1 for
any other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import __version__
from .benchmark import METHODS, cell_label, check_methods, details_csv, method_outputs, run_all, sweep_params
from .evaluation import NoGoalError, select_goal_path, select_mode
from .render import render_scene
from .scenarios import GeneratorConfig, ScenarioFormatError, generate, load, save
from .stitcher import StitchParams

logger = logging.getLogger("uastitch")

DEFAULT_GRID = ((0.55, 0.5), (10.0, 0.8), (0.01, 0.2), (0.55, None))
CONFIG_SECTIONS = ("generator", "stitch", "run", "sweep")
TRACKING = ("pp", "retime")


class UsageError(Exception):
    """Bad flags, config or input files; reported with exit status 2."""


def _alpha(text: str) -> float | None:
    if text.strip().lower() in ("-", "none", "const"):
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must be a number or '-', got {text!r}") from None


def _grid(text: str) -> list[tuple[float, float | None]]:
    cells = []
    for item in text.split(","):
        try:
            lam, alpha = item.split(":")
            cells.append((float(lam), _alpha(alpha)))
        except (ValueError, argparse.ArgumentTypeError):
            raise argparse.ArgumentTypeError(f"grid cells look like 0.55:0.5 or 0.55:-, got {item!r}") from None
    return cells


def _methods(text: str) -> list[str]:
    return [m.strip() for m in text.split(",") if m.strip()]


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path}: top level must be an object")
    unknown = set(data) - set(CONFIG_SECTIONS)
    if unknown:
        raise UsageError(f"config {path}: unknown sections {sorted(unknown)}")
    return data


def stitch_params(config: dict, args) -> StitchParams:
    section = dict(config.get("stitch", {}))
    known = {f.name for f in fields(StitchParams)}
    unknown = set(section) - known
    if unknown:
        raise UsageError(f"unknown stitch settings {sorted(unknown)}")
    if "alpha" in section and section["alpha"] is None:
        section["alpha"], section["adaptive"] = 0.5, False
    try:
        params = StitchParams(**section)
        if getattr(args, "lambda0", None) is not None:
            params = replace(params, lambda0=args.lambda0)
        if getattr(args, "alpha", False) is not False:
            params = sweep_params(params, params.lambda0, args.alpha)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad stitch settings: {exc}") from exc
    return params


def read_scenarios(path: str):
    try:
        return load(path)
    except OSError as exc:
        raise UsageError(f"cannot read scenarios {path}: {exc.strerror}") from exc
    except ScenarioFormatError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def _write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _run_settings(config: dict, args) -> tuple[list[str], str, int]:
    section = config.get("run", {})
    methods = args.methods if args.methods is not None else section.get("methods", list(METHODS))
    tracking = args.tracking or section.get("tracking", "pp")
    if tracking not in TRACKING:
        raise UsageError(f"tracking must be one of {TRACKING}")
    parallel = args.parallel if args.parallel is not None else int(section.get("parallel", 1))
    try:
        methods = check_methods(methods)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return methods, tracking, max(1, parallel)


# --- verbs ----------------------------------------------------------------------


def cmd_generate(args) -> None:
    config = load_config(args.config)
    data = dict(config.get("generator", {}))
    if args.seed is not None:
        data["seed"] = args.seed
    try:
        gen = GeneratorConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad generator config: {exc}") from exc
    records = generate(gen)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save(records, args.out)
    logger.info("wrote %d scenarios to %s", len(records), args.out)


def cmd_run(args) -> None:
    config = load_config(args.config)
    params = stitch_params(config, args)
    methods, tracking, parallel = _run_settings(config, args)
    records = read_scenarios(args.scenarios)
    table, details = run_all(records, methods, params, tracking, parallel)
    _write(args.out, table.to_csv())
    details_path = args.details or str(Path(args.out).with_suffix("")) + ".details.csv"
    _write(details_path, details_csv(details))
    logger.info("evaluated %d scenarios: %s, %s", len(records), args.out, details_path)


def cmd_sweep(args) -> None:
    config = load_config(args.config)
    base = stitch_params(config, argparse.Namespace())
    _, tracking, parallel = _run_settings(config, argparse.Namespace(methods=["us"], tracking=args.tracking, parallel=args.parallel))
    if args.grid is not None:
        grid = args.grid
    elif args.lambda0 is not None or args.alpha is not False:
        grid = [(args.lambda0 if args.lambda0 is not None else base.lambda0, base.alpha if args.alpha is False else args.alpha)]
    elif "grid" in config.get("sweep", {}):
        grid = [(float(lam), None if a is None else float(a)) for lam, a in config["sweep"]["grid"]]
    else:
        grid = list(DEFAULT_GRID)
    records = read_scenarios(args.scenarios)
    out = Path(args.out)
    combined_rows = []
    header = None
    for lam, alpha in grid:
        try:
            params = sweep_params(base, lam, alpha)
        except ValueError as exc:
            raise UsageError(f"bad grid cell ({lam}, {alpha}): {exc}") from exc
        table, _ = run_all(records, ["us"], params, tracking, parallel)
        text = table.to_csv()
        _write(out / f"{_cell_file(lam, alpha)}.csv", text)
        label = cell_label(lam, alpha)
        lines = text.splitlines()
        header = lines[0]
        combined_rows += [f'"{label}"{line[len("us"):]}' for line in lines[1:]]
    _write(out / "sweep.csv", "\n".join([header or "method,horizon_s,maneuver,mean_cte_m,count", *combined_rows]) + "\n")
    logger.info("swept %d cells over %d scenarios into %s", len(grid), len(records), out)


def _cell_file(lam: float, alpha: float | None) -> str:
    return f"us_l{lam:g}_a{'const' if alpha is None else format(alpha, 'g')}"


def cmd_render(args) -> None:
    config = load_config(args.config)
    params = stitch_params(config, args)
    methods = args.methods if args.methods is not None else ["us", "pp"]
    try:
        methods = check_methods(methods)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    records = {r.id: r for r in read_scenarios(args.scenarios)}
    if args.id not in records:
        raise UsageError(f"no scenario with id {args.id!r}")
    record = records[args.id]
    track = record.gt_track.track()
    try:
        goal = select_goal_path(record.goal_candidates, track, record.actor0.position)
    except NoGoalError as exc:
        raise UsageError(f"{args.id}: {exc}") from exc
    outputs = method_outputs(record, methods, params, args.tracking or "pp")
    svg = render_scene(
        goal,
        record.goal_candidates,
        record.predicted if args.all_modes else [select_mode(record.predicted, goal)],
        record.gt_track.positions,
        {name: traj.positions for name, traj in outputs.items()},
        title=f"{record.id} ({record.maneuver})",
    )
    _write(args.out, svg)


# --- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uastitch", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenarios=True):
        p.add_argument("--config", help="JSON config file")
        if scenarios:
            p.add_argument("--scenarios", required=True, help="scenario file written by `generate`")

    def stitch_flags(p):
        p.add_argument("--lambda0", type=float, help="base regularization weight")
        p.add_argument("--alpha", type=_alpha, default=False, help="compatibility threshold, or '-' for constant lambda")

    def run_flags(p, methods=True):
        if methods:
            p.add_argument("--methods", type=_methods, help=f"comma list from {','.join(METHODS)} (lsN allowed)")
        p.add_argument("--tracking", choices=TRACKING, help="how spatial paths are timed (default pp)")
        p.add_argument("--parallel", type=int, help="worker processes")

    p = sub.add_parser("generate", help="write a synthetic scenario file")
    common(p, scenarios=False)
    p.add_argument("--seed", type=int, help="override the generator seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="evaluate methods and write a metrics CSV")
    common(p)
    stitch_flags(p)
    run_flags(p)
    p.add_argument("--out", required=True, help="metrics CSV path")
    p.add_argument("--details", help="per-scenario CSV path (default: <out>.details.csv)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="evaluate stitching over a (lambda0, alpha) grid")
    common(p)
    stitch_flags(p)
    run_flags(p, methods=False)
    p.add_argument("--grid", type=_grid, help="cells like 0.55:0.5,10:0.8,0.55:-")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("render", help="draw one scenario as SVG")
    common(p)
    stitch_flags(p)
    p.add_argument("--id", required=True, help="scenario id")
    p.add_argument("--methods", type=_methods, help="methods to overlay (default us,pp; empty for none)")
    p.add_argument("--tracking", choices=TRACKING)
    p.add_argument("--all-modes", action="store_true", help="draw every predicted mode, not just the selected one")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"uastitch {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        logger.debug("failure", exc_info=True)
        print(f"uastitch {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
