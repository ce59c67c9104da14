"""Command-line entry point.

Exit codes: 0 success, 1 analysis-negative result, 2 usage or config error.
Config errors are detected before anything is written.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import reports
from .cspace import ConfigGrid, check_caging
from .geometry import Polygon, Pose2, disc
from .jig import FixtureKind, InflationState, ShellJig
from .pullout import PROTOCOL_DEVIATIONS_DEG, deviation_sweep, noisy_trials, simulate_pullout, trial_statistics
from .scenarios import (
    FIXTURE_ORDER,
    OBJECT_NAMES,
    ChamberRanges,
    CalibrationTarget,
    ScenarioLibrary,
    calibrate,
    design_sweep,
    dump_library,
    load_library,
    table_target,
)

log = logging.getLogger("softjig")

EXIT_OK, EXIT_NEGATIVE, EXIT_CONFIG = 0, 1, 2
GRID_XY_BOUNDS = (16, 512)
GRID_THETA_BOUNDS = (8, 360)
# probe object well inside every membrane apex: never caged by the default jig
PROBE_OBJECTS = {"tiny-disc": lambda: disc(5.0)}

JIG_KEYS = {
    "inner_radius_mm",
    "outer_radius_mm",
    "n_modules",
    "cavity_width_mm",
    "wall_thickness_mm",
    "height_mm",
    "arc_span_deg",
    "max_protrusion_mm",
    "workspace_bound_mm",
}
DESIGN_KEYS = {"inner_radius_mm", "max_protrusion_mm", "span_fraction", "cavity_width_mm", "wall_thickness_mm", "module_counts", "grid"}
TOP_KEYS = {
    "object",
    "fixture",
    "deviation_deg",
    "inflation",
    "grid",
    "seed",
    "out",
    "trials",
    "noise_N",
    "budget",
    "library",
    "target_csv",
    "jig",
    "design",
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    object: str | None = None
    fixture: str | None = None
    deviation_deg: float = 0.0
    inflation: float = 1.0
    grid: tuple[int, int, int] = (64, 64, 32)
    seed: int = 0
    out: str = "out"
    trials: int = 1
    noise_N: float = 0.0
    budget: int = 2000
    library: str | None = None
    target_csv: str | None = None
    jig: dict = field(default_factory=dict)
    design: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# config parsing


def _parse_grid(value) -> tuple[int, int, int]:
    if isinstance(value, str):
        parts = value.split(",")
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"grid must be NX,NY,NT, got {value!r}")
    try:
        nx, ny, nt = (int(p) for p in parts)
    except (TypeError, ValueError):
        raise ConfigError(f"grid must be three integers NX,NY,NT, got {value!r}") from None
    lo, hi = GRID_XY_BOUNDS
    if not (lo <= nx <= hi and lo <= ny <= hi):
        raise ConfigError(f"grid NX and NY must lie in [{lo}, {hi}]")
    lo, hi = GRID_THETA_BOUNDS
    if not lo <= nt <= hi:
        raise ConfigError(f"grid NT must lie in [{lo}, {hi}]")
    return nx, ny, nt


def _number(value, name: str, lo: float | None = None, hi: float | None = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{name} must be a finite number")
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise ConfigError(f"{name} must lie in [{lo}, {hi}]")
    return float(value)


def _integer(value, name: str, lo: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < lo:
        raise ConfigError(f"{name} must be an integer >= {lo}")
    return value


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def build_config(args: argparse.Namespace) -> RunConfig:
    data = load_config(args.config)
    flags = {
        "object": args.object,
        "fixture": args.fixture,
        "deviation_deg": args.deviation_deg,
        "inflation": args.inflation,
        "grid": args.grid,
        "seed": args.seed,
        "out": args.out,
        "trials": args.trials,
        "noise_N": args.noise,
        "budget": getattr(args, "budget", None),
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    cfg = RunConfig()
    if "object" in data:
        if not isinstance(data["object"], str):
            raise ConfigError("object must be a name or a path")
        cfg.object = data["object"]
    if "fixture" in data:
        try:
            cfg.fixture = FixtureKind(data["fixture"]).value
        except ValueError:
            raise ConfigError(f"fixture must be one of vise, jamming, shell, got {data['fixture']!r}") from None
    if "deviation_deg" in data:
        cfg.deviation_deg = _number(data["deviation_deg"], "deviation_deg", 0.0, 60.0)
    if "inflation" in data:
        cfg.inflation = _number(data["inflation"], "inflation", 0.0, 1.0)
    if "grid" in data:
        cfg.grid = _parse_grid(data["grid"])
    if "seed" in data:
        cfg.seed = _integer(data["seed"], "seed", 0)
    if "out" in data:
        if not isinstance(data["out"], str) or not data["out"]:
            raise ConfigError("out must be a directory path")
        cfg.out = data["out"]
    if "trials" in data:
        cfg.trials = _integer(data["trials"], "trials", 1)
    if "noise_N" in data:
        cfg.noise_N = _number(data["noise_N"], "noise", 0.0)
    if "budget" in data:
        cfg.budget = _integer(data["budget"], "budget", 1)
    for key in ("library", "target_csv"):
        if key in data:
            if not isinstance(data[key], str):
                raise ConfigError(f"{key} must be a path")
            setattr(cfg, key, data[key])
    for key, allowed in (("jig", JIG_KEYS), ("design", DESIGN_KEYS)):
        if key in data:
            if not isinstance(data[key], dict):
                raise ConfigError(f"{key} must be a JSON object")
            unknown = set(data[key]) - allowed
            if unknown:
                raise ConfigError(f"unknown {key} keys: {sorted(unknown)}")
            setattr(cfg, key, dict(data[key]))
    return cfg


def resolve_library(cfg: RunConfig) -> ScenarioLibrary:
    try:
        return load_library(cfg.library)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot load library: {exc}") from None


def resolve_jig(cfg: RunConfig, lib: ScenarioLibrary) -> ShellJig:
    base = lib.jig_default
    if not cfg.jig:
        return base
    j = cfg.jig
    try:
        chamber = replace(
            base.chamber,
            cavity_width=_number(j.get("cavity_width_mm", base.chamber.cavity_width), "cavity_width_mm", 0.0),
            wall_thickness=_number(j.get("wall_thickness_mm", base.chamber.wall_thickness), "wall_thickness_mm", 0.0),
            height=_number(j.get("height_mm", base.chamber.height), "height_mm", 0.0),
            arc_span=math.radians(_number(j.get("arc_span_deg", math.degrees(base.chamber.arc_span)), "arc_span_deg")),
            max_protrusion=_number(j.get("max_protrusion_mm", base.chamber.max_protrusion), "max_protrusion_mm", 0.0),
        )
        n = _integer(j.get("n_modules", base.n_modules), "n_modules", 0)
        radius = _number(j.get("inner_radius_mm", base.inner_radius), "inner_radius_mm", 0.0)
        outer = j.get("outer_radius_mm")
        return ShellJig.symmetric(
            inner_radius=radius,
            n_modules=n,
            chamber=chamber,
            outer_radius=None if outer is None else _number(outer, "outer_radius_mm", 0.0),
            workspace_bound=_number(j.get("workspace_bound_mm", 0.0), "workspace_bound_mm", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid jig: {exc}") from None


def resolve_object(name: str | None, lib: ScenarioLibrary) -> tuple[str, Polygon, Pose2]:
    if name is None:
        raise ConfigError("this command needs --object")
    if name in lib.entries:
        e = lib.entries[name]
        return name, e.shape, e.q_obj
    if name in PROBE_OBJECTS:
        return name, PROBE_OBJECTS[name](), Pose2()
    path = Path(name)
    if not path.is_file():
        raise ConfigError(f"unknown object {name!r}; use a library name ({', '.join(OBJECT_NAMES)}) or a polygon file")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        verts = data["vertices_mm"] if isinstance(data, dict) else data
        return path.stem, Polygon(verts), Pose2()
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad polygon file {name}: {exc}") from None


def prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}") from None
    if not out.is_dir():
        raise ConfigError(f"{out} is not a directory")
    return out


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# --------------------------------------------------------------------------
# commands


def cmd_verify(cfg: RunConfig) -> int:
    lib = resolve_library(cfg)
    jig = resolve_jig(cfg, lib)
    name, shape, q_obj = resolve_object(cfg.object, lib)
    grid = ConfigGrid.for_jig(jig, *cfg.grid)
    try:
        grid.index_of(q_obj)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = check_caging(shape, q_obj, jig, grid, full_pressure=InflationState(cfg.inflation))
    out = prepare_out(cfg)
    doc = {
        "object": name,
        "q_obj": {"x_mm": q_obj.x, "y_mm": q_obj.y, "theta_deg": math.degrees(q_obj.theta)},
        "grid": list(cfg.grid),
        "inflation": cfg.inflation,
        "jig": {"inner_radius_mm": jig.inner_radius, "n_modules": jig.n_modules, "max_protrusion_mm": jig.chamber.max_protrusion},
        **report.to_dict(),
    }
    reports.write_text(out / "caging_report.json", _dump_json(doc))
    reports.write_text(out / "rigid_free.svg", reports.free_space_slices_svg(report.rigid_free, jig, f"{name}: rigid-free (u = 0)"))
    reports.write_text(
        out / "soft_free.svg", reports.free_space_slices_svg(report.soft_free, jig, f"{name}: soft-free (u = {cfg.inflation:g})")
    )
    print(f"{name}: cond1={report.cond1_rigid_free_nonempty} cond2={report.cond2_pose_in_free} "
          f"cond3={report.cond3_soft_free_empty} caged={report.caged}")
    return EXIT_OK if report.caged else EXIT_NEGATIVE


def _selection(cfg: RunConfig, lib: ScenarioLibrary) -> tuple[list[str], list[FixtureKind]]:
    if cfg.object is not None and cfg.object not in lib.entries:
        raise ConfigError(f"sweep objects must come from the library, got {cfg.object!r}")
    names = [cfg.object] if cfg.object else list(OBJECT_NAMES)
    kinds = [FixtureKind(cfg.fixture)] if cfg.fixture else list(FIXTURE_ORDER)
    return names, kinds


def cmd_sweep(cfg: RunConfig) -> int:
    lib = resolve_library(cfg)
    jig = resolve_jig(cfg, lib)
    names, kinds = _selection(cfg, lib)
    rows, matrix = [], {}
    for n in names:
        e = lib.entries[n]
        for k in kinds:
            sweep = deviation_sweep(e.scenario, lib.fixture(k), jig, e.shape, e.q_obj)
            for d, r in sweep.rows:
                rows.append({
                    "scenario": n,
                    "fixture": k.value,
                    "deviation_deg": d,
                    "success": r.success,
                    "failure_mode": r.failure_mode.value,
                    "peak_force_N": r.peak_force,
                })
                matrix[(n, k.value, int(d))] = r.success
    out = prepare_out(cfg)
    reports.write_text(out / "sweep.csv", reports.sweep_csv(rows))
    reports.write_text(
        out / "success_matrix.svg",
        reports.success_matrix_svg(names, [k.value for k in kinds], list(PROTOCOL_DEVIATIONS_DEG), matrix),
    )
    print(f"{len(rows)} pull-out attempts, {sum(r['success'] for r in rows)} successful")
    return EXIT_OK


def cmd_pullout(cfg: RunConfig) -> int:
    lib = resolve_library(cfg)
    jig = resolve_jig(cfg, lib)
    if cfg.object is None or cfg.object not in lib.entries:
        raise ConfigError("pullout needs --object naming a library entry")
    if cfg.fixture is None:
        raise ConfigError("pullout needs --fixture")
    e = lib.entries[cfg.object]
    result = simulate_pullout(
        e.scenario, lib.fixture(cfg.fixture), jig, e.shape, e.q_obj, math.radians(cfg.deviation_deg)
    )
    rng = np.random.default_rng(cfg.seed)
    samples = noisy_trials(result, cfg.trials, cfg.noise_N, rng)
    mean, std = trial_statistics(samples)
    out = prepare_out(cfg)
    disp = result.trace[:, 0]
    reports.write_text(out / "trace.csv", reports.trace_csv(disp, mean, std))
    title = f"{cfg.object}, {cfg.fixture}, {cfg.deviation_deg:g} deg ({cfg.trials} trials)"
    reports.write_text(out / "trace.svg", reports.trace_svg(disp, mean, std, title))
    summary = {
        "object": cfg.object,
        "fixture": cfg.fixture,
        "deviation_deg": cfg.deviation_deg,
        "success": result.success,
        "failure_mode": result.failure_mode.value,
        "peak_force_N": result.peak_force,
        "pull_force_N": result.pull_force,
        "final_force_N": result.final_force,
        "trials": cfg.trials,
        "noise_N": cfg.noise_N,
        "seed": cfg.seed,
    }
    reports.write_text(out / "pullout.json", _dump_json(summary))
    print(f"{cfg.object} / {cfg.fixture} / {cfg.deviation_deg:g} deg: {result.failure_mode.value}, "
          f"peak {result.peak_force:.2f} N")
    return EXIT_OK if result.success else EXIT_NEGATIVE


def _float_list(value, name: str) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"design.{name} must be a non-empty list")
    return tuple(_number(v, f"design.{name}") for v in value)


def cmd_design(cfg: RunConfig) -> int:
    lib = resolve_library(cfg)
    d = cfg.design
    base = ChamberRanges()
    try:
        ranges = ChamberRanges(
            inner_radius=_float_list(d["inner_radius_mm"], "inner_radius_mm") if "inner_radius_mm" in d else base.inner_radius,
            max_protrusion=_float_list(d["max_protrusion_mm"], "max_protrusion_mm") if "max_protrusion_mm" in d else base.max_protrusion,
            span_fraction=_float_list(d["span_fraction"], "span_fraction") if "span_fraction" in d else base.span_fraction,
            cavity_width=_float_list(d["cavity_width_mm"], "cavity_width_mm") if "cavity_width_mm" in d else base.cavity_width,
            wall_thickness=_float_list(d["wall_thickness_mm"], "wall_thickness_mm") if "wall_thickness_mm" in d else base.wall_thickness,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    counts = d.get("module_counts", [2, 3, 4])
    if not isinstance(counts, list) or not counts:
        raise ConfigError("design.module_counts must be a non-empty list")
    counts = tuple(_integer(c, "design.module_counts", 1) for c in counts)
    grid = _parse_grid(d["grid"]) if "grid" in d else (32, 32, 16)
    if cfg.object is not None:
        _, shape, q = resolve_object(cfg.object, lib)
        objects, poses = [shape], [q]
    else:
        chosen = [lib.entries[n] for n in OBJECT_NAMES if lib.entries[n].cage_target]
        objects, poses = [e.shape for e in chosen], [e.q_obj for e in chosen]
    try:
        ranked = design_sweep(objects, ranges, counts, grid_shape=grid, poses=poses)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = prepare_out(cfg)
    reports.write_text(out / "design.csv", reports.design_csv(ranked))
    print(f"{len(ranked)} feasible designs")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig) -> int:
    lib = resolve_library(cfg) if cfg.library else None
    try:
        target = CalibrationTarget.from_csv(cfg.target_csv) if cfg.target_csv else table_target()
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load calibration target: {exc}") from None
    try:
        result = calibrate(target, cfg.budget, cfg.seed, priors=lib)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = prepare_out(cfg)
    reports.write_text(out / "library.json", dump_library(result.library))
    print(f"residual {result.residual} of {len(target)} cells")
    return EXIT_OK if result.converged else EXIT_NEGATIVE


COMMANDS = {
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "pullout": cmd_pullout,
    "design": cmd_design,
    "calibrate": cmd_calibrate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softjig", description="Soft-jig caging and pull-out analysis.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (unit-suffixed keys); flags override it")
    common.add_argument("--object", help="library object name, 'tiny-disc', or a polygon JSON file")
    common.add_argument("--fixture", help="vise, jamming or shell")
    common.add_argument("--deviation-deg", type=float, help="pull-out trajectory deviation in degrees")
    common.add_argument("--inflation", type=float, help="membrane inflation level in [0, 1] for condition 3")
    common.add_argument("--grid", help="configuration grid NX,NY,NT")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--trials", type=int, help="noisy replicates for pullout")
    common.add_argument("--noise", type=float, help="force noise standard deviation in N")
    common.add_argument("--budget", type=int, help="candidates per stage for calibrate")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "verify": "check the three caging conditions for one object",
        "sweep": "pull-out success matrix over deviations and fixtures",
        "pullout": "force trace of one pull-out attempt",
        "design": "rank jig designs that cage the objects",
        "calibrate": "refit scenario parameters to a success table",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
