"""Ten-object scenario library, success-table calibration and jig design sweep.

Object cross-sections are synthetic polygons sized to the object class; the
mechanics parameters are model parameters fitted to the success table, not
measured physical quantities.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .cspace import ConfigGrid, check_caging
from .geometry import Polygon, Pose2, disc, rectangle
from .jig import (
    FULL_PRESSURE,
    ChamberDesign,
    FixtureKind,
    FixtureModel,
    InflationState,
    ShellJig,
    contact_area_fraction,
    default_jig,
)
from .pullout import PROTOCOL_DEVIATIONS_DEG, PulloutScenario, predict_success

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
LIBRARY_KIND = "softjig.scenario_library"
OBJECT_NAMES = (
    "shaft-bearing",
    "motor-pulley",
    "USB-adapter",
    "LAN-hub",
    "AC-switch",
    "pulley-shaft",
    "AC-adapter",
    "wire-board",
    "battery-charger",
    "USB-computer",
)
FIXTURE_ORDER = (FixtureKind.VISE, FixtureKind.JAMMING, FixtureKind.SHELL)

# settings that produced the shipped library.json
SHIPPED_SEED = 2024
SHIPPED_BUDGET = 2000

# search box: (low, high, log-uniform?)
FIT_PRELOAD_RANGE = (1.0, 500.0, True)
BINDING_GAIN_RANGE = (0.0, 40.0, False)
GRIP_FORCE_RANGE = (5.0, 500.0, True)
JAMMING_CAP_DEG_RANGE = (0.0, 20.0, False)
SHELL_CAP_DEG_RANGE = (0.0, 40.0, False)
HOLD_RANGES = {
    FixtureKind.VISE: (10.0, 1000.0, True),
    FixtureKind.JAMMING: (0.5, 20.0, True),
    FixtureKind.SHELL: (0.5, 50.0, True),
}


@dataclass(frozen=True)
class LibraryEntry:
    scenario: PulloutScenario
    shape: Polygon
    q_obj: Pose2
    # whether the default jig is expected to cage the object
    cage_target: bool = True


@dataclass
class ScenarioLibrary:
    entries: dict[str, LibraryEntry]
    jig_default: ShellJig
    fixture_defaults: dict[FixtureKind, FixtureModel]
    calibration: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if set(self.entries) != set(OBJECT_NAMES):
            raise ValueError("library must hold exactly the ten named objects")
        if set(self.fixture_defaults) != set(FIXTURE_ORDER):
            raise ValueError("library needs vise, jamming and shell fixtures")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, name: str) -> LibraryEntry:
        return self.entries[name]

    def fixture(self, kind: FixtureKind | str) -> FixtureModel:
        return self.fixture_defaults[FixtureKind(kind)]

    def contact_fraction(self, name: str) -> float:
        e = self.entries[name]
        return contact_area_fraction(self.jig_default, e.shape, e.q_obj, FULL_PRESSURE)


# --------------------------------------------------------------------------
# built-in shapes and priors


def _chamfered_rectangle(width: float, height: float, chamfer: float) -> Polygon:
    a, b, c = 0.5 * width, 0.5 * height, chamfer
    return Polygon([(a - c, -b), (a, -b + c), (a, b - c), (a - c, b), (-a + c, b), (-a, b - c), (-a, -b + c), (-a + c, -b)])


def _notched_rectangle(width: float, height: float, notch_width: float, notch_depth: float) -> Polygon:
    a, b, n = 0.5 * width, 0.5 * height, 0.5 * notch_width
    return Polygon([(-a, -b), (a, -b), (a, b), (n, b), (n, b - notch_depth), (-n, b - notch_depth), (-n, b), (-a, b)])


def _object_shapes() -> dict[str, Polygon]:
    return {
        "shaft-bearing": disc(25.0),
        "motor-pulley": disc(24.0),
        "USB-adapter": rectangle(52.0, 36.0),
        "LAN-hub": rectangle(60.0, 44.0),
        "AC-switch": rectangle(56.0, 46.0),
        # only the thin shaft sits at membrane height
        "pulley-shaft": disc(6.0),
        "AC-adapter": _chamfered_rectangle(54.0, 42.0, 6.0),
        "wire-board": rectangle(64.0, 30.0),
        "battery-charger": rectangle(58.0, 38.0),
        "USB-computer": _notched_rectangle(62.0, 40.0, 14.0, 8.0),
    }


# name: fit_friction, engagement_length, required_hold, lock_tab, lead_deformable
_FIXED = {
    "shaft-bearing": (0.25, 20.0, 0.0, False, False),
    "motor-pulley": (0.30, 15.0, 0.0, False, False),
    "USB-adapter": (0.40, 12.0, 0.0, False, False),
    "LAN-hub": (0.30, 14.0, 0.0, True, False),
    "AC-switch": (0.40, 18.0, 0.0, False, False),
    "pulley-shaft": (0.25, 25.0, 4.0, False, False),
    "AC-adapter": (0.20, 16.0, 0.0, False, False),
    "wire-board": (0.40, 10.0, 0.0, False, True),
    "battery-charger": (0.30, 20.0, 0.0, False, False),
    "USB-computer": (0.25, 12.0, 0.0, False, False),
}

# (fit_preload, binding_gain, grip_force); the shaft-bearing values anchor a
# ~10 N plateau and the AC-switch starts above its grip capacity
_GENERIC_PRIOR = (40.0, 20.0, 70.0)
_PRIORS = {
    "shaft-bearing": (40.0, 20.0, 70.0),
    "AC-switch": (300.0, 20.0, 100.0),
}


def prior_library() -> ScenarioLibrary:
    """Uncalibrated starting point for :func:`calibrate`."""
    shapes = _object_shapes()
    entries = {}
    for name in OBJECT_NAMES:
        mu, length, hold, lock, lead = _FIXED[name]
        preload, gain, grip = _PRIORS.get(name, _GENERIC_PRIOR)
        scenario = PulloutScenario(
            name=name,
            fit_preload=preload,
            fit_friction=mu,
            engagement_length=length,
            binding_gain=gain,
            grip_force=grip,
            grip_friction=0.5,
            required_hold=hold,
            lock_tab=lock,
            lead_deformable=lead,
        )
        entries[name] = LibraryEntry(scenario, shapes[name], Pose2(), cage_target=name != "pulley-shaft")
    fixtures = {
        FixtureKind.VISE: FixtureModel(FixtureKind.VISE, 0.0, 200.0),
        FixtureKind.JAMMING: FixtureModel(FixtureKind.JAMMING, math.radians(10.0), 2.5),
        FixtureKind.SHELL: FixtureModel(FixtureKind.SHELL, math.radians(25.0), 8.0),
    }
    return ScenarioLibrary(entries, default_jig(), fixtures)


# --------------------------------------------------------------------------
# JSON serialisation


def _deg(rad: float) -> float:
    return round(math.degrees(rad), 6)


def library_to_dict(lib: ScenarioLibrary) -> dict:
    jig = lib.jig_default
    c = jig.chamber
    return {
        "format_version": FORMAT_VERSION,
        "kind": LIBRARY_KIND,
        "note": "model parameters fitted to the pull-out success table; not measured physical values",
        "calibration": dict(lib.calibration),
        "jig": {
            "inner_radius_mm": jig.inner_radius,
            "outer_radius_mm": jig.outer_radius,
            "n_modules": jig.n_modules,
            "module_angles_deg": [_deg(a) for a in jig.module_angles],
            "protrusion_scales": list(jig.protrusion_scales),
            "cavity_width_mm": c.cavity_width,
            "wall_thickness_mm": c.wall_thickness,
            "height_mm": c.height,
            "arc_span_deg": _deg(c.arc_span),
            "max_protrusion_mm": c.max_protrusion,
            "workspace_bound_mm": jig.workspace_bound,
        },
        "fixtures": {
            kind.value: {
                "compliance_angle_cap_deg": _deg(f.compliance_angle_cap),
                "holding_force_limit_N": f.holding_force_limit,
                "base_friction": f.base_friction,
            }
            for kind, f in ((k, lib.fixture_defaults[k]) for k in FIXTURE_ORDER)
        },
        "scenarios": {
            name: _entry_to_dict(lib.entries[name]) for name in OBJECT_NAMES
        },
    }


def _entry_to_dict(e: LibraryEntry) -> dict:
    s = e.scenario
    return {
        "fit_preload_N": s.fit_preload,
        "fit_friction": s.fit_friction,
        "engagement_length_mm": s.engagement_length,
        "binding_gain": s.binding_gain,
        "grip_force_N": s.grip_force,
        "grip_friction": s.grip_friction,
        "required_hold_N": s.required_hold,
        "lock_tab": s.lock_tab,
        "lead_deformable": s.lead_deformable,
        "lock_tolerance_deg": _deg(s.lock_tolerance),
        "cage_target": e.cage_target,
        "q_obj": {"x_mm": e.q_obj.x, "y_mm": e.q_obj.y, "theta_deg": _deg(e.q_obj.theta)},
        "object_vertices_mm": e.shape.vertices.tolist(),
    }


def jig_from_dict(d: dict) -> ShellJig:
    chamber = ChamberDesign(
        cavity_width=float(d["cavity_width_mm"]),
        wall_thickness=float(d["wall_thickness_mm"]),
        height=float(d["height_mm"]),
        arc_span=math.radians(float(d["arc_span_deg"])),
        max_protrusion=float(d["max_protrusion_mm"]),
    )
    return ShellJig(
        inner_radius=float(d["inner_radius_mm"]),
        outer_radius=float(d["outer_radius_mm"]),
        n_modules=int(d["n_modules"]),
        module_angles=tuple(math.radians(float(a)) for a in d["module_angles_deg"]),
        chamber=chamber,
        workspace_bound=float(d.get("workspace_bound_mm", 0.0)),
        protrusion_scales=tuple(float(s) for s in d.get("protrusion_scales", ())),
    )


def library_from_dict(d: dict) -> ScenarioLibrary:
    if d.get("kind") != LIBRARY_KIND:
        raise ValueError("not a scenario library document")
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported library format version {d.get('format_version')}")
    fixtures = {
        FixtureKind(k): FixtureModel(
            FixtureKind(k),
            math.radians(float(v["compliance_angle_cap_deg"])),
            float(v["holding_force_limit_N"]),
            float(v.get("base_friction", 0.5)),
        )
        for k, v in d["fixtures"].items()
    }
    entries = {}
    for name, v in d["scenarios"].items():
        scenario = PulloutScenario(
            name=name,
            fit_preload=float(v["fit_preload_N"]),
            fit_friction=float(v["fit_friction"]),
            engagement_length=float(v["engagement_length_mm"]),
            binding_gain=float(v["binding_gain"]),
            grip_force=float(v["grip_force_N"]),
            grip_friction=float(v["grip_friction"]),
            required_hold=float(v.get("required_hold_N", 0.0)),
            lock_tab=bool(v.get("lock_tab", False)),
            lead_deformable=bool(v.get("lead_deformable", False)),
            lock_tolerance=math.radians(float(v.get("lock_tolerance_deg", 2.0))),
        )
        q = v.get("q_obj", {})
        pose = Pose2(float(q.get("x_mm", 0.0)), float(q.get("y_mm", 0.0)), math.radians(float(q.get("theta_deg", 0.0))))
        entries[name] = LibraryEntry(scenario, Polygon(v["object_vertices_mm"]), pose, bool(v.get("cage_target", True)))
    return ScenarioLibrary(entries, jig_from_dict(d["jig"]), fixtures, dict(d.get("calibration", {})))


def dump_library(lib: ScenarioLibrary) -> str:
    return json.dumps(library_to_dict(lib), indent=2) + "\n"


def save_library(lib: ScenarioLibrary, path: str | Path) -> None:
    Path(path).write_text(dump_library(lib), encoding="utf-8")


def load_library(path: str | Path | None = None) -> ScenarioLibrary:
    """The shipped calibrated library, or one saved with :func:`save_library`."""
    if path is None:
        text = resources.files("softjig").joinpath("data/library.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return library_from_dict(json.loads(text))


# --------------------------------------------------------------------------
# calibration target


@dataclass
class CalibrationTarget:
    expected: dict[tuple[str, FixtureKind, int], bool]

    def __len__(self) -> int:
        return len(self.expected)

    def row(self, name: str, fixture: FixtureKind) -> dict[int, bool]:
        return {d: ok for (n, f, d), ok in self.expected.items() if n == name and f is fixture}

    def objects(self) -> list[str]:
        seen: dict[str, None] = {}
        for n, _, _ in self.expected:
            seen.setdefault(n, None)
        return list(seen)

    def max_success_deg(self, name: str, fixture: FixtureKind) -> int | None:
        ok = [d for d, s in self.row(name, fixture).items() if s]
        return max(ok) if ok else None

    def is_prefix(self, name: str, fixture: FixtureKind) -> bool:
        """True when the successes form an initial run of deviations."""
        flags = [s for _, s in sorted(self.row(name, fixture).items())]
        return all(a or not b for a, b in zip(flags, flags[1:]))

    @classmethod
    def from_csv(cls, source: str | Path | io.TextIOBase) -> CalibrationTarget:
        if isinstance(source, (str, Path)):
            with open(source, newline="", encoding="utf-8") as fh:
                return cls._parse(fh)
        return cls._parse(source)

    @classmethod
    def _parse(cls, fh) -> CalibrationTarget:
        reader = csv.DictReader(fh)
        need = {"object", "fixture", "deviation_deg", "success"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValueError(f"calibration CSV needs columns {sorted(need)}")
        expected = {}
        for row in reader:
            flag = row["success"].strip().lower()
            if flag not in {"0", "1", "true", "false"}:
                raise ValueError(f"bad success flag {row['success']!r}")
            key = (row["object"].strip(), FixtureKind(row["fixture"].strip()), int(row["deviation_deg"]))
            expected[key] = flag in {"1", "true"}
        return cls(expected)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["object", "fixture", "deviation_deg", "success"])
        for (n, f, d), ok in self.expected.items():
            w.writerow([n, f.value, d, int(ok)])
        return out.getvalue()


def table_target() -> CalibrationTarget:
    """The 180-cell pull-out success table shipped with the package."""
    text = resources.files("softjig").joinpath("data/pullout_table.csv").read_text(encoding="utf-8")
    return CalibrationTarget.from_csv(io.StringIO(text))


# --------------------------------------------------------------------------
# calibration search


@dataclass
class CalibrationResult:
    library: ScenarioLibrary
    residual: int
    converged: bool
    per_object: dict[str, int]


def _draw(rng: np.random.Generator, spec: tuple[float, float, bool], n: int) -> np.ndarray:
    lo, hi, log_scale = spec
    if log_scale:
        v = np.exp(rng.uniform(math.log(lo), math.log(hi), n))
    else:
        v = rng.uniform(lo, hi, n)
    # 0.1 resolution keeps fitted values readable and exactly serialisable
    return np.round(v, 1)


def _mismatches(
    s: PulloutScenario,
    preload: np.ndarray,
    gain: np.ndarray,
    grip: np.ndarray,
    fixtures: dict[FixtureKind, FixtureModel],
    contact: float,
    rows: dict[FixtureKind, tuple[np.ndarray, np.ndarray]],
) -> np.ndarray:
    total = np.zeros(preload.shape, dtype=np.int64)
    fit_force = s.fit_friction * preload
    capacity = s.grip_friction * grip
    for kind, (devs, want) in rows.items():
        ok = predict_success(
            fit_force, gain, capacity, s.required_hold, s.lock_tab, s.lead_deformable, s.lock_tolerance,
            fixtures[kind], contact, np.radians(devs),
        )
        total += np.count_nonzero(ok != want[None, :], axis=1)
    return total


def calibrate(
    target: CalibrationTarget,
    search_budget: int,
    seed: int = 0,
    priors: ScenarioLibrary | None = None,
) -> CalibrationResult:
    """Random search for parameters reproducing ``target``.

    Fixture candidates (compliance cap, holding limit) form the outer loop and
    per-object candidates (fit_preload, binding_gain, grip_force) the inner
    one; candidate 0 of each is the prior.  Ties go to the lower index, so the
    result depends only on ``seed`` and ``search_budget``.
    """
    if search_budget < 1:
        raise ValueError("search_budget must be at least 1")
    lib = priors or prior_library()
    rng = np.random.default_rng(seed)
    names = [n for n in target.objects() if n in lib.entries]
    unknown = set(target.objects()) - set(lib.entries)
    if unknown:
        raise ValueError(f"target names unknown objects: {sorted(unknown)}")

    rows = {}
    for n in names:
        rows[n] = {}
        for kind in FIXTURE_ORDER:
            r = target.row(n, kind)
            if r:
                devs = np.array(sorted(r), dtype=float)
                rows[n][kind] = (devs, np.array([r[int(d)] for d in devs]))
    contact = {n: lib.contact_fraction(n) for n in names}

    extra = search_budget - 1
    cand = {}
    for n in names:
        s = lib.entries[n].scenario
        cand[n] = (
            np.concatenate(([s.fit_preload], _draw(rng, FIT_PRELOAD_RANGE, extra))),
            np.concatenate(([s.binding_gain], _draw(rng, BINDING_GAIN_RANGE, extra))),
            np.concatenate(([s.grip_force], _draw(rng, GRIP_FORCE_RANGE, extra))),
        )
    base = lib.fixture_defaults
    fixture_cands = [dict(base)]
    jam_caps = _draw(rng, JAMMING_CAP_DEG_RANGE, extra)
    shell_caps = _draw(rng, SHELL_CAP_DEG_RANGE, extra)
    holds = {k: _draw(rng, HOLD_RANGES[k], extra) for k in FIXTURE_ORDER}
    for i in range(extra):
        fixture_cands.append({
            FixtureKind.VISE: replace(base[FixtureKind.VISE], holding_force_limit=float(holds[FixtureKind.VISE][i])),
            FixtureKind.JAMMING: replace(
                base[FixtureKind.JAMMING],
                compliance_angle_cap=math.radians(float(jam_caps[i])),
                holding_force_limit=float(holds[FixtureKind.JAMMING][i]),
            ),
            FixtureKind.SHELL: replace(
                base[FixtureKind.SHELL],
                compliance_angle_cap=math.radians(float(shell_caps[i])),
                holding_force_limit=float(holds[FixtureKind.SHELL][i]),
            ),
        })

    best = None
    for fixtures in fixture_cands:
        picks, total = {}, 0
        for n in names:
            miss = _mismatches(lib.entries[n].scenario, *cand[n], fixtures, contact[n], rows[n])
            i = int(np.argmin(miss))
            picks[n] = (i, int(miss[i]))
            total += int(miss[i])
        if best is None or total < best[0]:
            best = (total, fixtures, picks)
        if total == 0:
            break

    residual, fixtures, picks = best
    entries = dict(lib.entries)
    for n, (i, _) in picks.items():
        pre, gain, grip = (float(a[i]) for a in cand[n])
        s = replace(lib.entries[n].scenario, fit_preload=pre, binding_gain=gain, grip_force=grip)
        entries[n] = replace(lib.entries[n], scenario=s)
    meta = {"seed": seed, "search_budget": search_budget, "residual": residual, "target_cells": len(target)}
    out = ScenarioLibrary(entries, lib.jig_default, fixtures, meta)
    if residual:
        log.warning("calibration left %d of %d cells unmatched", residual, len(target))
    return CalibrationResult(out, residual, residual == 0, {n: m for n, (_, m) in picks.items()})


def shipped_calibration() -> CalibrationResult:
    """Re-run the calibration that produced the packaged library."""
    return calibrate(table_target(), SHIPPED_BUDGET, SHIPPED_SEED)


# --------------------------------------------------------------------------
# design sweep


@dataclass(frozen=True)
class ChamberRanges:
    inner_radius: tuple[float, ...] = (40.0,)
    max_protrusion: tuple[float, ...] = (14.0, 18.0)
    # window span as a fraction of the angular pitch 2*pi/N
    span_fraction: tuple[float, ...] = (2.0 / 3.0,)
    cavity_width: tuple[float, ...] = (4.0,)
    wall_thickness: tuple[float, ...] = (2.0,)
    height: float = 62.0

    def __post_init__(self) -> None:
        for name in ("inner_radius", "max_protrusion", "span_fraction", "cavity_width", "wall_thickness"):
            if not getattr(self, name):
                raise ValueError(f"{name} range is empty")
        if any(not 0.0 < f < 1.0 for f in self.span_fraction):
            raise ValueError("span_fraction must lie in (0, 1)")


@dataclass
class DesignCandidate:
    jig: ShellJig
    margin: float
    closing_inflation: float
    index: int


def _closes(obj: Polygon, q: Pose2, jig: ShellJig, grid: ConfigGrid, u: float) -> bool:
    return check_caging(obj, q, jig, grid, full_pressure=InflationState(u)).caged


def closing_inflation(obj: Polygon, q: Pose2, jig: ShellJig, grid: ConfigGrid, steps: int = 5) -> float:
    """Smallest inflation (to ``2**-steps``) that cages the object; bisection on u."""
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if _closes(obj, q, jig, grid, mid):
            hi = mid
        else:
            lo = mid
    return hi


def design_candidates(ranges: ChamberRanges, module_counts) -> list[ShellJig]:
    out = []
    for n, R, dmax, frac, cav, wall in itertools.product(
        module_counts, ranges.inner_radius, ranges.max_protrusion, ranges.span_fraction,
        ranges.cavity_width, ranges.wall_thickness,
    ):
        if n < 1 or dmax >= R:
            continue
        chamber = ChamberDesign(
            cavity_width=cav, wall_thickness=wall, height=ranges.height,
            arc_span=frac * 2.0 * math.pi / n, max_protrusion=dmax,
        )
        out.append(ShellJig.symmetric(inner_radius=R, n_modules=n, chamber=chamber))
    return out


def design_sweep(
    objects: list[Polygon],
    ranges: ChamberRanges | None = None,
    module_counts=(2, 3, 4),
    grid_shape: tuple[int, int, int] = (32, 32, 16),
    poses: list[Pose2] | None = None,
    bisection_steps: int = 5,
) -> list[DesignCandidate]:
    """Jig designs caging every object at full pressure, best first.

    The margin of a design is ``1 - u_close`` for its hardest object, where
    ``u_close`` is the least inflation that still cages.  Ranking prefers
    fewer modules, then larger margin, then enumeration order.
    """
    if not objects:
        raise ValueError("need at least one object")
    if not module_counts:
        raise ValueError("module_counts is empty")
    ranges = ranges or ChamberRanges()
    poses = poses or [Pose2()] * len(objects)
    if len(poses) != len(objects):
        raise ValueError("one pose per object")
    feasible = []
    for idx, jig in enumerate(design_candidates(ranges, module_counts)):
        grid = ConfigGrid.for_jig(jig, *grid_shape)
        if not all(check_caging(o, q, jig, grid).caged for o, q in zip(objects, poses)):
            continue
        u_close = max(closing_inflation(o, q, jig, grid, bisection_steps) for o, q in zip(objects, poses))
        feasible.append(DesignCandidate(jig, 1.0 - u_close, u_close, idx))
    feasible.sort(key=lambda c: (c.jig.n_modules, -c.margin, c.index))
    return feasible
