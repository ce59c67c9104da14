"""Shell-type soft jig cross-section and the three fixture models.

The jig is a rigid annular shell with ``n_modules`` membrane windows on its
inner wall.  Each membrane inflates inward as a circular-arc bulge whose
depth at the window centre is ``u * max_protrusion``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .geometry import TWO_PI, AnnularArc, Polygon, Pose2, arc_to_polygon, intersects, transform

# minimum rays per membrane window; always even so the window centre is sampled exactly
WINDOW_SEGMENTS = 24
# wall sectors get roughly this many segments per full turn
WALL_SEGMENTS_PER_TURN = 96
SLIVER = 1e-6


@dataclass(frozen=True)
class ChamberDesign:
    cavity_width: float = 4.0
    wall_thickness: float = 2.0
    height: float = 62.0
    arc_span: float = math.pi / 3
    max_protrusion: float = 18.0

    def __post_init__(self) -> None:
        if self.cavity_width <= 0 or self.wall_thickness <= 0:
            raise ValueError("cavity_width and wall_thickness must be positive")
        if self.height <= 0:
            raise ValueError("height must be positive")
        if not 0.0 < self.arc_span < TWO_PI:
            raise ValueError("arc_span must lie in (0, 2*pi)")
        if self.max_protrusion < 0:
            raise ValueError("max_protrusion must be non-negative")


@dataclass(frozen=True)
class InflationState:
    """Normalised pressure level: 0 is a flush membrane, 1 full pressure."""

    u: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.u <= 1.0:
            raise ValueError(f"inflation level must lie in [0, 1], got {self.u}")


DEFLATED = InflationState(0.0)
FULL_PRESSURE = InflationState(1.0)


@dataclass(frozen=True)
class ShellJig:
    """Rigid shell ring with membrane windows centred at ``module_angles``.

    ``protrusion_scales`` weakens or strengthens individual modules (1.0 is
    nominal).  ``workspace_bound`` is the half-width of the analysis region.
    """

    inner_radius: float
    outer_radius: float
    n_modules: int
    module_angles: tuple[float, ...]
    chamber: ChamberDesign = field(default_factory=ChamberDesign)
    workspace_bound: float = 0.0
    protrusion_scales: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "module_angles", tuple(float(a) for a in self.module_angles))
        if not self.protrusion_scales:
            object.__setattr__(self, "protrusion_scales", (1.0,) * self.n_modules)
        else:
            object.__setattr__(self, "protrusion_scales", tuple(float(s) for s in self.protrusion_scales))
        if self.workspace_bound <= 0.0:
            object.__setattr__(self, "workspace_bound", float(self.inner_radius))
        if not 0.0 < self.inner_radius < self.outer_radius:
            raise ValueError("need 0 < inner_radius < outer_radius")
        if self.n_modules < 0:
            raise ValueError("n_modules must be non-negative")
        if len(self.module_angles) != self.n_modules or len(self.protrusion_scales) != self.n_modules:
            raise ValueError("module_angles and protrusion_scales need one entry per module")
        if self.workspace_bound < self.inner_radius:
            raise ValueError("workspace_bound must be at least inner_radius")
        if any(s < 0 for s in self.protrusion_scales):
            raise ValueError("protrusion scales must be non-negative")
        if self.n_modules and self.chamber.max_protrusion * max(self.protrusion_scales) >= self.inner_radius:
            raise ValueError("membrane protrusion must stay below inner_radius")
        span = self.chamber.arc_span
        if self.n_modules > 1:
            if span >= TWO_PI / self.n_modules:
                raise ValueError("arc_span must be below 2*pi / n_modules")
            ang = sorted(a % TWO_PI for a in self.module_angles)
            gaps = np.diff(ang + [ang[0] + TWO_PI])
            if np.any(gaps < span - 1e-12):
                raise ValueError("membrane windows overlap")

    @classmethod
    def symmetric(
        cls,
        inner_radius: float = 40.0,
        n_modules: int = 4,
        chamber: ChamberDesign | None = None,
        offset: float = 0.0,
        outer_radius: float | None = None,
        workspace_bound: float = 0.0,
        protrusion_scales: tuple[float, ...] = (),
    ) -> ShellJig:
        """Equally spaced windows at ``2*pi*k/N + offset``.

        The shell outer radius defaults to inner radius + cavity + wall.
        """
        chamber = chamber or ChamberDesign(max_protrusion=0.45 * inner_radius)
        if outer_radius is None:
            outer_radius = inner_radius + chamber.cavity_width + chamber.wall_thickness
        angles = tuple(offset + TWO_PI * k / n_modules for k in range(n_modules))
        return cls(
            inner_radius=inner_radius,
            outer_radius=outer_radius,
            n_modules=n_modules,
            module_angles=angles,
            chamber=chamber,
            workspace_bound=workspace_bound,
            protrusion_scales=protrusion_scales,
        )

    def with_protrusion(self, max_protrusion: float) -> ShellJig:
        return replace(self, chamber=replace(self.chamber, max_protrusion=max_protrusion))

    def protrusion(self, module_index: int, state: InflationState) -> float:
        """Bulge depth at the window centre for one module."""
        return state.u * self.chamber.max_protrusion * self.protrusion_scales[module_index]


def default_jig() -> ShellJig:
    """Four-module jig: 4.0 mm cavity, 2.0 mm wall, 62 mm high, 40 mm bore radius."""
    return ShellJig.symmetric(
        inner_radius=40.0,
        n_modules=4,
        chamber=ChamberDesign(
            cavity_width=4.0, wall_thickness=2.0, height=62.0, arc_span=math.pi / 3, max_protrusion=18.0
        ),
    )


class FixtureKind(str, enum.Enum):
    VISE = "vise"
    JAMMING = "jamming"
    SHELL = "shell"


@dataclass(frozen=True)
class FixtureModel:
    """Behavioural fixture: absorbed misalignment and lateral holding capacity."""

    kind: FixtureKind
    compliance_angle_cap: float
    holding_force_limit: float
    base_friction: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", FixtureKind(self.kind))
        if self.compliance_angle_cap < 0 or self.holding_force_limit < 0:
            raise ValueError("compliance cap and holding limit must be non-negative")
        if self.kind is FixtureKind.VISE and self.compliance_angle_cap != 0:
            raise ValueError("a vise absorbs no misalignment")


# --------------------------------------------------------------------------
# membrane and shell geometry


def _window_segments(span: float) -> int:
    n = max(WINDOW_SEGMENTS, math.ceil(span / TWO_PI * WALL_SEGMENTS_PER_TURN))
    return n + n % 2


def _window_rays(jig: ShellJig, module_index: int) -> np.ndarray:
    span = jig.chamber.arc_span
    start = jig.module_angles[module_index] - 0.5 * span
    n = _window_segments(span)
    return start + span * np.arange(n + 1) / n


def _bulge_radii(radius: float, half_span: float, depth: float, local: np.ndarray) -> np.ndarray:
    """Radius along each ray (angle relative to window centre) to the bulge arc.

    The arc is the circle through both window endpoints and the apex at
    ``radius - depth``.
    """
    apex = radius - depth
    denom = 2.0 * (radius * math.cos(half_span) - apex)
    c = np.cos(local)
    if abs(denom) < 1e-12 * radius:
        # apex on the chord: the bulge is straight
        r = radius * math.cos(half_span) / c
    else:
        x0 = (radius * radius - apex * apex) / denom
        rho = abs(apex - x0)
        disc = np.maximum(x0 * x0 * c * c - x0 * x0 + rho * rho, 0.0)
        t1 = x0 * c - np.sqrt(disc)
        t2 = x0 * c + np.sqrt(disc)
        r = np.where(t1 > 0.0, t1, t2)
    return np.minimum(r, radius)


def membrane_shape(jig: ShellJig, module_index: int, state: InflationState) -> Polygon:
    """Region between a window of the inner wall and its inflated bulge."""
    if not 0 <= module_index < jig.n_modules:
        raise IndexError(f"module index {module_index} out of range for {jig.n_modules} modules")
    return _membrane_cached(jig, module_index, state.u)


@lru_cache(maxsize=4096)
def _membrane_cached(jig: ShellJig, k: int, u: float) -> Polygon:
    R = jig.inner_radius
    rays = _window_rays(jig, k)
    depth = max(jig.protrusion(k, InflationState(u)), SLIVER)
    local = rays - jig.module_angles[k]
    r = _bulge_radii(R, 0.5 * jig.chamber.arc_span, depth, local[1:-1])
    r = np.minimum(r, R - SLIVER)
    cos_r, sin_r = np.cos(rays), np.sin(rays)
    wall = np.column_stack((R * cos_r, R * sin_r))
    bulge = np.column_stack((r * cos_r[1:-1], r * sin_r[1:-1]))[::-1]
    return Polygon(np.vstack((wall, bulge)), check=False)


@lru_cache(maxsize=256)
def shell_polygons(jig: ShellJig) -> tuple[Polygon, ...]:
    """The rigid shell as annular sectors tiling the full ring.

    Sectors behind each membrane window stand for the chamber housing, so the
    object can never slip behind a membrane.
    """
    R, Ro = jig.inner_radius, jig.outer_radius
    if jig.n_modules == 0:
        return tuple(
            arc_to_polygon(AnnularArc((0.0, 0.0), R, Ro, k * math.pi / 2, math.pi / 2), WALL_SEGMENTS_PER_TURN // 4)
            for k in range(4)
        )
    span = jig.chamber.arc_span
    order = sorted(range(jig.n_modules), key=lambda k: jig.module_angles[k] % TWO_PI)
    starts = [jig.module_angles[k] - 0.5 * span for k in order]
    pieces = []
    for idx, start in enumerate(starts):
        pieces.append(arc_to_polygon(AnnularArc((0.0, 0.0), R, Ro, start, span), _window_segments(span)))
        end = start + span
        nxt = starts[(idx + 1) % len(starts)]
        gap = (nxt - end) % TWO_PI
        if gap > 1e-9:
            seg = max(8, math.ceil(gap / TWO_PI * WALL_SEGMENTS_PER_TURN))
            pieces.append(arc_to_polygon(AnnularArc((0.0, 0.0), R, Ro, end, gap), seg))
    return tuple(pieces)


@lru_cache(maxsize=256)
def exterior_polygons(jig: ShellJig) -> tuple[Polygon, ...]:
    """Everything beyond the shell, as four quarter rings overlapping the wall.

    Poses outside the bore are unreachable, so the analysis square's corners
    count as rigid contact.  The ring starts mid-wall so no chord gap opens
    against the shell sectors.
    """
    inner = 0.5 * (jig.inner_radius + jig.outer_radius)
    outer = jig.outer_radius + 3.0 * jig.workspace_bound
    return tuple(
        arc_to_polygon(AnnularArc((0.0, 0.0), inner, outer, k * math.pi / 2, math.pi / 2), WALL_SEGMENTS_PER_TURN // 4)
        for k in range(4)
    )


def rigid_obstacles(jig: ShellJig) -> tuple[Polygon, ...]:
    return shell_polygons(jig) + exterior_polygons(jig)


def membrane_polygons(jig: ShellJig, state: InflationState) -> tuple[Polygon, ...]:
    return tuple(membrane_shape(jig, k, state) for k in range(jig.n_modules))


def jig_obstacles(jig: ShellJig, state: InflationState) -> list[Polygon]:
    """Rigid shell and exterior followed by every membrane at ``state``."""
    return list(rigid_obstacles(jig)) + list(membrane_polygons(jig, state))


def contact_area_fraction(jig: ShellJig, obj: Polygon, pose: Pose2, state: InflationState) -> float:
    """Fraction of membrane modules touching the object placed at ``pose``."""
    if jig.n_modules == 0:
        return 0.0
    placed = transform(obj, pose)
    hits = sum(intersects(placed, m) for m in membrane_polygons(jig, state))
    return hits / jig.n_modules
