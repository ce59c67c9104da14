"""Discretised SE(2) free space, caging conditions and the centring pose.

A cell is free when the object placed at the cell-centre pose touches no
obstacle.  The rigid-free space is computed with deflated membranes; the
soft-free space with membranes at the requested pressure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from .geometry import Polygon, Pose2, _polygons_intersect, clearance, intersects, transform
from .jig import DEFLATED, FULL_PRESSURE, InflationState, ShellJig, jig_obstacles, membrane_polygons, rigid_obstacles

__all__ = [
    "ConfigGrid",
    "FreeSpaceGrid",
    "CagingReport",
    "EquilibriumResult",
    "compute_free_space",
    "check_caging",
    "penetration_energy",
    "equilibrium_pose",
    "free_space_components",
]


@dataclass(frozen=True)
class ConfigGrid:
    """Regular grid over (x, y, theta); values are sampled at cell centres."""

    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int
    ny: int
    ntheta: int
    theta_range: tuple[float, float] = (-math.pi, math.pi)

    def __post_init__(self) -> None:
        if self.nx < 16 or self.ny < 16:
            raise ValueError("nx and ny must be at least 16")
        if self.ntheta < 8:
            raise ValueError("ntheta must be at least 8")
        for lo, hi in (self.x_range, self.y_range, self.theta_range):
            if not hi > lo:
                raise ValueError("grid ranges must have positive width")
        if self.theta_range[1] - self.theta_range[0] > 2 * math.pi + 1e-12:
            raise ValueError("theta range cannot exceed one full turn")

    @classmethod
    def for_jig(cls, jig: ShellJig, nx: int = 64, ny: int = 64, ntheta: int = 32) -> ConfigGrid:
        b = jig.workspace_bound
        return cls((-b, b), (-b, b), nx, ny, ntheta)

    @property
    def dx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_range[1] - self.y_range[0]) / self.ny

    @property
    def dtheta(self) -> float:
        return (self.theta_range[1] - self.theta_range[0]) / self.ntheta

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.ntheta)

    @property
    def full_turn(self) -> bool:
        return abs(self.theta_range[1] - self.theta_range[0] - 2 * math.pi) < 1e-9

    @property
    def xs(self) -> np.ndarray:
        return self.x_range[0] + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def ys(self) -> np.ndarray:
        return self.y_range[0] + (np.arange(self.ny) + 0.5) * self.dy

    @property
    def thetas(self) -> np.ndarray:
        """Cell-centre angles, already wrapped to (-pi, pi]."""
        raw = self.theta_range[0] + (np.arange(self.ntheta) + 0.5) * self.dtheta
        return np.array([Pose2(0.0, 0.0, t).theta for t in raw])

    def pose(self, i: int, j: int, k: int) -> Pose2:
        return Pose2(self.xs[i], self.ys[j], self.thetas[k])

    def index_of(self, pose: Pose2) -> tuple[int, int, int]:
        """Cell containing ``pose``; raises ValueError outside the grid."""
        x0, x1 = self.x_range
        y0, y1 = self.y_range
        if not (x0 <= pose.x <= x1 and y0 <= pose.y <= y1):
            raise ValueError(f"pose ({pose.x:.3f}, {pose.y:.3f}) lies outside the grid")
        t0, t1 = self.theta_range
        t = pose.theta
        if self.full_turn:
            t = t0 + (t - t0) % (2 * math.pi)
        elif not t0 <= t <= t1:
            raise ValueError(f"pose angle {t:.4f} lies outside the grid")
        i = min(int((pose.x - x0) / self.dx), self.nx - 1)
        j = min(int((pose.y - y0) / self.dy), self.ny - 1)
        k = min(int((t - t0) / self.dtheta), self.ntheta - 1)
        return i, j, k


@dataclass
class FreeSpaceGrid:
    grid: ConfigGrid
    occupancy: np.ndarray  # bool (nx, ny, ntheta); True = contact-free
    inflation_u: float

    def __post_init__(self) -> None:
        if self.occupancy.shape != self.grid.shape:
            raise ValueError("occupancy shape does not match the grid")

    @property
    def free_count(self) -> int:
        return int(self.occupancy.sum())


@njit(cache=True)
def _occupancy_kernel(ox, oy, cos_t, sin_t, xs, ys, obs_x, obs_y, offsets, out):
    n = ox.shape[0]
    n_obs = offsets.shape[0] - 1
    bb = np.empty((n_obs, 4))
    for q in range(n_obs):
        a = offsets[q]
        b = offsets[q + 1]
        bb[q, 0] = obs_x[a:b].min()
        bb[q, 1] = obs_x[a:b].max()
        bb[q, 2] = obs_y[a:b].min()
        bb[q, 3] = obs_y[a:b].max()
    rx = np.empty(n)
    ry = np.empty(n)
    tx = np.empty(n)
    ty = np.empty(n)
    for k in range(cos_t.shape[0]):
        c = cos_t[k]
        s = sin_t[k]
        for m in range(n):
            rx[m] = c * ox[m] - s * oy[m]
            ry[m] = s * ox[m] + c * oy[m]
        rx0 = rx.min()
        rx1 = rx.max()
        ry0 = ry.min()
        ry1 = ry.max()
        for i in range(xs.shape[0]):
            # rounding is monotone, so these equal the bounds of the translated vertices
            x0 = rx0 + xs[i]
            x1 = rx1 + xs[i]
            for j in range(ys.shape[0]):
                y0 = ry0 + ys[j]
                y1 = ry1 + ys[j]
                placed = False
                free = True
                for q in range(n_obs):
                    if x1 < bb[q, 0] or bb[q, 1] < x0 or y1 < bb[q, 2] or bb[q, 3] < y0:
                        continue
                    if not placed:
                        for m in range(n):
                            tx[m] = rx[m] + xs[i]
                            ty[m] = ry[m] + ys[j]
                        placed = True
                    a = offsets[q]
                    b = offsets[q + 1]
                    if _polygons_intersect(tx, ty, obs_x[a:b], obs_y[a:b]):
                        free = False
                        break
                out[i, j, k] = free


def _flatten(polys: list[Polygon]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    offsets = np.zeros(len(polys) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(p) for p in polys])
    if not polys:
        return np.empty(0), np.empty(0), offsets
    return (
        np.concatenate([p.xs for p in polys]),
        np.concatenate([p.ys for p in polys]),
        offsets,
    )


def compute_free_space(obj: Polygon, jig: ShellJig, state: InflationState, grid: ConfigGrid) -> FreeSpaceGrid:
    """Mark every grid cell whose pose keeps the object clear of all jig obstacles."""
    obs_x, obs_y, offsets = _flatten(jig_obstacles(jig, state))
    thetas = grid.thetas
    cos_t = np.array([math.cos(t) for t in thetas])
    sin_t = np.array([math.sin(t) for t in thetas])
    out = np.zeros(grid.shape, dtype=np.bool_)
    _occupancy_kernel(obj.xs, obj.ys, cos_t, sin_t, grid.xs, grid.ys, obs_x, obs_y, offsets, out)
    return FreeSpaceGrid(grid=grid, occupancy=out, inflation_u=state.u)


@dataclass
class CagingReport:
    cond1_rigid_free_nonempty: bool
    cond2_pose_in_free: bool
    cond3_soft_free_empty: bool
    free_cell_count_rigid: int
    free_cell_count_soft: int
    witness_escape_pose: Pose2 | None = None
    rigid_free: FreeSpaceGrid | None = field(default=None, repr=False, compare=False)
    soft_free: FreeSpaceGrid | None = field(default=None, repr=False, compare=False)

    @property
    def caged(self) -> bool:
        return self.cond1_rigid_free_nonempty and self.cond2_pose_in_free and self.cond3_soft_free_empty

    def to_dict(self) -> dict:
        w = self.witness_escape_pose
        return {
            "cond1_rigid_free_nonempty": self.cond1_rigid_free_nonempty,
            "cond2_pose_in_free": self.cond2_pose_in_free,
            "cond3_soft_free_empty": self.cond3_soft_free_empty,
            "caged": self.caged,
            "free_cell_count_rigid": self.free_cell_count_rigid,
            "free_cell_count_soft": self.free_cell_count_soft,
            "witness_escape_pose": None
            if w is None
            else {"x_mm": w.x, "y_mm": w.y, "theta_deg": math.degrees(w.theta)},
        }


def _witness(fs: FreeSpaceGrid) -> Pose2 | None:
    """Soft-free cell farthest from the jig centre (first in scan order on ties)."""
    if not fs.occupancy.any():
        return None
    g = fs.grid
    r2 = (g.xs[:, None] ** 2 + g.ys[None, :] ** 2)[:, :, None] * np.ones(g.ntheta)
    score = np.where(fs.occupancy, r2, -1.0)
    i, j, k = np.unravel_index(int(np.argmax(score)), g.shape)
    return g.pose(i, j, k)


def check_caging(
    obj: Polygon,
    q_obj: Pose2,
    jig: ShellJig,
    grid: ConfigGrid,
    full_pressure: InflationState = FULL_PRESSURE,
) -> CagingReport:
    """Evaluate the three caging conditions for ``obj`` placed at ``q_obj``.

    1. some pose avoids the rigid shell, 2. ``q_obj`` is one of them, 3. no
    pose avoids both the shell and the pressurised membranes.
    """
    idx = grid.index_of(q_obj)
    rigid = compute_free_space(obj, jig, DEFLATED, grid)
    soft = compute_free_space(obj, jig, full_pressure, grid)
    n_soft = soft.free_count
    return CagingReport(
        cond1_rigid_free_nonempty=rigid.free_count > 0,
        cond2_pose_in_free=bool(rigid.occupancy[idx]),
        cond3_soft_free_empty=n_soft == 0,
        free_cell_count_rigid=rigid.free_count,
        free_cell_count_soft=n_soft,
        witness_escape_pose=_witness(soft),
        rigid_free=rigid,
        soft_free=soft,
    )


# --------------------------------------------------------------------------
# centring under pressure


def penetration_energy(obj: Polygon, pose: Pose2, jig: ShellJig, state: InflationState) -> float:
    """Sum over membranes of the squared penetration depth of the object."""
    placed = transform(obj, pose)
    energy = 0.0
    for membrane in membrane_polygons(jig, state):
        c = clearance(placed, membrane)
        if c < 0.0:
            energy += c * c
    return energy


def _hits_shell(obj: Polygon, pose: Pose2, jig: ShellJig) -> bool:
    placed = transform(obj, pose)
    return any(intersects(placed, s) for s in rigid_obstacles(jig))


@dataclass
class EquilibriumResult:
    pose: Pose2
    energy: float
    iterations: int
    converged: bool
    energy_trace: list[float] = field(default_factory=list, repr=False)


def equilibrium_pose(
    obj: Polygon,
    start: Pose2,
    jig: ShellJig,
    state: InflationState = FULL_PRESSURE,
    step: float = 1.0,
    angle_step: float = 0.05,
    tol: float = 0.01,
    angle_tol: float = 0.001,
    max_iter: int = 10_000,
) -> EquilibriumResult:
    """Coordinate descent with step halving on the membrane penetration energy.

    Moves that would push the object into the rigid shell are rejected.
    ``converged`` is False when ``max_iter`` passes run out first.
    """
    if _hits_shell(obj, start, jig):
        raise ValueError("start pose touches the rigid shell")
    pose = start
    energy = penetration_energy(obj, pose, jig, state)
    trace = [energy]
    steps = [step, step, angle_step]
    tols = [tol, tol, angle_tol]
    it = 0
    while it < max_iter:
        if all(s < t for s, t in zip(steps, tols)):
            return EquilibriumResult(pose, energy, it, True, trace)
        it += 1
        for axis in range(3):
            if steps[axis] < tols[axis]:
                continue
            moved = False
            for sign in (1.0, -1.0):
                delta = [0.0, 0.0, 0.0]
                delta[axis] = sign * steps[axis]
                cand = Pose2(pose.x + delta[0], pose.y + delta[1], pose.theta + delta[2])
                if _hits_shell(obj, cand, jig):
                    continue
                e = penetration_energy(obj, cand, jig, state)
                if e < energy:
                    pose, energy, moved = cand, e, True
                    trace.append(e)
                    break
            if not moved:
                steps[axis] *= 0.5
    return EquilibriumResult(pose, energy, it, False, trace)


# --------------------------------------------------------------------------


def free_space_components(fs: FreeSpaceGrid) -> tuple[int, np.ndarray]:
    """Label 6-connected free cells, wrapping in theta on full-turn grids.

    Labels run 1..count in order of first appearance in a C-order scan;
    occupied cells get 0.
    """
    occ = fs.occupancy
    labels, count = ndimage.label(occ, structure=ndimage.generate_binary_structure(3, 1))
    if count == 0:
        return 0, labels.astype(np.int32)
    parent = np.arange(count + 1)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    if fs.grid.full_turn:
        first, last = labels[:, :, 0], labels[:, :, -1]
        for a, b in zip(first[(first > 0) & (last > 0)], last[(first > 0) & (last > 0)]):
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(count + 1)])
    merged = roots[labels]
    flat = merged.ravel()
    nz = flat > 0
    uniq, first_idx = np.unique(flat[nz], return_index=True)
    order = uniq[np.argsort(first_idx)]
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[order] = np.arange(1, len(order) + 1, dtype=np.int32)
    return len(order), remap[merged]
