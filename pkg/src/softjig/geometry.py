"""Planar geometry: poses, simple polygons, annular arcs and the collision predicate.

Lengths are millimetres and angles radians throughout.  Boundary contact
counts as intersection (closed-set semantics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from numba import njit

__all__ = [
    "Pose2",
    "Polygon",
    "AnnularArc",
    "transform",
    "intersects",
    "clearance",
    "arc_to_polygon",
    "disc",
    "rectangle",
    "normalize_angle",
]

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    t = math.remainder(theta, TWO_PI)
    if t <= -math.pi:
        t += TWO_PI
    return t


@dataclass(frozen=True)
class Pose2:
    """SE(2) configuration: translation (x, y) in mm, rotation theta in rad."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(float(v)) for v in (self.x, self.y, self.theta)):
            raise ValueError("pose components must be finite")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    def compose(self, other: Pose2) -> Pose2:
        """Return ``self * other`` (apply ``other`` first, then ``self``)."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def inverse(self) -> Pose2:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)

    def apply(self, point: Sequence[float]) -> tuple[float, float]:
        c, s = math.cos(self.theta), math.sin(self.theta)
        px, py = float(point[0]), float(point[1])
        return (c * px - s * py + self.x, s * px + c * py + self.y)


# --------------------------------------------------------------------------
# compiled predicates (shared by intersects() and the free-space kernel)


@njit(cache=True)
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@njit(cache=True)
def _on_segment(ax, ay, bx, by, px, py):
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


@njit(cache=True)
def _segments_intersect(p1x, p1y, p2x, p2y, q1x, q1y, q2x, q2y):
    d1 = _orient(q1x, q1y, q2x, q2y, p1x, p1y)
    d2 = _orient(q1x, q1y, q2x, q2y, p2x, p2y)
    d3 = _orient(p1x, p1y, p2x, p2y, q1x, q1y)
    d4 = _orient(p1x, p1y, p2x, p2y, q2x, q2y)
    if ((d1 > 0.0 and d2 < 0.0) or (d1 < 0.0 and d2 > 0.0)) and (
        (d3 > 0.0 and d4 < 0.0) or (d3 < 0.0 and d4 > 0.0)
    ):
        return True
    if d1 == 0.0 and _on_segment(q1x, q1y, q2x, q2y, p1x, p1y):
        return True
    if d2 == 0.0 and _on_segment(q1x, q1y, q2x, q2y, p2x, p2y):
        return True
    if d3 == 0.0 and _on_segment(p1x, p1y, p2x, p2y, q1x, q1y):
        return True
    if d4 == 0.0 and _on_segment(p1x, p1y, p2x, p2y, q2x, q2y):
        return True
    return False


@njit(cache=True)
def _point_in_polygon(px, py, xs, ys):
    # even-odd ray crossing; boundary points are caught by the edge stage
    inside = False
    n = xs.shape[0]
    j = n - 1
    for i in range(n):
        yi = ys[i]
        yj = ys[j]
        if (yi > py) != (yj > py):
            xc = xs[i] + (py - yi) * (xs[j] - xs[i]) / (yj - yi)
            if px < xc:
                inside = not inside
        j = i
    return inside


@njit(cache=True)
def _polygons_intersect(ax, ay, bx, by):
    n = ax.shape[0]
    m = bx.shape[0]
    aminx = ax.min()
    amaxx = ax.max()
    aminy = ay.min()
    amaxy = ay.max()
    bminx = bx.min()
    bmaxx = bx.max()
    bminy = by.min()
    bmaxy = by.max()
    if amaxx < bminx or bmaxx < aminx or amaxy < bminy or bmaxy < aminy:
        return False
    # B edges whose bounding box touches A's bounding box
    cand = np.empty(m, dtype=np.int64)
    nc = 0
    for j in range(m):
        k = j + 1 if j + 1 < m else 0
        ex0 = min(bx[j], bx[k])
        ex1 = max(bx[j], bx[k])
        ey0 = min(by[j], by[k])
        ey1 = max(by[j], by[k])
        if ex1 < aminx or amaxx < ex0 or ey1 < aminy or amaxy < ey0:
            continue
        cand[nc] = j
        nc += 1
    for i in range(n):
        i2 = i + 1 if i + 1 < n else 0
        p1x = ax[i]
        p1y = ay[i]
        p2x = ax[i2]
        p2y = ay[i2]
        fx0 = min(p1x, p2x)
        fx1 = max(p1x, p2x)
        fy0 = min(p1y, p2y)
        fy1 = max(p1y, p2y)
        for c in range(nc):
            j = cand[c]
            k = j + 1 if j + 1 < m else 0
            if max(bx[j], bx[k]) < fx0 or fx1 < min(bx[j], bx[k]):
                continue
            if max(by[j], by[k]) < fy0 or fy1 < min(by[j], by[k]):
                continue
            if _segments_intersect(p1x, p1y, p2x, p2y, bx[j], by[j], bx[k], by[k]):
                return True
    if _point_in_polygon(ax[0], ay[0], bx, by):
        return True
    if _point_in_polygon(bx[0], by[0], ax, ay):
        return True
    return False


@njit(cache=True)
def _is_simple(xs, ys):
    n = xs.shape[0]
    for i in range(n):
        i2 = (i + 1) % n
        for j in range(i + 1, n):
            j2 = (j + 1) % n
            if j == i2 or i == j2:
                # adjacent edges share one vertex; they must not fold back
                if j == i2:
                    sx, sy, ox, oy = xs[i], ys[i], xs[j2], ys[j2]
                    mx, my = xs[i2], ys[i2]
                else:
                    sx, sy, ox, oy = xs[j], ys[j], xs[i2], ys[i2]
                    mx, my = xs[i], ys[i]
                if _orient(sx, sy, mx, my, ox, oy) == 0.0:
                    # collinear: reject only if the far ends overlap
                    dot = (sx - mx) * (ox - mx) + (sy - my) * (oy - my)
                    if dot > 0.0:
                        return False
                continue
            if _segments_intersect(xs[i], ys[i], xs[i2], ys[i2], xs[j], ys[j], xs[j2], ys[j2]):
                return False
    return True


# --------------------------------------------------------------------------


class Polygon:
    """Simple polygon stored counter-clockwise as an ``(n, 2)`` float array.

    Clockwise input is reversed.  Construction validates vertex count,
    positive area and simplicity unless ``check=False``.
    """

    __slots__ = ("_v", "__dict__")

    def __init__(self, vertices: Iterable[Sequence[float]] | np.ndarray, check: bool = True):
        v = np.array(vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("vertices must be a sequence of (x, y) points")
        if v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 vertices")
        if _signed_area(v) < 0.0:
            v = v[::-1].copy()
        if check:
            if not np.all(np.isfinite(v)):
                raise ValueError("polygon vertices must be finite")
            if _signed_area(v) <= 0.0:
                raise ValueError("polygon has zero area")
            if not _is_simple(np.ascontiguousarray(v[:, 0]), np.ascontiguousarray(v[:, 1])):
                raise ValueError("polygon is not simple")
        v.setflags(write=False)
        self._v = v

    @property
    def vertices(self) -> np.ndarray:
        return self._v

    @cached_property
    def xs(self) -> np.ndarray:
        return np.ascontiguousarray(self._v[:, 0])

    @cached_property
    def ys(self) -> np.ndarray:
        return np.ascontiguousarray(self._v[:, 1])

    def __len__(self) -> int:
        return self._v.shape[0]

    def __repr__(self) -> str:
        return f"Polygon(n={len(self)}, area={self.area:.4g})"

    @cached_property
    def area(self) -> float:
        return _signed_area(self._v)

    @cached_property
    def centroid(self) -> tuple[float, float]:
        x, y = self.xs, self.ys
        x2, y2 = np.roll(x, -1), np.roll(y, -1)
        cross = x * y2 - x2 * y
        a6 = 3.0 * cross.sum()
        return (float(((x + x2) * cross).sum() / a6), float(((y + y2) * cross).sum() / a6))

    @cached_property
    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax)."""
        lo = self._v.min(axis=0)
        hi = self._v.max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    @cached_property
    def is_convex(self) -> bool:
        v = self._v
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        return bool(np.all(cross >= -1e-12 * np.abs(cross).max()))

    def contains_point(self, x: float, y: float) -> bool:
        """Closed membership test (boundary counts as inside)."""
        return bool(_polygons_intersect(np.array([float(x)]), np.array([float(y)]), self.xs, self.ys))

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Start points and end points of every edge, both ``(n, 2)``."""
        return self._v, np.roll(self._v, -1, axis=0)


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True)
class AnnularArc:
    """Sector of an annulus: radii in mm, start angle and span in rad."""

    center: tuple[float, float]
    inner_radius: float
    outer_radius: float
    start_angle: float
    span: float

    def __post_init__(self) -> None:
        if not 0.0 < self.inner_radius < self.outer_radius:
            raise ValueError("need 0 < inner_radius < outer_radius")
        if not 0.0 < self.span <= TWO_PI:
            raise ValueError("span must lie in (0, 2*pi]")


def transform(poly: Polygon, pose: Pose2) -> Polygon:
    """Rotate ``poly`` by ``pose.theta`` about the origin, then translate."""
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    x, y = poly.xs, poly.ys
    # same operation order as the free-space kernel, keep in sync
    nx = c * x - s * y + pose.x
    ny = s * x + c * y + pose.y
    out = Polygon.__new__(Polygon)
    v = np.column_stack((nx, ny))
    v.setflags(write=False)
    out._v = v
    return out


def intersects(a: Polygon, b: Polygon) -> bool:
    """True iff the closed polygons share at least one point."""
    return bool(_polygons_intersect(a.xs, a.ys, b.xs, b.ys))


def _boundary_distance(a: Polygon, b: Polygon) -> float:
    def vertex_to_edges(p: np.ndarray, poly: Polygon) -> float:
        s, e = poly.edges()
        d = e - s
        len2 = np.einsum("ij,ij->i", d, d)
        rel = p[:, None, :] - s[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", rel, d) / len2, 0.0, 1.0)
        closest = s[None, :, :] + t[..., None] * d[None, :, :]
        return float(np.sqrt(((p[:, None, :] - closest) ** 2).sum(-1)).min())

    return min(vertex_to_edges(a.vertices, b), vertex_to_edges(b.vertices, a))


def _edge_normals(poly: Polygon) -> np.ndarray:
    s, e = poly.edges()
    d = e - s
    n = np.column_stack((d[:, 1], -d[:, 0]))
    return n / np.linalg.norm(n, axis=1)[:, None]


def _sat_depth(a: Polygon, b: Polygon) -> float:
    axes = np.vstack((_edge_normals(a), _edge_normals(b)))
    pa = a.vertices @ axes.T
    pb = b.vertices @ axes.T
    overlap = np.minimum(pa.max(0) - pb.min(0), pb.max(0) - pa.min(0))
    return float(max(overlap.min(), 0.0))


def _ray_hits(origins: np.ndarray, dirs: np.ndarray, poly: Polygon) -> np.ndarray:
    """Largest ray parameter t >= 0 where ``origin + t*dir`` meets an edge.

    Returns an array of shape (n_dirs,) maximised over all origins; 0 where
    nothing is hit.
    """
    s, e = poly.edges()
    ed = e - s  # (m, 2)
    # cross(d, ed) for every direction/edge pair: (D, m)
    denom = dirs[:, 0, None] * ed[None, :, 1] - dirs[:, 1, None] * ed[None, :, 0]
    w = s[None, :, :] - origins[:, None, :]  # (P, m, 2)
    cw_e = w[..., 0] * ed[None, :, 1] - w[..., 1] * ed[None, :, 0]  # (P, m)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cw_e[None, :, :] / denom[:, None, :]  # (D, P, m)
        cw_d = w[None, :, :, 0] * dirs[:, None, None, 1] - w[None, :, :, 1] * dirs[:, None, None, 0]
        u = cw_d / denom[:, None, :]
    ok = (np.abs(denom)[:, None, :] > 1e-15) & (u >= 0.0) & (u <= 1.0) & (t >= 0.0)
    t = np.where(ok, t, 0.0)
    return t.max(axis=(1, 2))


def _escape_depth(a: Polygon, b: Polygon, n_fan: int = 72) -> float:
    fan = np.linspace(0.0, TWO_PI, n_fan, endpoint=False)
    dirs = np.vstack(
        (
            _edge_normals(a),
            -_edge_normals(a),
            _edge_normals(b),
            -_edge_normals(b),
            np.column_stack((np.cos(fan), np.sin(fan))),
        )
    )
    # moving A along d: A's vertices hit B's edges, B's vertices hit A's edges along -d
    t = np.maximum(_ray_hits(a.vertices, dirs, b), _ray_hits(b.vertices, -dirs, a))
    return float(t.min())


def clearance(a: Polygon, b: Polygon) -> float:
    """Signed separation in mm.

    Positive: minimum distance between the boundaries.  Zero: touching.
    Negative: minus the shortest straight-line translation of ``a`` that
    clears the overlap (exact minimum translation distance for convex pairs).
    """
    if not intersects(a, b):
        return _boundary_distance(a, b)
    if a.is_convex and b.is_convex:
        depth = _sat_depth(a, b)
    else:
        depth = _escape_depth(a, b)
    return -depth if depth > 0.0 else 0.0


def arc_to_polygon(arc: AnnularArc, segments: int) -> Polygon:
    """Polygonise an annular sector: outer arc forward, inner arc back.

    Produces ``2 * (segments + 1)`` vertices.
    """
    if arc.span <= 0.0:
        raise ValueError("arc span must be positive")
    if segments < 8:
        raise ValueError("need at least 8 segments")
    ang = arc.start_angle + arc.span * np.arange(segments + 1) / segments
    c, s = np.cos(ang), np.sin(ang)
    cx, cy = arc.center
    outer = np.column_stack((cx + arc.outer_radius * c, cy + arc.outer_radius * s))
    inner = np.column_stack((cx + arc.inner_radius * c, cy + arc.inner_radius * s))[::-1]
    full_ring = arc.span >= TWO_PI - 1e-12
    return Polygon(np.vstack((outer, inner)), check=not full_ring)


def disc(radius: float, sides: int = 32, center: tuple[float, float] = (0.0, 0.0)) -> Polygon:
    """Regular polygon inscribed in a circle, first vertex on the +x axis."""
    ang = TWO_PI * np.arange(sides) / sides
    return Polygon(np.column_stack((center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang))))


def rectangle(width: float, height: float, center: tuple[float, float] = (0.0, 0.0)) -> Polygon:
    hw, hh = 0.5 * width, 0.5 * height
    cx, cy = center
    return Polygon([(cx - hw, cy - hh), (cx + hw, cy - hh), (cx + hw, cy + hh), (cx - hw, cy + hh)])
