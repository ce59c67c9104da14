"""CSV and SVG writers.  Output depends only on the inputs (fixed number formats)."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .cspace import FreeSpaceGrid
from .jig import ShellJig

SWEEP_HEADER = ["scenario", "fixture", "deviation_deg", "success", "failure_mode", "peak_force_N"]
TRACE_HEADER = ["displacement_mm", "force_mean_N", "force_std_N"]
DESIGN_HEADER = [
    "rank",
    "n_modules",
    "inner_radius_mm",
    "max_protrusion_mm",
    "arc_span_deg",
    "cavity_width_mm",
    "wall_thickness_mm",
    "closing_inflation",
    "margin",
]


def _f(x: float, digits: int = 6) -> str:
    s = f"{x:.{digits}f}"
    return "0." + "0" * digits if s == "-0." + "0" * digits else s


def _csv_text(header: list[str], rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return out.getvalue()


def sweep_csv(rows: list[dict]) -> str:
    return _csv_text(
        SWEEP_HEADER,
        (
            [r["scenario"], r["fixture"], int(r["deviation_deg"]), int(r["success"]), r["failure_mode"], _f(r["peak_force_N"])]
            for r in rows
        ),
    )


def trace_csv(displacement: np.ndarray, mean: np.ndarray, std: np.ndarray) -> str:
    return _csv_text(TRACE_HEADER, ([_f(d), _f(m), _f(s)] for d, m, s in zip(displacement, mean, std)))


def design_csv(candidates) -> str:
    rows = []
    for rank, c in enumerate(candidates, start=1):
        j = c.jig
        rows.append([
            rank,
            j.n_modules,
            _f(j.inner_radius, 3),
            _f(j.chamber.max_protrusion, 3),
            _f(math.degrees(j.chamber.arc_span), 3),
            _f(j.chamber.cavity_width, 3),
            _f(j.chamber.wall_thickness, 3),
            _f(c.closing_inflation),
            _f(c.margin),
        ])
    return _csv_text(DESIGN_HEADER, rows)


def write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="")


# --------------------------------------------------------------------------
# SVG


class _Svg:
    def __init__(self, width: float, height: float):
        self.width, self.height = width, height
        self.parts: list[str] = []

    def rect(self, x, y, w, h, fill, stroke="none"):
        self.parts.append(
            f'<rect x="{_f(x, 2)}" y="{_f(y, 2)}" width="{_f(w, 2)}" height="{_f(h, 2)}" fill="{fill}" stroke="{stroke}"/>'
        )

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0):
        self.parts.append(
            f'<line x1="{_f(x1, 2)}" y1="{_f(y1, 2)}" x2="{_f(x2, 2)}" y2="{_f(y2, 2)}" '
            f'stroke="{stroke}" stroke-width="{_f(width, 2)}"/>'
        )

    def circle(self, cx, cy, r, stroke="#000", fill="none"):
        self.parts.append(f'<circle cx="{_f(cx, 2)}" cy="{_f(cy, 2)}" r="{_f(r, 2)}" fill="{fill}" stroke="{stroke}"/>')

    def polyline(self, pts, stroke="#000", fill="none", width=1.0):
        p = " ".join(f"{_f(x, 2)},{_f(y, 2)}" for x, y in pts)
        tag = "polygon" if fill != "none" else "polyline"
        self.parts.append(f'<{tag} points="{p}" fill="{fill}" stroke="{stroke}" stroke-width="{_f(width, 2)}"/>')

    def text(self, x, y, s, size=11, anchor="start"):
        self.parts.append(
            f'<text x="{_f(x, 2)}" y="{_f(y, 2)}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}">{escape(str(s))}</text>'
        )

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(self.width, 0)}" height="{_f(self.height, 0)}" '
            f'viewBox="0 0 {_f(self.width, 0)} {_f(self.height, 0)}">'
        )
        return "\n".join([head, f'<rect width="100%" height="100%" fill="#fff"/>', *self.parts, "</svg>"]) + "\n"


def free_space_slices_svg(fs: FreeSpaceGrid, jig: ShellJig, title: str, n_slices: int = 4) -> str:
    """x-y views of the free space at evenly spaced theta layers."""
    g = fs.grid
    cell = 256.0 / max(g.nx, g.ny)
    panel_w, panel_h = g.nx * cell, g.ny * cell
    n_slices = max(1, min(n_slices, g.ntheta))
    layers = [int(round(i * g.ntheta / n_slices)) % g.ntheta for i in range(n_slices)]
    svg = _Svg(20 + n_slices * (panel_w + 20), panel_h + 70)
    svg.text(10, 18, title, size=13)
    x_scale = panel_w / (g.x_range[1] - g.x_range[0])
    y_scale = panel_h / (g.y_range[1] - g.y_range[0])
    for p, k in enumerate(layers):
        ox, oy = 20 + p * (panel_w + 20), 40
        svg.rect(ox, oy, panel_w, panel_h, "#eee", "#888")
        occ = fs.occupancy[:, :, k]
        for j in range(g.ny):
            row = occ[:, j]
            i = 0
            while i < g.nx:
                if row[i]:
                    start = i
                    while i < g.nx and row[i]:
                        i += 1
                    # y grows downward in SVG
                    svg.rect(ox + start * cell, oy + (g.ny - 1 - j) * cell, (i - start) * cell, cell, "#3a7")
                else:
                    i += 1
        cx = ox + (0.0 - g.x_range[0]) * x_scale
        cy = oy + (g.y_range[1] - 0.0) * y_scale
        svg.circle(cx, cy, jig.inner_radius * x_scale, stroke="#333")
        svg.text(ox + panel_w / 2, oy + panel_h + 18, f"theta = {math.degrees(g.thetas[k]):.1f} deg", anchor="middle")
    return svg.render()


def success_matrix_svg(
    objects: list[str],
    fixtures: list[str],
    deviations: list[int],
    success: dict[tuple[str, str, int], bool],
) -> str:
    """Objects by fixture rows, deviation columns; filled cells mark success."""
    cw, ch, left, top = 34.0, 18.0, 210.0, 40.0
    n_rows = len(objects) * len(fixtures)
    svg = _Svg(left + cw * len(deviations) + 20, top + ch * n_rows + 20)
    svg.text(left + cw * len(deviations) / 2, 16, "Angular difference [deg]", anchor="middle")
    for c, d in enumerate(deviations):
        svg.text(left + c * cw + cw / 2, top - 6, d, anchor="middle")
    r = 0
    for name in objects:
        for fx in fixtures:
            y = top + r * ch
            svg.text(8, y + 13, f"{name} / {fx}", size=10)
            for c, d in enumerate(deviations):
                ok = success.get((name, fx, d), False)
                svg.rect(left + c * cw, y, cw, ch, "#3a7" if ok else "#fff", "#999")
            r += 1
        svg.line(8, top + r * ch, left + cw * len(deviations), top + r * ch, stroke="#444")
    return svg.render()


def trace_svg(displacement: np.ndarray, mean: np.ndarray, std: np.ndarray, title: str) -> str:
    """Force against displacement with a mean +/- std band."""
    w, h, left, bottom = 480.0, 300.0, 50.0, 40.0
    pw, ph = w - left - 20, h - bottom - 40
    top = 40.0
    x_max = float(displacement[-1]) if displacement[-1] > 0 else 1.0
    y_max = float(np.max(mean + std))
    y_max = 1.0 if y_max <= 0 else y_max * 1.1

    def px(x):
        return left + pw * x / x_max

    def py(y):
        return top + ph - ph * y / y_max

    svg = _Svg(w, h)
    svg.text(10, 18, title, size=13)
    svg.rect(left, top, pw, ph, "none", "#888")
    upper = [(px(x), py(y)) for x, y in zip(displacement, mean + std)]
    lower = [(px(x), py(max(y, 0.0))) for x, y in zip(displacement, mean - std)]
    svg.polyline(upper + lower[::-1], stroke="none", fill="#9cf")
    svg.polyline([(px(x), py(y)) for x, y in zip(displacement, mean)], stroke="#036", width=1.5)
    for frac in (0.0, 0.5, 1.0):
        svg.text(px(frac * x_max), top + ph + 16, _f(frac * x_max, 1), size=10, anchor="middle")
        svg.text(left - 4, py(frac * y_max) + 4, _f(frac * y_max, 1), size=10, anchor="end")
    svg.text(left + pw / 2, h - 6, "displacement [mm]", anchor="middle")
    svg.text(12, top - 8, "force [N]", size=10)
    return svg.render()
