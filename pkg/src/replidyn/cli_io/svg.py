"""Self-contained SVG figures: phase portraits and time series.

All coordinates are printed with two decimals and elements are emitted in a
fixed order, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import BinaryIO, Sequence

from replidyn.analysis import BasinMap, Separatrix
from replidyn.dynamics import Stability, StationaryPoint, field_function, stationary_points
from replidyn.game_model import GameParams
from replidyn.integrate import Trajectory

__all__ = [
    "PhasePortraitSpec",
    "PortraitOverlays",
    "phase_portrait_svg",
    "render_phase_portrait",
    "render_time_series",
    "time_series_svg",
]

BASIN_COLORS = {"(0,0)": "#e45756", "(1,1)": "#4c78a8", "periodic": "#9d9d9d", "undecided": "#f2cf5b"}
TRAJECTORY_COLORS = ("#000000", "#2ca02c", "#9467bd", "#8c564b")


@dataclass(frozen=True)
class PhasePortraitSpec:
    glyph_density: int = 20
    width: int = 600
    height: int = 600
    trajectory_width: float = 2.5
    trajectory_colors: tuple[str, ...] = TRAJECTORY_COLORS
    marker_radius: float = 6.0

    def __post_init__(self):
        if self.glyph_density < 2:
            raise ValueError("glyph density must be at least 2")
        if self.width < 100 or self.height < 100:
            raise ValueError("canvas must be at least 100x100 pixels")


@dataclass
class PortraitOverlays:
    points: list[StationaryPoint] | None = None
    separatrix: Separatrix | None = None
    basins: BasinMap | None = None


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


@dataclass
class _Frame:
    width: int
    height: int
    left: float = 56.0
    right: float = 20.0
    top: float = 20.0
    bottom: float = 50.0
    x_range: tuple[float, float] = (0.0, 1.0)
    y_range: tuple[float, float] = (0.0, 1.0)

    def px(self, x: float) -> float:
        lo, hi = self.x_range
        return self.left + (x - lo) / (hi - lo) * (self.width - self.left - self.right)

    def py(self, y: float) -> float:
        lo, hi = self.y_range
        return self.height - self.bottom - (y - lo) / (hi - lo) * (self.height - self.top - self.bottom)

    def points(self, xs: Sequence[float], ys: Sequence[float]) -> str:
        return " ".join(f"{_f(self.px(a))},{_f(self.py(b))}" for a, b in zip(xs, ys))


def _header(width: int, height: int) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]


def _axes(fr: _Frame, xlabel: str, ylabel: str, xticks, yticks) -> list[str]:
    x0, x1 = fr.px(fr.x_range[0]), fr.px(fr.x_range[1])
    y0, y1 = fr.py(fr.y_range[0]), fr.py(fr.y_range[1])
    out = [
        f'<rect class="frame" x="{_f(x0)}" y="{_f(y1)}" width="{_f(x1 - x0)}" '
        f'height="{_f(y0 - y1)}" fill="none" stroke="black" stroke-width="1"/>'
    ]
    for v in xticks:
        px = fr.px(v)
        out.append(f'<line x1="{_f(px)}" y1="{_f(y0)}" x2="{_f(px)}" y2="{_f(y0 + 5)}" stroke="black"/>')
        out.append(f'<text x="{_f(px)}" y="{_f(y0 + 18)}" text-anchor="middle">{v:g}</text>')
    for v in yticks:
        py = fr.py(v)
        out.append(f'<line x1="{_f(x0 - 5)}" y1="{_f(py)}" x2="{_f(x0)}" y2="{_f(py)}" stroke="black"/>')
        out.append(f'<text x="{_f(x0 - 8)}" y="{_f(py + 4)}" text-anchor="end">{v:g}</text>')
    out.append(
        f'<text class="axis-label" x="{_f((x0 + x1) / 2)}" y="{_f(fr.height - 10)}" '
        f'text-anchor="middle" font-size="14">{xlabel}</text>'
    )
    out.append(
        f'<text class="axis-label" x="14" y="{_f((y0 + y1) / 2)}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 14 {_f((y0 + y1) / 2)})">{ylabel}</text>'
    )
    return out


def _glyphs(params: GameParams, fr: _Frame, density: int) -> list[str]:
    f = field_function(params)
    cell = (fr.px(1.0) - fr.px(0.0)) / density
    length = 0.6 * cell
    head = 0.25 * length
    out = ['<g class="field" stroke="#777777" fill="#777777" stroke-width="1">']
    for i in range(density):
        for j in range(density):
            x, y = (i + 0.5) / density, (j + 0.5) / density
            fx, fy = f(x, y)
            norm = math.hypot(fx, fy)
            if norm < 1e-12:
                continue
            ux, uy = fx / norm, -fy / norm  # screen y points down
            cx, cy = fr.px(x), fr.py(y)
            tx, ty = cx + 0.5 * length * ux, cy + 0.5 * length * uy
            sx, sy = cx - 0.5 * length * ux, cy - 0.5 * length * uy
            bx, by = tx - head * ux, ty - head * uy
            lx, ly = bx - 0.5 * head * uy, by + 0.5 * head * ux
            rx, ry = bx + 0.5 * head * uy, by - 0.5 * head * ux
            out.append(
                f'<path class="arrow" d="M{_f(sx)} {_f(sy)}L{_f(bx)} {_f(by)}'
                f'M{_f(tx)} {_f(ty)}L{_f(lx)} {_f(ly)}L{_f(rx)} {_f(ry)}Z"/>'
            )
    out.append("</g>")
    return out


def _marker(p: StationaryPoint, fr: _Frame, r: float) -> str:
    cx, cy = _f(fr.px(p.x)), _f(fr.py(p.y))
    data = f'data-x="{p.x!r}" data-y="{p.y!r}"'
    if p.stability is Stability.Sink:
        return f'<circle class="marker sink" {data} cx="{cx}" cy="{cy}" r="{r}" fill="black" stroke="black"/>'
    if p.stability is Stability.Source:
        return (f'<circle class="marker source" {data} cx="{cx}" cy="{cy}" r="{r}" '
                f'fill="white" stroke="black" stroke-width="1.5"/>')
    if p.stability is Stability.Saddle:
        d = r / math.sqrt(2)
        x, y = fr.px(p.x), fr.py(p.y)
        return (
            f'<g class="marker saddle" {data} stroke="black" stroke-width="1.5">'
            f'<circle cx="{cx}" cy="{cy}" r="{r}" fill="white"/>'
            f'<line x1="{_f(x - d)}" y1="{_f(y - d)}" x2="{_f(x + d)}" y2="{_f(y + d)}"/>'
            f'<line x1="{_f(x - d)}" y1="{_f(y + d)}" x2="{_f(x + d)}" y2="{_f(y - d)}"/></g>'
        )
    if p.stability is Stability.Center:
        return (f'<circle class="marker center" {data} cx="{cx}" cy="{cy}" r="{r}" fill="none" '
                f'stroke="black" stroke-width="1.5" stroke-dasharray="1.5,2"/>')
    return (f'<rect class="marker nonhyperbolic" {data} x="{_f(fr.px(p.x) - r)}" y="{_f(fr.py(p.y) - r)}" '
            f'width="{2 * r}" height="{2 * r}" fill="none" stroke="black"/>')


def phase_portrait_svg(
    params: GameParams,
    trajectories: Sequence[Trajectory] = (),
    overlays: PortraitOverlays | None = None,
    spec: PhasePortraitSpec | None = None,
) -> str:
    spec = spec or PhasePortraitSpec()
    overlays = overlays or PortraitOverlays()
    fr = _Frame(spec.width, spec.height)
    out = _header(spec.width, spec.height)
    if overlays.basins is not None:
        bm = overlays.basins
        out.append('<g class="basins" opacity="0.25">')
        for i in range(bm.n):
            for j in range(bm.n):
                label = str(bm.labels[i, j])
                x0, x1 = fr.px(i / bm.n), fr.px((i + 1) / bm.n)
                y0, y1 = fr.py((j + 1) / bm.n), fr.py(j / bm.n)
                out.append(
                    f'<rect class="basin" data-label="{label}" x="{_f(x0)}" y="{_f(y0)}" '
                    f'width="{_f(x1 - x0)}" height="{_f(y1 - y0)}" fill="{BASIN_COLORS.get(label, "#cccccc")}"/>'
                )
        out.append("</g>")
    out += _glyphs(params, fr, spec.glyph_density)
    if overlays.separatrix is not None:
        for branch in overlays.separatrix.branches:
            out.append(
                f'<polyline class="separatrix" points="{fr.points(branch[:, 0], branch[:, 1])}" '
                f'fill="none" stroke="#444444" stroke-width="1.5" stroke-dasharray="6,4"/>'
            )
    for k, traj in enumerate(trajectories):
        color = spec.trajectory_colors[k % len(spec.trajectory_colors)]
        out.append(
            f'<polyline class="trajectory" data-index="{k}" points="{fr.points(traj.x, traj.y)}" '
            f'fill="none" stroke="{color}" stroke-width="{spec.trajectory_width}" stroke-linejoin="round"/>'
        )
    points = overlays.points if overlays.points is not None else stationary_points(params)
    out += [_marker(p, fr, spec.marker_radius) for p in points]
    out += _axes(fr, "x", "y", (0, 0.25, 0.5, 0.75, 1), (0, 0.25, 0.5, 0.75, 1))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_phase_portrait(params, trajectories, overlays, spec, sink: BinaryIO) -> None:
    """Write the phase portrait of ``params`` as SVG to a binary stream."""
    sink.write(phase_portrait_svg(params, trajectories, overlays, spec).encode("utf-8"))


def time_series_svg(traj: Trajectory, width: int = 900, height: int = 400) -> str:
    """Shares over time: x (Eager consumers) in red, y (Fast producers) in blue."""
    t_end = float(traj.t[-1]) if traj.t[-1] > 0 else 1.0
    fr = _Frame(width, height, x_range=(0.0, t_end))
    out = _header(width, height)
    out.append(f'<polyline class="series-x" points="{fr.points(traj.t, traj.x)}" '
               f'fill="none" stroke="red" stroke-width="2"/>')
    out.append(f'<polyline class="series-y" points="{fr.points(traj.t, traj.y)}" '
               f'fill="none" stroke="blue" stroke-width="2"/>')
    ticks = [t_end * k / 5 for k in range(6)]
    out += _axes(fr, "t", "share", [float(f"{v:.3g}") for v in ticks], (0, 0.25, 0.5, 0.75, 1))
    lx = fr.px(t_end) - 70
    out.append(f'<line x1="{_f(lx)}" y1="32" x2="{_f(lx + 20)}" y2="32" stroke="red" stroke-width="2"/>')
    out.append(f'<text x="{_f(lx + 25)}" y="36">x</text>')
    out.append(f'<line x1="{_f(lx)}" y1="50" x2="{_f(lx + 20)}" y2="50" stroke="blue" stroke-width="2"/>')
    out.append(f'<text x="{_f(lx + 25)}" y="54">y</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_time_series(traj: Trajectory, sink: BinaryIO, width: int = 900, height: int = 400) -> None:
    sink.write(time_series_svg(traj, width, height).encode("utf-8"))
