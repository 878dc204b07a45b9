"""Minimal headless SVG rendering for run artifacts.

Just enough vector plotting for trajectory overlays, metric time series and
arena snapshots: polylines with axes, ticks and labels, plus arena geometry
(wall rectangles, obstacle and beacon circles). No imaging dependencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(count - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if mag * mult >= raw:
            step = mag * mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12:
        ticks.append(round(t, 10))
        t += step
    return ticks


@dataclass
class Panel:
    """One chart: named series drawn over shared axes."""

    title: str
    series: list  # (label, xs, ys)
    xlabel: str = ""
    ylabel: str = ""

    def bounds(self):
        xs = [x for _, sx, _ in self.series for x in sx]
        ys = [y for _, _, sy in self.series for y in sy]
        finite_x = [x for x in xs if math.isfinite(x)] or [0.0, 1.0]
        finite_y = [y for y in ys if math.isfinite(y)] or [0.0, 1.0]
        x_lo, x_hi = min(finite_x), max(finite_x)
        y_lo, y_hi = min(finite_y), max(finite_y)
        if x_hi - x_lo < 1e-12:
            x_hi = x_lo + 1.0
        if y_hi - y_lo < 1e-12:
            y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
        return x_lo, x_hi, y_lo, y_hi


def _render_panel(panel: Panel, ox: float, oy: float, width: float,
                  height: float) -> list[str]:
    margin_l, margin_b, margin_t = 52.0, 34.0, 22.0
    plot_w = width - margin_l - 12.0
    plot_h = height - margin_b - margin_t
    x_lo, x_hi, y_lo, y_hi = panel.bounds()

    def px(x):
        return ox + margin_l + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return oy + margin_t + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [f'<rect x="{ox + margin_l}" y="{oy + margin_t}" width="{plot_w}" '
             f'height="{plot_h}" fill="white" stroke="#888"/>',
             f'<text x="{ox + margin_l + plot_w / 2}" y="{oy + 14}" '
             f'text-anchor="middle" font-size="12" font-weight="bold">{panel.title}</text>']
    for t in _ticks(x_lo, x_hi):
        parts.append(f'<line x1="{px(t):.1f}" y1="{py(y_lo):.1f}" x2="{px(t):.1f}" '
                     f'y2="{py(y_lo) + 4:.1f}" stroke="#444"/>')
        parts.append(f'<text x="{px(t):.1f}" y="{py(y_lo) + 15:.1f}" '
                     f'text-anchor="middle" font-size="9">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        parts.append(f'<line x1="{px(x_lo) - 4:.1f}" y1="{py(t):.1f}" '
                     f'x2="{px(x_lo):.1f}" y2="{py(t):.1f}" stroke="#444"/>')
        parts.append(f'<text x="{px(x_lo) - 6:.1f}" y="{py(t) + 3:.1f}" '
                     f'text-anchor="end" font-size="9">{_fmt(t)}</text>')
    if panel.xlabel:
        parts.append(f'<text x="{ox + margin_l + plot_w / 2}" y="{oy + height - 6}" '
                     f'text-anchor="middle" font-size="10">{panel.xlabel}</text>')
    if panel.ylabel:
        cx, cy = ox + 12, oy + margin_t + plot_h / 2
        parts.append(f'<text x="{cx}" y="{cy}" text-anchor="middle" font-size="10" '
                     f'transform="rotate(-90 {cx} {cy})">{panel.ylabel}</text>')

    for idx, (label, xs, ys) in enumerate(panel.series):
        color = PALETTE[idx % len(PALETTE)]
        points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys)
                          if math.isfinite(x) and math.isfinite(y))
        parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" '
                     f'stroke-width="1.2"/>')
        if label:
            lx = ox + margin_l + plot_w - 6
            ly = oy + margin_t + 12 + idx * 12
            parts.append(f'<text x="{lx}" y="{ly}" text-anchor="end" font-size="9" '
                         f'fill="{color}">{label}</text>')
    return parts


def write_panels(path, panels: list[Panel], columns: int = 3,
                 panel_size: tuple[float, float] = (320.0, 220.0)) -> None:
    """Grid of charts in one SVG document."""
    cols = max(1, min(columns, len(panels)))
    rows = math.ceil(len(panels) / cols)
    pw, ph = panel_size
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * pw}" '
             f'height="{rows * ph}" font-family="sans-serif">',
             f'<rect width="100%" height="100%" fill="#fafafa"/>']
    for i, panel in enumerate(panels):
        ox, oy = (i % cols) * pw, (i // cols) * ph
        parts.extend(_render_panel(panel, ox, oy, pw, ph))
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))


def write_chart(path, series, title="", xlabel="", ylabel="") -> None:
    write_panels(path, [Panel(title, series, xlabel, ylabel)], columns=1,
                 panel_size=(480.0, 320.0))


def arena_svg_parts(arena, scale: float, pad: float = 0.6):
    """Arena geometry as SVG parts plus the world->pixel transforms."""
    all_x = [arena.walls[:, 0].min(), arena.walls[:, 2].max()] if len(arena.walls) \
        else [arena.corridor[0], arena.corridor[1]]
    all_y = [arena.walls[:, 1].min(), arena.walls[:, 3].max()] if len(arena.walls) \
        else [0.0, arena.beacon[1] + 1.0]
    x_lo, x_hi = min(all_x) - pad, max(all_x) + pad
    y_lo, y_hi = min(all_y) - pad, max(all_y) + pad

    def px(x):
        return (x - x_lo) * scale

    def py(y):
        return (y_hi - y) * scale

    parts = []
    for x0, y0, x1, y1 in arena.walls:
        parts.append(f'<rect x="{px(x0):.1f}" y="{py(y1):.1f}" '
                     f'width="{(x1 - x0) * scale:.1f}" height="{(y1 - y0) * scale:.1f}" '
                     f'fill="#b0b0b0" stroke="#666"/>')
    for cx, cy, r in arena.obstacles:
        parts.append(f'<circle cx="{px(cx):.1f}" cy="{py(cy):.1f}" r="{r * scale:.1f}" '
                     f'fill="#4a7dbf" stroke="#244"/>')
    bx, by, br = arena.beacon
    parts.append(f'<circle cx="{px(bx):.1f}" cy="{py(by):.1f}" r="{br * scale:.1f}" '
                 f'fill="#3cb043" stroke="#143"/>')
    sx, sy = arena.spawn
    parts.append(f'<circle cx="{px(sx):.1f}" cy="{py(sy):.1f}" r="4" fill="#d62728"/>')
    size = ((x_hi - x_lo) * scale, (y_hi - y_lo) * scale)
    return parts, px, py, size


def write_arena_overlay(path, arena, trajectories, labels=None,
                        snake_state=None, link_length=0.1, link_width=0.05,
                        scale: float = 34.0, caption: str = "") -> None:
    """Arena top view with head trajectories and optionally the snake pose."""
    parts, px, py, (w, h) = arena_svg_parts(arena, scale)
    body = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" '
            f'height="{h + 20:.0f}" font-family="sans-serif">',
            '<rect width="100%" height="100%" fill="#fdfdf5"/>']
    body.extend(parts)
    for idx, traj in enumerate(trajectories):
        color = PALETTE[idx % len(PALETTE)]
        points = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in traj)
        body.append(f'<polyline points="{points}" fill="none" stroke="{color}" '
                    f'stroke-width="1.4" opacity="0.85"/>')
        if labels:
            body.append(f'<text x="8" y="{16 + idx * 13}" font-size="10" '
                        f'fill="{color}">{labels[idx]}</text>')
    if snake_state is not None:
        for i in range(len(snake_state.x)):
            cx, cy = px(snake_state.x[i]), py(snake_state.y[i])
            angle = -math.degrees(snake_state.theta[i])
            body.append(
                f'<rect x="{cx - link_length * scale / 2:.1f}" '
                f'y="{cy - link_width * scale / 2:.1f}" '
                f'width="{link_length * scale:.1f}" height="{link_width * scale:.1f}" '
                f'fill="#c23b22" stroke="#400" '
                f'transform="rotate({angle:.1f} {cx:.1f} {cy:.1f})"/>')
    if caption:
        body.append(f'<text x="{w / 2:.0f}" y="{h + 14:.0f}" text-anchor="middle" '
                    f'font-size="11">{caption}</text>')
    body.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(body))
