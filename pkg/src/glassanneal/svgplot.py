"""Minimal static SVG line plots.

One ``<path>`` per series; axes, ticks and markers use ``<line>`` and
``<text>`` only, so the path count identifies the series count.
"""

from __future__ import annotations

import math
from html import escape
from typing import Mapping, Sequence

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf")

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * abs(step):
        ticks.append(round(t, 12))
        t += step
    return ticks


def _bounds(values: Sequence[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if lo == hi:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def render_svg(
    x: Sequence[float],
    series: Mapping[str, Sequence[float | None]],
    *,
    vlines: Sequence[float] = (),
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> str:
    """Render series sharing one x column.  ``None`` or NaN entries break nothing; they are skipped."""
    pts_by_name = {}
    for name, ys in series.items():
        pts = [
            (float(a), float(b))
            for a, b in zip(x, ys)
            if b is not None and math.isfinite(float(b)) and math.isfinite(float(a))
        ]
        pts_by_name[name] = pts
    all_x = [p[0] for pts in pts_by_name.values() for p in pts] + [float(v) for v in vlines]
    all_y = [p[1] for pts in pts_by_name.values() for p in pts]
    if not all_x or not all_y:
        raise ValueError("nothing to plot")
    x0, x1 = _bounds(all_x)
    y0, y1 = _bounds(all_y)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return TOP + (1 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    bx, by = LEFT, TOP + ph
    out.append(f'<line x1="{bx}" y1="{by}" x2="{LEFT + pw}" y2="{by}" stroke="black"/>')
    out.append(f'<line x1="{bx}" y1="{TOP}" x2="{bx}" y2="{by}" stroke="black"/>')
    for t in _nice_ticks(x0, x1):
        px = sx(t)
        out.append(f'<line x1="{px:.2f}" y1="{by}" x2="{px:.2f}" y2="{by + 4}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{by + 16}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _nice_ticks(y0, y1):
        py = sy(t)
        out.append(f'<line x1="{bx - 4}" y1="{py:.2f}" x2="{bx}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{bx - 6}" y="{py + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    if xlabel:
        out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="14" y="{TOP + ph / 2}" text-anchor="middle" '
            f'transform="rotate(-90 14 {TOP + ph / 2})">{escape(ylabel)}</text>'
        )

    for i, (name, pts) in enumerate(pts_by_name.items()):
        if not pts:
            continue
        color = PALETTE[i % len(PALETTE)]
        d = " ".join(f"{'M' if j == 0 else 'L'}{sx(a):.2f},{sy(b):.2f}" for j, (a, b) in enumerate(pts))
        out.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"><title>{escape(name)}</title></path>')
        ly = TOP + 14 * (i + 1)
        out.append(f'<line x1="{LEFT + pw - 110}" y1="{ly - 4}" x2="{LEFT + pw - 90}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw - 86}" y="{ly}">{escape(name)}</text>')

    for v in vlines:
        px = sx(float(v))
        out.append(
            f'<line class="vline" data-x="{_fmt(float(v))}" x1="{px:.2f}" y1="{TOP}" x2="{px:.2f}" y2="{by}" '
            f'stroke="red" stroke-dasharray="6,4"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
