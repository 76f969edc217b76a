"""Static SVG line charts of mean test error against poison fraction."""

from __future__ import annotations

from collections import OrderedDict
from typing import Sequence
from xml.sax.saxutils import escape

from .errors import DataError
from .experiments import SummaryRow

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 40, 60

FIXED_COLOURS = {"undefended": "#d62728", "defended": "#1f77b4", "clean": "#7f7f7f"}
PALETTE = ("#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#bcbd22")


def _colour(condition: str, extra: list[str]) -> str:
    if condition in FIXED_COLOURS:
        return FIXED_COLOURS[condition]
    if condition not in extra:
        extra.append(condition)
    return PALETTE[extra.index(condition) % len(PALETTE)]


def _nice_max(v: float) -> float:
    for step in (0.05, 0.1, 0.2, 0.25, 0.5, 1.0):
        if v <= step:
            return step
    return 1.0


def render_svg(rows: Sequence[SummaryRow], title: str | None = None) -> str:
    """One polyline per condition; x is the poison fraction in percent."""
    if not rows:
        raise DataError("nothing to plot")
    series: OrderedDict[str, list[tuple[float, float]]] = OrderedDict()
    for r in rows:
        series.setdefault(r.condition, []).append((r.fraction, r.mean_error))

    xs = [x for pts in series.values() for x, _ in pts]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_hi = x_lo + 0.01
    y_hi = _nice_max(max(y for pts in series.values() for _, y in pts) or 0.05)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return TOP + ph - y / y_hi * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{TOP - 15}" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for i in range(6):
        y = y_hi * i / 5
        out.append(f'<line x1="{LEFT - 4}" y1="{sy(y):.1f}" x2="{LEFT}" y2="{sy(y):.1f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{sy(y) + 4:.1f}" text-anchor="end">{y:.2f}</text>')
    for x in sorted(set(xs)):
        out.append(f'<line x1="{sx(x):.1f}" y1="{TOP + ph}" x2="{sx(x):.1f}" y2="{TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{sx(x):.1f}" y="{TOP + ph + 18}" text-anchor="middle">{100 * x:g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">poisoning points (%)</text>')
    out.append(
        f'<text x="18" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {TOP + ph / 2:.1f})">mean test error</text>'
    )

    extra: list[str] = []
    for n, (cond, pts) in enumerate(series.items()):
        colour = _colour(cond, extra)
        pts = sorted(pts)
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{coords}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{colour}"/>')
        ly = TOP + 10 + 18 * n
        out.append(f'<rect x="{LEFT + pw + 15}" y="{ly - 6}" width="20" height="3" fill="{colour}"/>')
        out.append(f'<text x="{LEFT + pw + 40}" y="{ly}">{escape(cond)}</text>')
    out.append("</svg>\n")
    return "\n".join(out)
