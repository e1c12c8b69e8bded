"""Minimal deterministic SVG charts (grouped bars, lines)."""

from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

PALETTE = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1"]
WIDTH, HEIGHT = 760, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 40, 50


def _nice_range(lo: float, hi: float) -> tuple[float, float, float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        lo, hi = 0.0, 1.0
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / 5))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    return math.floor(lo / step) * step, math.ceil(hi / step) * step, step


def _frame(title: str, ylabel: str, y0: float, y1: float, step: float) -> list[str]:
    plot_h = HEIGHT - TOP - BOTTOM
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text transform="translate(16,{TOP + plot_h / 2:.1f}) rotate(-90)" text-anchor="middle">{escape(ylabel)}</text>',
    ]
    n = int(round((y1 - y0) / step))
    for i in range(n + 1):
        v = y0 + i * step
        y = TOP + plot_h * (1 - (v - y0) / (y1 - y0))
        out.append(f'<line x1="{LEFT}" x2="{WIDTH - RIGHT}" y1="{y:.1f}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y + 4:.1f}" text-anchor="end">{v:g}</text>')
    return out


def _legend(names: Sequence[str]) -> list[str]:
    out = []
    for i, name in enumerate(names):
        y = TOP + 10 + 18 * i
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{WIDTH - RIGHT + 12}" y="{y - 9}" width="12" height="12" fill="{color}"/>')
        out.append(f'<text x="{WIDTH - RIGHT + 30}" y="{y + 1}">{escape(name)}</text>')
    return out


def bar_chart(
    categories: Sequence[str],
    series: Mapping[str, Sequence[float]],
    title: str = "",
    ylabel: str = "",
    reference: float | None = None,
) -> str:
    values = [v for vals in series.values() for v in vals if math.isfinite(v)]
    lo = min(values + [0.0] + ([reference] if reference is not None else []))
    hi = max(values + [0.0] + ([reference] if reference is not None else []))
    y0, y1, step = _nice_range(lo, hi)
    out = _frame(title, ylabel, y0, y1, step)
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM
    group_w = plot_w / max(len(categories), 1)
    bar_w = group_w * 0.8 / max(len(series), 1)

    def ypos(v: float) -> float:
        return TOP + plot_h * (1 - (v - y0) / (y1 - y0))

    for j, (name, vals) in enumerate(series.items()):
        color = PALETTE[j % len(PALETTE)]
        for i, v in enumerate(vals):
            if not math.isfinite(v):
                continue
            x = LEFT + i * group_w + group_w * 0.1 + j * bar_w
            top, bottom = sorted((ypos(v), ypos(max(y0, 0.0))))
            out.append(
                f'<rect x="{x:.1f}" y="{top:.1f}" width="{bar_w:.1f}" height="{bottom - top:.1f}" fill="{color}"/>'
            )
    for i, cat in enumerate(categories):
        x = LEFT + (i + 0.5) * group_w
        out.append(f'<text x="{x:.1f}" y="{HEIGHT - BOTTOM + 16}" text-anchor="middle">{escape(str(cat))}</text>')
    if reference is not None:
        y = ypos(reference)
        out.append(
            f'<line x1="{LEFT}" x2="{WIDTH - RIGHT}" y1="{y:.1f}" y2="{y:.1f}" stroke="black" stroke-dasharray="4 3"/>'
        )
    out += _legend(list(series))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_chart(
    x: Sequence[float],
    series: Mapping[str, Sequence[float | None]],
    title: str = "",
    ylabel: str = "",
) -> str:
    values = [v for vals in series.values() for v in vals if v is not None and math.isfinite(v)]
    y0, y1, step = _nice_range(min(values, default=0.0), max(values, default=1.0))
    out = _frame(title, ylabel, y0, y1, step)
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM
    x_lo, x_hi = (min(x), max(x)) if len(x) else (0, 1)
    if x_hi == x_lo:
        x_hi = x_lo + 1

    def pos(xv, yv):
        return LEFT + plot_w * (xv - x_lo) / (x_hi - x_lo), TOP + plot_h * (1 - (yv - y0) / (y1 - y0))

    for j, (name, vals) in enumerate(series.items()):
        pts = [pos(xv, yv) for xv, yv in zip(x, vals) if yv is not None and math.isfinite(yv)]
        if pts:
            path = " ".join(f"{px:.1f},{py:.1f}" for px, py in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{PALETTE[j % len(PALETTE)]}" stroke-width="1.5"/>')
    for xv in (x_lo, x_hi):
        px, _ = pos(xv, y0)
        out.append(f'<text x="{px:.1f}" y="{HEIGHT - BOTTOM + 16}" text-anchor="middle">{xv:g}</text>')
    out += _legend(list(series))
    out.append("</svg>")
    return "\n".join(out) + "\n"
