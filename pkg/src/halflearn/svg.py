"""Self-contained SVG scatter plots.

No plotting dependency: the experiment harness emits small deterministic SVG
documents with optional log axes. Every marker carries the original data pair
in data-x/data-y attributes so rendered points can be checked against the CSV
they came from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

WIDTH, HEIGHT = 640, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 55
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


@dataclass
class Series:
    label: str
    points: list[tuple[float, float]] = field(default_factory=list)
    draw_line: bool = True


def _transform(values, lo, hi, out_lo, out_hi, log: bool):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
        values = [math.log10(v) for v in values]
    span = hi - lo if hi > lo else 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        lo_e = math.floor(math.log10(lo))
        hi_e = math.ceil(math.log10(hi))
        return [10.0**e for e in range(lo_e, hi_e + 1)]
    if hi <= lo:
        return [lo]
    step = 10.0 ** math.floor(math.log10(hi - lo))
    if (hi - lo) / step > 5:
        step *= 2
    elif (hi - lo) / step < 2.5:
        step /= 2
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12:
        ticks.append(t)
        t += step
    return ticks


def scatter_svg(
    series: list[Series],
    title: str,
    xlabel: str,
    ylabel: str,
    log_x: bool = False,
    log_y: bool = False,
) -> str:
    xs = [p[0] for s in series for p in s.points]
    ys = [p[1] for s in series for p in s.points]
    if not xs:
        xs, ys = [1.0], [1.0]
    floor = 1e-12

    def bounds(vals, log):
        lo, hi = min(vals), max(vals)
        if log:
            lo = max(lo, floor)
            hi = max(hi, lo * 1.0001)
            return lo / 1.3, hi * 1.3
        pad = 0.05 * (hi - lo) if hi > lo else max(abs(hi), 1.0) * 0.1
        return lo - pad, hi + pad

    x_lo, x_hi = bounds(xs, log_x)
    y_lo, y_hi = bounds(ys, log_y)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-size="15" '
        f'font-family="sans-serif">{title}</text>',
    ]
    plot_l, plot_r = MARGIN_L, WIDTH - MARGIN_R
    plot_t, plot_b = MARGIN_T, HEIGHT - MARGIN_B
    parts.append(
        f'<rect x="{plot_l}" y="{plot_t}" width="{plot_r - plot_l}" '
        f'height="{plot_b - plot_t}" fill="none" stroke="black"/>'
    )

    for t in _ticks(x_lo, x_hi, log_x):
        if not (x_lo <= t <= x_hi):
            continue
        (px,) = _transform([t], x_lo, x_hi, plot_l, plot_r, log_x)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{plot_b}" x2="{_fmt(px)}" y2="{plot_b + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{plot_b + 20}" text-anchor="middle" font-size="11" '
            f'font-family="sans-serif">{_fmt(t)}</text>'
        )
    for t in _ticks(y_lo, y_hi, log_y):
        if not (y_lo <= t <= y_hi):
            continue
        (py,) = _transform([t], y_lo, y_hi, plot_b, plot_t, log_y)
        parts.append(
            f'<line x1="{plot_l - 5}" y1="{_fmt(py)}" x2="{plot_l}" y2="{_fmt(py)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{plot_l - 8}" y="{_fmt(py)}" text-anchor="end" dominant-baseline="middle" '
            f'font-size="11" font-family="sans-serif">{_fmt(t)}</text>'
        )
    parts.append(
        f'<text x="{(plot_l + plot_r) // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif">{xlabel}</text>'
    )
    parts.append(
        f'<text x="18" y="{(plot_t + plot_b) // 2}" text-anchor="middle" font-size="13" '
        f'font-family="sans-serif" transform="rotate(-90 18 {(plot_t + plot_b) // 2})">{ylabel}</text>'
    )

    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = sorted(s.points)
        if not pts:
            continue
        px = _transform([p[0] for p in pts], x_lo, x_hi, plot_l, plot_r, log_x)
        py = _transform([p[1] for p in pts], y_lo, y_hi, plot_b, plot_t, log_y)
        if s.draw_line and len(pts) > 1:
            path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py))
            parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for (x, y), a, b in zip(pts, px, py):
            parts.append(
                f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3.5" fill="{color}" '
                f'data-x="{x!r}" data-y="{y!r}"/>'
            )
        parts.append(
            f'<text x="{plot_r - 8}" y="{plot_t + 16 + 15 * idx}" text-anchor="end" font-size="12" '
            f'font-family="sans-serif" fill="{color}">{s.label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
