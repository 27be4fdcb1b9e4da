"""Minimal self-contained SVG line plots for convergence curves.

No rendering dependency: the output is a single <svg> element with
polylines, axis ticks, and a legend.  The vertical axis is logarithmic
with a configurable floor (values below are clipped up to it).
"""

from __future__ import annotations

import math

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd",
            "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]

_WIDTH, _HEIGHT = 720, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 170, 40, 55


def _log_ticks(lo: float, hi: float) -> list[float]:
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    step = max(1, (hi_e - lo_e) // 8)
    return [10.0 ** e for e in range(lo_e, hi_e + 1, step)]


def _lin_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(t)
        t += step
    return ticks


def _fmt(v: float) -> str:
    if v == 0.0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        exp = math.floor(math.log10(abs(v)))
        mant = v / 10.0 ** exp
        if abs(mant - 1.0) < 1e-9:
            return f"1e{exp}"
        return f"{mant:.3g}e{exp}"
    return f"{v:g}"


def render_log_lines(series: dict[str, tuple[list[float], list[float]]],
                     xlabel: str, ylabel: str, title: str,
                     floor: float = 1e-12) -> str:
    """Render named (xs, ys) series as a log-y line chart; returns SVG text."""
    if not series:
        raise ValueError("no series to plot")
    x_min = min(min(xs) for xs, _ in series.values() if xs)
    x_max = max(max(xs) for xs, _ in series.values() if xs)
    ys_all = [max(y, floor) for _, ys in series.values() for y in ys]
    y_min = min(ys_all)
    y_max = max(ys_all)
    if x_max <= x_min:
        x_max = x_min + 1.0
    if y_max <= y_min:
        y_max = y_min * 10.0

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B
    ly_min, ly_max = math.log10(y_min), math.log10(y_max)
    if ly_max - ly_min < 1e-9:
        ly_max = ly_min + 1.0

    def sx(x: float) -> float:
        return _MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w

    def sy(y: float) -> float:
        ly = math.log10(max(y, floor))
        return _MARGIN_T + (ly_max - ly) / (ly_max - ly_min) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="20" text-anchor="middle" '
        f'font-size="15">{title}</text>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333"/>',
    ]

    for yt in _log_ticks(y_min, y_max):
        if yt < y_min / 1.0001 or yt > y_max * 1.0001:
            continue
        py = sy(yt)
        parts.append(f'<line x1="{_MARGIN_L}" y1="{py:.1f}" x2="{_MARGIN_L + plot_w}" '
                     f'y2="{py:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{_MARGIN_L - 6}" y="{py + 4:.1f}" text-anchor="end">'
                     f'{_fmt(yt)}</text>')
    for xt in _lin_ticks(x_min, x_max):
        px = sx(xt)
        parts.append(f'<line x1="{px:.1f}" y1="{_MARGIN_T}" x2="{px:.1f}" '
                     f'y2="{_MARGIN_T + plot_h}" stroke="#eee"/>')
        parts.append(f'<text x="{px:.1f}" y="{_MARGIN_T + plot_h + 18}" '
                     f'text-anchor="middle">{_fmt(xt)}</text>')

    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     'stroke-width="1.6"/>')
        ly = _MARGIN_T + 16 + 18 * i
        lx = _MARGIN_L + plot_w + 12
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly}">{label}</text>')

    parts.append(f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{_HEIGHT - 14}" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="18" y="{_MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {_MARGIN_T + plot_h / 2:.1f})">{ylabel}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
