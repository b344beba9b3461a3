"""Minimal deterministic SVG line charts."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")
WIDTH, HEIGHT = 720, 400
MARGIN = (60, 20, 40, 60)  # left, right, top, bottom


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_chart(series: dict, title: str = "", x_labels=None, y_label: str = "") -> str:
    """Render ``{name: [y0, y1, ...]}`` against a shared categorical x axis.

    NaN values break a line. ``x_labels`` names the x positions.
    """
    names = list(series)
    n = max((len(v) for v in series.values()), default=0)
    finite = [y for v in series.values() for y in v if y is not None and not math.isnan(y)]
    lo, hi = (min(finite), max(finite)) if finite else (0.0, 1.0)
    if hi == lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom

    def px(i):
        return left + (pw * i / (n - 1) if n > 1 else pw / 2)

    def py(y):
        return top + ph * (hi - y) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for j in range(5):
        y = lo + (hi - lo) * j / 4
        out.append(f'<text x="{left - 6}" y="{_fmt(py(y) + 4)}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{y:.3g}</text>')
    if x_labels:
        step = max(1, len(x_labels) // 12)
        for i, lab in enumerate(x_labels):
            if i % step == 0:
                out.append(f'<text x="{_fmt(px(i))}" y="{top + ph + 16}" text-anchor="middle" '
                           f'font-family="sans-serif" font-size="11">{escape(str(lab))}</text>')
    if y_label:
        out.append(f'<text x="16" y="{top + ph / 2:.0f}" transform="rotate(-90 16 {top + ph / 2:.0f})" '
                   f'text-anchor="middle" font-family="sans-serif" font-size="12">{escape(y_label)}</text>')
    for k, name in enumerate(names):
        colour = PALETTE[k % len(PALETTE)]
        segment = []
        segments = []
        for i, y in enumerate(series[name]):
            if y is None or math.isnan(y):
                if segment:
                    segments.append(segment)
                segment = []
            else:
                segment.append(f"{_fmt(px(i))},{_fmt(py(y))}")
        if segment:
            segments.append(segment)
        for seg in segments:
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{" ".join(seg)}"/>')
        out.append(f'<text x="{left + 10}" y="{top + 14 + 14 * k}" fill="{colour}" font-family="sans-serif" '
                   f'font-size="12">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
