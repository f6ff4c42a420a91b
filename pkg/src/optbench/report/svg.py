"""Tiny deterministic SVG 1.1 writer for line charts.

Output depends only on the inputs: fixed 800x600 viewBox, fixed number
formatting, no timestamps or random ids.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 600
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 190, 50, 70

# 12 (color, dash) pairs, cycled per series
STYLES = (
    ("#1f77b4", ""), ("#d62728", "8,4"), ("#2ca02c", "2,3"), ("#ff7f0e", "10,3,2,3"),
    ("#9467bd", ""), ("#8c564b", "8,4"), ("#e377c2", "2,3"), ("#7f7f7f", "10,3,2,3"),
    ("#bcbd22", ""), ("#17becf", "8,4"), ("#000000", "2,3"), ("#aa4499", "10,3,2,3"),
)


def style_for(i: int) -> tuple[str, str]:
    return STYLES[i % len(STYLES)]


def num(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def nice_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(1, count - 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def tick_label(v: float) -> str:
    if v == int(v) and abs(v) < 1e6:
        return str(int(v))
    return f"{v:.3g}"


class Chart:
    """A single-axes chart in data coordinates."""

    def __init__(self, title: str, xlabel: str, ylabel: str, xlim, ylim):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        x0, x1 = xlim
        y0, y1 = ylim
        if x1 <= x0:
            x1 = x0 + 1.0
        if y1 <= y0:
            y1 = y0 + 1.0
        self.xlim, self.ylim = (x0, x1), (y0, y1)
        self.body: list[str] = []
        self.legend: list[tuple[str, int]] = []
        self.data_lines: list[str] = []
        self.background: list[str] = []

    @property
    def plot_w(self):
        return WIDTH - MARGIN_LEFT - MARGIN_RIGHT

    @property
    def plot_h(self):
        return HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(self, x: float) -> float:
        x0, x1 = self.xlim
        return MARGIN_LEFT + (x - x0) / (x1 - x0) * self.plot_w

    def py(self, y: float) -> float:
        y0, y1 = self.ylim
        return MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * self.plot_h

    def _stroke(self, i: int, width: float = 2.0) -> str:
        color, dash = style_for(i)
        attrs = f'stroke="{color}" stroke-width="{num(width)}" fill="none"'
        if dash:
            attrs += f' stroke-dasharray="{dash}"'
        return attrs

    def polyline(self, xs, ys, series: int, label: str):
        pts = " ".join(f"{num(self.px(x))},{num(self.py(y))}" for x, y in zip(xs, ys))
        self.body.append(f'<polyline class="series" data-series="{escape(label)}" points="{pts}" '
                         f'{self._stroke(series)}/>')

    def marker(self, x, y, series: int, label: str):
        color, _ = style_for(series)
        self.body.append(f'<circle class="series" data-series="{escape(label)}" cx="{num(self.px(x))}" '
                         f'cy="{num(self.py(y))}" r="4" fill="{color}"/>')

    def contour(self, xs, ys):
        pts = " ".join(f"{num(self.px(x))},{num(self.py(y))}" for x, y in zip(xs, ys))
        self.background.append(f'<polyline class="contour" points="{pts}" stroke="#cccccc" '
                               f'stroke-width="0.8" fill="none"/>')

    def add_legend(self, label: str, series: int):
        self.legend.append((label, series))

    def add_data(self, line: str):
        self.data_lines.append(line)

    def render(self) -> str:
        x0, x1 = self.xlim
        y0, y1 = self.ylim
        out = [
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        ]
        if self.data_lines:
            out.append("<!-- data")
            out.extend(line.replace("--", "- -") for line in self.data_lines)
            out.append("-->")
        out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>')
        out.append(f'<text x="{WIDTH / 2 - MARGIN_RIGHT / 2:.0f}" y="28" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="18">{escape(self.title)}</text>')
        out.append('<defs><clipPath id="plotarea">'
                   f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{self.plot_w}" height="{self.plot_h}"/>'
                   '</clipPath></defs>')
        out.append('<g clip-path="url(#plotarea)">')
        out.extend(self.background)
        out.append("</g>")
        out.append(f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{self.plot_w}" height="{self.plot_h}" '
                   'fill="none" stroke="#000000" stroke-width="1"/>')
        base = MARGIN_TOP + self.plot_h
        for t in nice_ticks(x0, x1):
            x = self.px(t)
            out.append(f'<line x1="{num(x)}" y1="{base}" x2="{num(x)}" y2="{base + 5}" stroke="#000000"/>')
            out.append(f'<text x="{num(x)}" y="{base + 20}" text-anchor="middle" font-family="sans-serif" '
                       f'font-size="12">{tick_label(t)}</text>')
        for t in nice_ticks(y0, y1):
            y = self.py(t)
            out.append(f'<line x1="{MARGIN_LEFT - 5}" y1="{num(y)}" x2="{MARGIN_LEFT}" y2="{num(y)}" '
                       'stroke="#000000"/>')
            out.append(f'<text x="{MARGIN_LEFT - 8}" y="{num(y + 4)}" text-anchor="end" '
                       f'font-family="sans-serif" font-size="12">{tick_label(t)}</text>')
        out.append(f'<text class="xlabel" x="{MARGIN_LEFT + self.plot_w / 2:.0f}" y="{HEIGHT - 20}" '
                   f'text-anchor="middle" font-family="sans-serif" font-size="14">{escape(self.xlabel)}</text>')
        ymid = MARGIN_TOP + self.plot_h / 2
        out.append(f'<text class="ylabel" x="20" y="{ymid:.0f}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="14" transform="rotate(-90 20 {ymid:.0f})">{escape(self.ylabel)}</text>')
        out.append('<g clip-path="url(#plotarea)">')
        out.extend(self.body)
        out.append("</g>")
        lx = WIDTH - MARGIN_RIGHT + 15
        out.append('<g class="legend">')
        for k, (label, series) in enumerate(self.legend):
            y = MARGIN_TOP + 15 + 22 * k
            out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 30}" y2="{y}" {self._stroke(series)}/>')
            out.append(f'<text class="legend-entry" x="{lx + 38}" y="{y + 4}" font-family="sans-serif" '
                       f'font-size="12">{escape(label)}</text>')
        out.append("</g>")
        out.append("</svg>")
        return "\n".join(out) + "\n"
