"""Minimal SVG 1.1 writers for snapshot profiles and grouped bar charts.

The output is plain text with fixed number formatting, so identical inputs
give byte-identical files.
"""
from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = {"B": "#1f77b4", "O": "#ff7f0e", "S": "#2ca02c", "I": "#d62728", "R": "#7f7f7f"}
_FONT = 'font-family="sans-serif" font-size="12"'


def _num(v: float) -> str:
    return f"{v:.2f}"


def _header(width: int, height: int, title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" {_FONT}>{escape(title)}</text>',
    ]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [float(t) for t in np.arange(start, hi + step * 1e-9, step)]


def _label(v: float) -> str:
    return f"{v:g}"


class _Panel:
    """Affine map from data coordinates into a pixel rectangle."""

    def __init__(self, x0, y0, w, h, xlim, ylim):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xlim, self.ylim = xlim, ylim

    def px(self, x):
        lo, hi = self.xlim
        return self.x0 + (np.asarray(x, dtype=float) - lo) / (hi - lo) * self.w

    def py(self, y):
        lo, hi = self.ylim
        return self.y0 + self.h - (np.asarray(y, dtype=float) - lo) / (hi - lo) * self.h

    def frame(self, xlabel: str, ylabel: str) -> list[str]:
        out = [f'<rect x="{_num(self.x0)}" y="{_num(self.y0)}" width="{_num(self.w)}" '
               f'height="{_num(self.h)}" fill="none" stroke="black"/>']
        for t in _ticks(*self.xlim):
            x = float(self.px(t))
            out.append(f'<line x1="{_num(x)}" y1="{_num(self.y0 + self.h)}" x2="{_num(x)}" '
                       f'y2="{_num(self.y0 + self.h + 4)}" stroke="black"/>')
            out.append(f'<text x="{_num(x)}" y="{_num(self.y0 + self.h + 16)}" '
                       f'text-anchor="middle" {_FONT}>{_label(t)}</text>')
        for t in _ticks(*self.ylim):
            y = float(self.py(t))
            out.append(f'<line x1="{_num(self.x0 - 4)}" y1="{_num(y)}" x2="{_num(self.x0)}" '
                       f'y2="{_num(y)}" stroke="black"/>')
            out.append(f'<text x="{_num(self.x0 - 6)}" y="{_num(y + 4)}" text-anchor="end" '
                       f'{_FONT}>{_label(t)}</text>')
        out.append(f'<text x="{_num(self.x0 + self.w / 2)}" y="{_num(self.y0 + self.h + 32)}" '
                   f'text-anchor="middle" {_FONT}>{escape(xlabel)}</text>')
        cy = self.y0 + self.h / 2
        out.append(f'<text x="{_num(self.x0 - 48)}" y="{_num(cy)}" text-anchor="middle" '
                   f'transform="rotate(-90 {_num(self.x0 - 48)} {_num(cy)})" {_FONT}>'
                   f"{escape(ylabel)}</text>")
        return out

    def polyline(self, x, y, color: str) -> str:
        pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in zip(self.px(x), self.py(y)))
        return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'


def _thin(x: np.ndarray, ys: Sequence[np.ndarray], max_points: int):
    """Keep every k-th point (plus the last) so large grids stay light."""
    stride = max(1, int(math.ceil(x.size / max_points)))
    idx = np.arange(0, x.size, stride)
    if idx[-1] != x.size - 1:
        idx = np.append(idx, x.size - 1)
    return x[idx], [y[idx] for y in ys]


def _legend(x: float, y: float, names: Sequence[str]) -> list[str]:
    out = []
    for k, name in enumerate(names):
        yy = y + 16 * k
        out.append(f'<line x1="{_num(x)}" y1="{_num(yy)}" x2="{_num(x + 18)}" y2="{_num(yy)}" '
                   f'stroke="{PALETTE.get(name, "black")}" stroke-width="2"/>')
        out.append(f'<text x="{_num(x + 22)}" y="{_num(yy + 4)}" {_FONT}>{escape(name)}</text>')
    return out


def snapshot_svg(x, fields: Mapping[str, np.ndarray], t: float, n_flowers: float,
                 *, width: int = 760, height: int = 560, max_points: int = 1000) -> str:
    """Two-panel profile at one time.

    The top panel shows the pathogen compartments ``B`` and ``O`` as
    ``log10(1 + value)`` (they span many decades); the bottom panel shows the
    flower compartments ``S``, ``I``, ``R`` on ``[0, N]``.
    """
    x = np.asarray(x, dtype=float)
    names = ("B", "O", "S", "I", "R")
    xs, ys = _thin(x, [np.asarray(fields[n], dtype=float) for n in names], max_points)
    data = dict(zip(names, ys))
    logs = {n: np.log10(1.0 + np.maximum(data[n], 0.0)) for n in ("B", "O")}
    top = max(1.0, math.ceil(max(float(v.max()) for v in logs.values())))
    xlim = (float(x[0]) - (x[1] - x[0]) / 2 if x.size > 1 else 0.0,
            float(x[-1]) + (x[1] - x[0]) / 2 if x.size > 1 else 1.0)
    upper = _Panel(80, 40, width - 180, (height - 140) / 2, xlim, (0.0, top))
    lower = _Panel(80, 40 + (height - 140) / 2 + 50, width - 180, (height - 140) / 2, xlim,
                   (0.0, float(n_flowers)))
    out = _header(width, height, f"t = {t:g} days")
    out += upper.frame("", "log10(1 + CFU)")
    out += lower.frame("x (m)", "flowers")
    for n in ("B", "O"):
        out.append(upper.polyline(xs, logs[n], PALETTE[n]))
    for n in ("S", "I", "R"):
        out.append(lower.polyline(xs, data[n], PALETTE[n]))
    out += _legend(width - 90, upper.y0 + 10, ("B", "O"))
    out += _legend(width - 90, lower.y0 + 10, ("S", "I", "R"))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart_svg(categories: Sequence[str], series: Mapping[str, Sequence[float]],
                  errors: Mapping[str, Sequence[tuple[float, float]]] | None = None,
                  *, title: str = "", ylabel: str = "", width: int = 640,
                  height: int = 420) -> str:
    """Grouped bars, one group per category and one bar per series.

    ``errors`` optionally gives ``(low, high)`` whiskers per bar. Non-finite
    values are drawn as empty slots.
    """
    colors = ("#4c72b0", "#dd8452", "#55a868", "#c44e52")
    values = [v for s in series.values() for v in s if math.isfinite(v)]
    if errors:
        values += [v for e in errors.values() for pair in e for v in pair if math.isfinite(v)]
    lo = min([0.0] + values)
    hi = max([1.0] + values)
    n_cat, n_ser = len(categories), len(series)
    panel = _Panel(80, 40, width - 200, height - 110, (0.0, float(n_cat)), (lo, hi))
    out = _header(width, height, title)
    group = 0.8 / max(n_ser, 1)
    zero = float(panel.py(0.0))
    for j, (name, vals) in enumerate(series.items()):
        color = colors[j % len(colors)]
        for i, v in enumerate(vals):
            if not math.isfinite(v):
                continue
            x = float(panel.px(i + 0.1 + j * group))
            y = float(panel.py(v))
            out.append(f'<rect x="{_num(x)}" y="{_num(min(y, zero))}" '
                       f'width="{_num(group * panel.w / n_cat)}" height="{_num(abs(zero - y))}" '
                       f'fill="{color}"/>')
            if errors and name in errors:
                a, b = errors[name][i]
                if math.isfinite(a) and math.isfinite(b):
                    xc = x + group * panel.w / n_cat / 2
                    out.append(f'<line x1="{_num(xc)}" y1="{_num(float(panel.py(a)))}" '
                               f'x2="{_num(xc)}" y2="{_num(float(panel.py(b)))}" stroke="black"/>')
        yy = panel.y0 + 10 + 18 * j
        out.append(f'<rect x="{_num(width - 110)}" y="{_num(yy - 6)}" width="12" height="12" '
                   f'fill="{color}"/>')
        out.append(f'<text x="{_num(width - 92)}" y="{_num(yy + 4)}" {_FONT}>{escape(name)}</text>')
    out.append(f'<rect x="{_num(panel.x0)}" y="{_num(panel.y0)}" width="{_num(panel.w)}" '
               f'height="{_num(panel.h)}" fill="none" stroke="black"/>')
    out.append(f'<line x1="{_num(panel.x0)}" y1="{_num(zero)}" x2="{_num(panel.x0 + panel.w)}" '
               f'y2="{_num(zero)}" stroke="black"/>')
    for t in _ticks(lo, hi):
        y = float(panel.py(t))
        out.append(f'<text x="{_num(panel.x0 - 6)}" y="{_num(y + 4)}" text-anchor="end" '
                   f'{_FONT}>{_label(round(t, 10))}</text>')
    for i, cat in enumerate(categories):
        out.append(f'<text x="{_num(float(panel.px(i + 0.5)))}" y="{_num(panel.y0 + panel.h + 18)}" '
                   f'text-anchor="middle" {_FONT}>{escape(cat)}</text>')
    cy = panel.y0 + panel.h / 2
    out.append(f'<text x="30" y="{_num(cy)}" text-anchor="middle" '
               f'transform="rotate(-90 30 {_num(cy)})" {_FONT}>{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
