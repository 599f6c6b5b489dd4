"""Minimal deterministic SVG emission: polyline charts and heatmaps.

No timestamps, no randomness, fixed float formatting; identical inputs yield
byte-identical files.  Every figure carries a provenance comment naming the
seed and discretization it came from.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

PALETTE = ("#1f6eb4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")

# Dark-blue -> yellow ramp for density cells.
_RAMP = ((0.267, 0.005, 0.329), (0.229, 0.322, 0.545), (0.128, 0.567, 0.551),
         (0.369, 0.789, 0.383), (0.993, 0.906, 0.144))

_MARGIN_L = 64.0
_MARGIN_R = 16.0
_MARGIN_T = 34.0
_MARGIN_B = 46.0


def _fmt(v: float) -> str:
    return format(float(v), ".2f")


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = mag * min((m for m in (1.0, 2.0, 2.5, 5.0, 10.0) if raw / mag <= m),
                     default=10.0)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + step * 1e-9:
        ticks.append(0.0 if abs(v) < step * 1e-9 else v)
        v += step
    return ticks


def _tick_label(v: float) -> str:
    return format(v, ".6g")


def _ramp_color(u: float) -> str:
    u = min(max(u, 0.0), 1.0)
    pos = u * (len(_RAMP) - 1)
    k = min(int(pos), len(_RAMP) - 2)
    frac = pos - k
    rgb = [(1 - frac) * _RAMP[k][c] + frac * _RAMP[k + 1][c] for c in range(3)]
    return "#%02x%02x%02x" % tuple(int(round(255 * c)) for c in rgb)


class _Frame:
    """Data-to-pixel transform plus the axes/labels boilerplate."""

    def __init__(self, x_lo, x_hi, y_lo, y_hi, width, height):
        if x_hi <= x_lo:
            x_hi = x_lo + 1.0
        if y_hi <= y_lo:
            y_hi = y_lo + 1.0
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo, y_hi
        self.width, self.height = width, height
        self.px0 = _MARGIN_L
        self.px1 = width - _MARGIN_R
        self.py0 = _MARGIN_T
        self.py1 = height - _MARGIN_B

    def x(self, v: float) -> float:
        return self.px0 + (v - self.x_lo) / (self.x_hi - self.x_lo) * (self.px1 - self.px0)

    def y(self, v: float) -> float:
        return self.py1 - (v - self.y_lo) / (self.y_hi - self.y_lo) * (self.py1 - self.py0)

    def axes(self, title: str, xlabel: str, ylabel: str) -> list[str]:
        out = [
            f'<rect x="{_fmt(self.px0)}" y="{_fmt(self.py0)}" '
            f'width="{_fmt(self.px1 - self.px0)}" height="{_fmt(self.py1 - self.py0)}" '
            'fill="none" stroke="#333333" stroke-width="1"/>'
        ]
        for v in _nice_ticks(self.x_lo, self.x_hi):
            if not self.x_lo <= v <= self.x_hi:
                continue
            px = self.x(v)
            out.append(f'<line x1="{_fmt(px)}" y1="{_fmt(self.py1)}" '
                       f'x2="{_fmt(px)}" y2="{_fmt(self.py1 + 4)}" '
                       'stroke="#333333" stroke-width="1"/>')
            out.append(f'<text x="{_fmt(px)}" y="{_fmt(self.py1 + 17)}" '
                       'font-family="monospace" font-size="11" fill="#333333" '
                       f'text-anchor="middle">{_tick_label(v)}</text>')
        for v in _nice_ticks(self.y_lo, self.y_hi):
            if not self.y_lo <= v <= self.y_hi:
                continue
            py = self.y(v)
            out.append(f'<line x1="{_fmt(self.px0 - 4)}" y1="{_fmt(py)}" '
                       f'x2="{_fmt(self.px0)}" y2="{_fmt(py)}" '
                       'stroke="#333333" stroke-width="1"/>')
            out.append(f'<text x="{_fmt(self.px0 - 7)}" y="{_fmt(py + 4)}" '
                       'font-family="monospace" font-size="11" fill="#333333" '
                       f'text-anchor="end">{_tick_label(v)}</text>')
        cx = 0.5 * (self.px0 + self.px1)
        out.append(f'<text x="{_fmt(cx)}" y="20" font-family="monospace" '
                   f'font-size="13" fill="#111111" text-anchor="middle">{title}</text>')
        out.append(f'<text x="{_fmt(cx)}" y="{_fmt(self.height - 12)}" '
                   'font-family="monospace" font-size="12" fill="#333333" '
                   f'text-anchor="middle">{xlabel}</text>')
        ly = 0.5 * (self.py0 + self.py1)
        out.append(f'<text x="16" y="{_fmt(ly)}" font-family="monospace" '
                   'font-size="12" fill="#333333" text-anchor="middle" '
                   f'transform="rotate(-90 16 {_fmt(ly)})">{ylabel}</text>')
        return out


def _document(width: float, height: float, provenance: str,
              body: Sequence[str]) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
    ]
    if provenance:
        head.insert(1, f"<!-- provenance: {provenance} -->")
    tail = ["</svg>", ""]
    return "\n".join(head + [f'<rect width="{_fmt(width)}" height="{_fmt(height)}" '
                             'fill="#ffffff"/>'] + list(body) + tail)


def _downsample(x: np.ndarray, y: np.ndarray, max_points: int = 4000):
    if len(x) <= max_points:
        return x, y
    idx = np.linspace(0, len(x) - 1, max_points).round().astype(int)
    return x[idx], y[idx]


def line_chart(series, *, title: str = "", xlabel: str = "", ylabel: str = "",
               provenance: str = "", width: float = 760.0,
               height: float = 520.0) -> str:
    """Polyline chart; series is a sequence of (label, x, y) triples."""
    cleaned = []
    for k, (label, x, y) in enumerate(series):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        x, y = _downsample(x[ok], y[ok])
        cleaned.append((label, x, y, PALETTE[k % len(PALETTE)]))
    xs = np.concatenate([c[1] for c in cleaned])
    ys = np.concatenate([c[2] for c in cleaned])
    if xs.size == 0:
        raise ValueError("no finite points to plot")
    frame = _Frame(xs.min(), xs.max(), ys.min(), ys.max(), width, height)
    body = frame.axes(title, xlabel, ylabel)
    for label, x, y, color in cleaned:
        pts = " ".join(f"{_fmt(frame.x(a))},{_fmt(frame.y(b))}"
                       for a, b in zip(x, y))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                    'stroke-width="1.2"/>')
    ly = frame.py0 + 14
    for label, _, _, color in cleaned:
        if not label:
            continue
        lx = frame.px1 - 150
        body.append(f'<line x1="{_fmt(lx)}" y1="{_fmt(ly - 4)}" '
                    f'x2="{_fmt(lx + 24)}" y2="{_fmt(ly - 4)}" '
                    f'stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{_fmt(lx + 30)}" y="{_fmt(ly)}" '
                    'font-family="monospace" font-size="11" '
                    f'fill="#333333">{label}</text>')
        ly += 15
    return _document(width, height, provenance, body)


def heatmap(s_edges, i_edges, mass, *, title: str = "", xlabel: str = "",
            ylabel: str = "", provenance: str = "", width: float = 640.0,
            height: float = 560.0) -> str:
    """Density heatmap of a normalized 2-D histogram; zero cells stay white."""
    s_edges = np.asarray(s_edges, dtype=float)
    i_edges = np.asarray(i_edges, dtype=float)
    mass = np.asarray(mass, dtype=float)
    peak = float(mass.max())
    if peak <= 0.0:
        raise ValueError("histogram mass is empty")
    frame = _Frame(s_edges[0], s_edges[-1], i_edges[0], i_edges[-1],
                   width, height)
    body: list[str] = []
    for a in range(mass.shape[0]):
        for b in range(mass.shape[1]):
            m = mass[a, b]
            if m <= 0.0:
                continue
            x0 = frame.x(s_edges[a])
            x1 = frame.x(s_edges[a + 1])
            y0 = frame.y(i_edges[b + 1])
            y1 = frame.y(i_edges[b])
            color = _ramp_color((m / peak) ** 0.5)
            body.append(f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" '
                        f'width="{_fmt(x1 - x0)}" height="{_fmt(y1 - y0)}" '
                        f'fill="{color}"/>')
    body += frame.axes(title, xlabel, ylabel)
    return _document(width, height, provenance, body)
