"""Tiny hand-rolled SVG charts.

Figures are for eyeballing only; CSV is the record.  No plotting dependency:
a handful of polylines, ticks and labels is all a log-log error line needs.
"""

from __future__ import annotations

import math

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 34, 52


def _transform(v, lo, hi, log):
    if log:
        v, lo, hi = math.log10(v), math.log10(lo), math.log10(hi)
    return (v - lo) / (hi - lo) if hi > lo else 0.5


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        return [10.0 ** k for k in range(a, b + 1)]
    step = 10 ** math.floor(math.log10((hi - lo) / 4 or 1))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * abs(hi):
        out.append(v)
        v += step
    return out


def line_chart(series, path, title="", xlabel="", ylabel="",
               logx=False, logy=False) -> None:
    """Write a multi-series line chart.

    ``series`` is a list of (label, xs, ys); nonpositive values are dropped on
    log axes.
    """
    clean = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        if logx:
            keep &= xs > 0
        if logy:
            keep &= ys > 0
        if keep.any():
            clean.append((label, xs[keep], ys[keep]))
    if not clean:
        raise ValueError("nothing to plot")
    all_x = np.concatenate([s[1] for s in clean])
    all_y = np.concatenate([s[2] for s in clean])
    xlo, xhi = float(all_x.min()), float(all_x.max())
    ylo, yhi = float(all_y.min()), float(all_y.max())
    if not logy:
        pad = 0.05 * (yhi - ylo or 1.0)
        ylo, yhi = ylo - pad, yhi + pad
    if xlo == xhi:
        xlo, xhi = xlo - 0.5, xhi + 0.5

    def px(v):
        return _ML + _transform(v, xlo, xhi, logx) * (_W - _ML - _MR)

    def py(v):
        return _H - _MB - _transform(v, ylo, yhi, logy) * (_H - _MT - _MB)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
             f'font-family="sans-serif" font-size="12">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>']
    # axes
    parts.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
                 'stroke="black"/>')
    parts.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>')
    for tv in _ticks(xlo, xhi, logx):
        if xlo <= tv <= xhi:
            x = px(tv)
            parts.append(f'<line x1="{x}" y1="{_H - _MB}" x2="{x}" y2="{_H - _MB + 5}" '
                         'stroke="black"/>')
            label = f"{tv:.3g}"
            parts.append(f'<text x="{x}" y="{_H - _MB + 18}" text-anchor="middle">{label}</text>')
    for tv in _ticks(ylo, yhi, logy):
        if ylo <= tv <= yhi:
            y = py(tv)
            parts.append(f'<line x1="{_ML - 5}" y1="{y}" x2="{_ML}" y2="{y}" stroke="black"/>')
            parts.append(f'<text x="{_ML - 8}" y="{y + 4}" text-anchor="end">{tv:.3g}</text>')
    parts.append(f'<text x="{_W / 2}" y="{_H - 14}" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_H / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {_H / 2})">{ylabel}</text>')
    for i, (label, xs, ys) in enumerate(clean):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = _MT + 16 * i + 12
        parts.append(f'<line x1="{_W - _MR - 120}" y1="{ly - 4}" x2="{_W - _MR - 100}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR - 94}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
