"""Standalone SVG 1.1 figures: grayscale heatmaps, scatter plots and curves."""

from __future__ import annotations

import math
from typing import Dict, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
_HEAD = ('<?xml version="1.0" encoding="UTF-8"?>\n'
         '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" '
         'viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">\n')


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _text(x, y, s, anchor="middle", size=11, rotate=None) -> str:
    rot = f' transform="rotate({rotate} {x:.1f} {y:.1f})"' if rotate is not None else ""
    return (f'<text x="{x:.1f}" y="{y:.1f}" text-anchor="{anchor}" font-size="{size}"{rot}>'
            f"{escape(str(s))}</text>\n")


def gray(value: float) -> str:
    """Hex gray for a frequency in [0, 1]: 0 is black, 1 is white."""
    v = min(1.0, max(0.0, float(value)))
    c = int(round(255 * v))
    return f"#{c:02x}{c:02x}{c:02x}"


def heatmap(
    values: np.ndarray,
    x_labels: Sequence,
    y_labels: Sequence,
    title: str = "",
    x_name: str = "n/m",
    y_name: str = "k/n",
    cell: int = 36,
) -> str:
    """One grayscale cell per entry; ``values[i, j]`` is row ``y_labels[i]``
    (drawn bottom to top) and column ``x_labels[j]``.  NaN cells are hatched
    red to mark them as skipped."""
    values = np.atleast_2d(np.asarray(values, float))
    rows, cols = values.shape
    left, top, right, bottom = 64, 34, 70, 50
    w, h = left + cols * cell + right, top + rows * cell + bottom
    out = [_HEAD.format(w=w, h=h)]
    if title:
        out.append(_text(left + cols * cell / 2, 20, title, size=13))
    for i in range(rows):
        y0 = top + (rows - 1 - i) * cell
        for j in range(cols):
            x0 = left + j * cell
            v = values[i, j]
            if np.isfinite(v):
                out.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" fill="{gray(v)}"/>\n')
            else:
                out.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" fill="#ffffff" '
                           f'stroke="#cc0000" stroke-dasharray="3,3"/>\n')
        out.append(_text(left - 6, y0 + cell / 2 + 4, _fmt(float(y_labels[i])), anchor="end"))
    for j in range(cols):
        out.append(_text(left + j * cell + cell / 2, top + rows * cell + 14, _fmt(float(x_labels[j]))))
    out.append(_text(left + cols * cell / 2, h - 12, x_name, size=12))
    out.append(_text(16, top + rows * cell / 2, y_name, size=12, rotate=-90))
    # colour bar
    bx = left + cols * cell + 18
    steps = 20
    bh = rows * cell / steps
    for s in range(steps):
        v = 1.0 - (s + 0.5) / steps
        out.append(f'<rect x="{bx}" y="{top + s * bh:.2f}" width="14" height="{bh + 0.5:.2f}" fill="{gray(v)}"/>\n')
    out.append(f'<rect x="{bx}" y="{top}" width="14" height="{rows * cell}" fill="none" stroke="#000"/>\n')
    out.append(_text(bx + 18, top + 8, "1", anchor="start"))
    out.append(_text(bx + 18, top + rows * cell, "0", anchor="start"))
    out.append("</svg>\n")
    return "".join(out)


def _axes(xs, ys, logy=False):
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    ok = np.isfinite(xs) & np.isfinite(ys)
    if logy:
        ok &= ys > 0
    if not ok.any():
        return (0.0, 1.0), (0.0, 1.0)
    x0, x1 = float(xs[ok].min()), float(xs[ok].max())
    yv = np.log10(ys[ok]) if logy else ys[ok]
    y0, y1 = float(yv.min()), float(yv.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    return (x0, x1), (y0, y1)


def _plot(
    series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
    kind: str,
    title: str,
    x_name: str,
    y_name: str,
    logy: bool = False,
    width: int = 560,
    height: int = 380,
) -> str:
    left, top, right, bottom = 64, 34, 130, 46
    pw, ph = width - left - right, height - top - bottom
    allx = np.concatenate([np.asarray(x, float) for x, _ in series.values()]) if series else np.zeros(1)
    ally = np.concatenate([np.asarray(y, float) for _, y in series.values()]) if series else np.zeros(1)
    (x0, x1), (y0, y1) = _axes(allx, ally, logy)

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        v = math.log10(y) if logy else y
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [_HEAD.format(w=width, h=height)]
    if title:
        out.append(_text(left + pw / 2, 20, title, size=13))
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>\n')
    for t in np.linspace(0, 1, 5):
        xv = x0 + t * (x1 - x0)
        yv = y0 + t * (y1 - y0)
        out.append(_text(left + t * pw, top + ph + 14, _fmt(xv)))
        out.append(_text(left - 5, top + ph - t * ph + 4, _fmt(10**yv if logy else yv), anchor="end"))
    out.append(_text(left + pw / 2, height - 10, x_name, size=12))
    out.append(_text(14, top + ph / 2, y_name, size=12, rotate=-90))
    for idx, (name, (xs, ys)) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = [(float(a), float(b)) for a, b in zip(xs, ys)
               if np.isfinite(a) and np.isfinite(b) and (b > 0 or not logy)]
        if kind == "curve" and len(pts) > 1:
            d = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in pts)
            out.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.6"/>\n')
        else:
            for a, b in pts:
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.2" fill="{color}" fill-opacity="0.6"/>\n')
        ly = top + 12 + 16 * idx
        out.append(f'<rect x="{left + pw + 12}" y="{ly - 8}" width="10" height="10" fill="{color}"/>\n')
        out.append(_text(left + pw + 26, ly + 1, name, anchor="start"))
    out.append("</svg>\n")
    return "".join(out)


def scatter(series, title="", x_name="x", y_name="y", logy=False) -> str:
    """``series`` maps a legend label to ``(xs, ys)``."""
    return _plot(series, "scatter", title, x_name, y_name, logy)


def curves(series, title="", x_name="x", y_name="y", logy=False) -> str:
    """Polylines; points are drawn in the given order."""
    return _plot(series, "curve", title, x_name, y_name, logy)


def write(path, svg_text: str) -> None:
    with open(path, "w") as fh:
        fh.write(svg_text)
