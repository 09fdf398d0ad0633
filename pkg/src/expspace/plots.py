"""Hand-rolled SVG emission for series + attribution overlays.

No plotting dependency: the files are small, deterministic and easy to test
for well-formedness.  The time panel draws the series as a polyline over a
per-time-step heat strip; non-time spaces get a second strip indexed by the
space's coordinate labels.  Signed scores use a symmetric blue-white-red
scale centered at zero.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .attribution import Attribution
from .spaces import Space

_W, _PANEL_H, _MARGIN, _STRIP_H = 640, 160, 36, 18


def _heat_color(t: float) -> str:
    """t in [-1, 1] -> blue..white..red."""
    t = float(np.clip(t, -1.0, 1.0))
    if t >= 0:
        r, g, b = 255, int(255 * (1 - t)), int(255 * (1 - t))
    else:
        r, g, b = int(255 * (1 + t)), int(255 * (1 + t)), 255
    return f"rgb({r},{g},{b})"


def _normalize_signed(scores: np.ndarray) -> np.ndarray:
    peak = np.abs(scores).max()
    return scores / peak if peak > 0 else np.zeros_like(scores)


def _strip(parts, scores, x0, y0, width, height):
    vals = _normalize_signed(np.asarray(scores, dtype=np.float64))
    cell = width / len(vals)
    for i, val in enumerate(vals):
        parts.append(
            f'<rect x="{x0 + i * cell:.2f}" y="{y0:.2f}" width="{cell + 0.5:.2f}" '
            f'height="{height:.2f}" fill="{_heat_color(val)}"/>'
        )


def _polyline(parts, values, x0, y0, width, height, color="black"):
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    span = hi - lo if hi > lo else 1.0
    xs = x0 + np.arange(v.size) * (width / max(v.size - 1, 1))
    ys = y0 + height - (v - lo) / span * height
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    parts.append(
        f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>'
    )


def _text(parts, s, x, y, size=10, anchor="start"):
    parts.append(
        f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" '
        f'font-family="monospace" text-anchor="{anchor}">{escape(s)}</text>'
    )


def render_attribution_svg(x, space: Space, attribution: Attribution) -> str:
    """Series + attribution heat for one sample; returns the SVG text."""
    values = np.asarray(getattr(x, "values", x), dtype=np.float64)
    scores = np.asarray(attribution.scores, dtype=np.float64)
    two_panels = space.kind != "time"
    height = _MARGIN + _PANEL_H + (_PANEL_H if two_panels else 0) + _MARGIN
    inner_w = _W - 2 * _MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{height}" '
        f'viewBox="0 0 {_W} {height}">',
        f'<rect x="0" y="0" width="{_W}" height="{height}" fill="white"/>',
    ]

    # panel 1: time domain; difference scores map one-to-one onto time steps
    y0 = _MARGIN
    _text(parts, f"series (N={values.size})", _MARGIN, y0 - 6)
    if space.kind in ("time", "difference"):
        _strip(parts, scores, _MARGIN, y0, inner_w, _PANEL_H - _STRIP_H)
    elif space.kind == "min_zero":
        _strip(parts, scores[:-1], _MARGIN, y0, inner_w, _PANEL_H - _STRIP_H)
    _polyline(parts, values, _MARGIN, y0, inner_w, _PANEL_H - _STRIP_H)

    if two_panels:
        y1 = _MARGIN + _PANEL_H
        labels = space.bin_labels()
        _text(parts, f"attribution in {space.kind} space", _MARGIN, y1 - 6)
        _strip(parts, scores, _MARGIN, y1, inner_w, _STRIP_H * 2)
        step = max(1, len(labels) // 8)
        cell = inner_w / len(labels)
        for i in range(0, len(labels), step):
            _text(parts, labels[i], _MARGIN + i * cell, y1 + _STRIP_H * 2 + 12, size=8)
    parts.append("</svg>")
    return "\n".join(parts)


def emit_attribution_plot(x, space: Space, attribution: Attribution, path) -> None:
    svg = render_attribution_svg(x, space, attribution)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
