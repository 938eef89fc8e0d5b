"""Dependency-free static line plots (SVG) of trajectory channels."""

from __future__ import annotations

from typing import Iterable, Sequence, Union
from xml.sax.saxutils import escape

import numpy as np

from .observables import TrajectoryRecord, atomic_write_text

SVG_NS = "http://www.w3.org/2000/svg"
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")

_W, _H = 720, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 170, 30, 50


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list:
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def svg_lines(records: Union[TrajectoryRecord, Sequence], channels: Iterable[str], title: str = "") -> str:
    """Render one polyline per (record, channel).

    ``records`` is a single record or a sequence of ``(label, record)``
    pairs; legend entries read ``label: channel``.
    """
    if isinstance(records, TrajectoryRecord):
        records = [("", records)]
    channels = list(channels)
    if not channels:
        raise ValueError("select at least one channel")
    series = []
    for label, rec in records:
        if len(rec) == 0:
            raise ValueError("cannot plot an empty record")
        for ch in channels:
            name = f"{label}: {ch}" if label else ch
            series.append((name, np.asarray(rec.times, float), np.asarray(rec.channel(ch), float)))

    t_lo = min(s[1][0] for s in series)
    t_hi = max(s[1][-1] for s in series)
    y_lo = min(float(np.min(s[2])) for s in series)
    y_hi = max(float(np.max(s[2])) for s in series)
    if t_hi == t_lo:
        t_hi = t_lo + 1.0
    if y_hi == y_lo:
        pad = 0.5 if y_hi == 0 else 0.1 * abs(y_hi)
        y_lo, y_hi = y_lo - pad, y_hi + pad

    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def sx(t):
        return _LEFT + (t - t_lo) / (t_hi - t_lo) * pw

    def sy(v):
        return _TOP + (1.0 - (v - y_lo) / (y_hi - y_lo)) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="{SVG_NS}" version="1.1" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{_LEFT}" y="18" font-family="sans-serif" font-size="13">{escape(title)}</text>')
    out.append(f'<g stroke="black" stroke-width="1" fill="none">'
               f'<line x1="{_LEFT}" y1="{_TOP + ph}" x2="{_LEFT + pw}" y2="{_TOP + ph}"/>'
               f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_TOP + ph}"/></g>')
    out.append('<g font-family="sans-serif" font-size="10" fill="black">')
    for t in _nice_ticks(t_lo, t_hi):
        x = sx(t)
        out.append(f'<line x1="{x:.2f}" y1="{_TOP + ph}" x2="{x:.2f}" y2="{_TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{_TOP + ph + 16}" text-anchor="middle">{t:.4g}</text>')
    for v in _nice_ticks(y_lo, y_hi):
        y = sy(v)
        out.append(f'<line x1="{_LEFT - 4}" y1="{y:.2f}" x2="{_LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{_LEFT - 6}" y="{y + 3:.2f}" text-anchor="end">{v:.4g}</text>')
    out.append(f'<text x="{_LEFT + pw / 2:.1f}" y="{_H - 12}" text-anchor="middle" font-size="12">t (fs)</text>')
    out.append(f'<text x="16" y="{_TOP + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {_TOP + ph / 2:.1f})">value</text>')
    out.append("</g>")

    for k, (name, ts, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{sx(t):.3f},{sy(v):.3f}" for t, v in zip(ts, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}">'
                   f'<title>{escape(name)}</title></polyline>')

    lx = _LEFT + pw + 15
    out.append('<g font-family="sans-serif" font-size="11">')
    for k, (name, _, _) in enumerate(series):
        y = _TOP + 10 + 18 * k
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 20}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{y + 4}" class="legend">{escape(name)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg_lines(records, channels, path, title: str = "") -> None:
    atomic_write_text(path, svg_lines(records, channels, title))
