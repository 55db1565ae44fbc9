"""Minimal deterministic SVG scatter plots (log-log), no plotting stack."""

from __future__ import annotations

import math

__all__ = ["render_loglog"]

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 60


def _ticks(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def render_loglog(
    points: list[tuple[float, float]],
    title: str,
    xlabel: str,
    ylabel: str,
    fit: tuple[float, float] | None = None,
) -> str:
    """Scatter of positive data on decade axes; optional log-log fit line
    with (slope, intercept) in natural-log coordinates."""
    if not points or any(x <= 0 or y <= 0 for x, y in points):
        raise ValueError("log-log plot needs positive data")
    lx = [math.log10(x) for x, _ in points]
    ly = [math.log10(y) for _, y in points]
    pad = 0.2
    x0, x1 = min(lx) - pad, max(lx) + pad
    y0, y1 = min(ly) - pad, max(ly) + pad

    def sx(v: float) -> float:
        return _ML + (v - x0) / (x1 - x0) * (_W - _ML - _MR)

    def sy(v: float) -> float:
        return _H - _MB - (v - y0) / (y1 - y0) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="24" text-anchor="middle" font-size="15" '
        f'font-family="monospace">{title}</text>',
    ]
    axis = f'stroke="black" stroke-width="1"'
    parts.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" {axis}/>')
    parts.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" {axis}/>')
    for t in _ticks(x0, x1):
        if x0 <= t <= x1:
            parts.append(
                f'<line x1="{sx(t):.1f}" y1="{_H - _MB}" x2="{sx(t):.1f}" y2="{_H - _MB + 5}" {axis}/>'
            )
            parts.append(
                f'<text x="{sx(t):.1f}" y="{_H - _MB + 20}" text-anchor="middle" '
                f'font-size="12" font-family="monospace">1e{t}</text>'
            )
    for t in _ticks(y0, y1):
        if y0 <= t <= y1:
            parts.append(f'<line x1="{_ML - 5}" y1="{sy(t):.1f}" x2="{_ML}" y2="{sy(t):.1f}" {axis}/>')
            parts.append(
                f'<text x="{_ML - 8}" y="{sy(t):.1f}" text-anchor="end" dominant-baseline="middle" '
                f'font-size="12" font-family="monospace">1e{t}</text>'
            )
    parts.append(
        f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 15}" text-anchor="middle" font-size="13" '
        f'font-family="monospace">{xlabel}</text>'
    )
    parts.append(
        f'<text x="18" y="{(_MT + _H - _MB) / 2:.1f}" text-anchor="middle" font-size="13" '
        f'font-family="monospace" transform="rotate(-90 18 {(_MT + _H - _MB) / 2:.1f})">{ylabel}</text>'
    )
    if fit is not None:
        slope, intercept = fit
        # fit is in natural logs: log y = slope*log x + intercept
        ln10 = math.log(10.0)
        ys0 = (slope * (x0 + pad) * ln10 + intercept) / ln10
        ys1 = (slope * (x1 - pad) * ln10 + intercept) / ln10
        parts.append(
            f'<line x1="{sx(x0 + pad):.1f}" y1="{sy(ys0):.1f}" x2="{sx(x1 - pad):.1f}" '
            f'y2="{sy(ys1):.1f}" stroke="#888888" stroke-width="1" stroke-dasharray="5,4"/>'
        )
    for vx, vy in zip(lx, ly):
        parts.append(f'<circle cx="{sx(vx):.1f}" cy="{sy(vy):.1f}" r="4" fill="#1f4e9c"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
