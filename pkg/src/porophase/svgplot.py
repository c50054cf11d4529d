"""Minimal hand-assembled SVG 1.1 line charts (presentation only)."""

from __future__ import annotations

import numpy as np

_W, _H = 420, 320
_ML, _MR, _MT, _MB = 58, 12, 24, 42


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _panel(series, title: str, x0: float) -> str:
    """series: list of (x array, y array, style) with style 'solid'|'dotted'."""
    xs = np.concatenate([np.asarray(s[0], dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    xmin, xmax = float(xs.min()), float(xs.max())
    ymin, ymax = float(ys.min()), float(ys.max())
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0
    pad = 0.05 * (ymax - ymin)
    ymin -= pad
    ymax += pad

    def px(x):
        return x0 + _ML + (x - xmin) / (xmax - xmin) * (_W - _ML - _MR)

    def py(y):
        return _MT + (ymax - y) / (ymax - ymin) * (_H - _MT - _MB)

    parts = []
    ax = (f'<rect x="{px(xmin):.1f}" y="{py(ymax):.1f}" '
          f'width="{px(xmax) - px(xmin):.1f}" height="{py(ymin) - py(ymax):.1f}" '
          'fill="none" stroke="black" stroke-width="1"/>')
    parts.append(ax)
    parts.append(f'<text x="{x0 + _ML}" y="{_MT - 8}" font-size="13">{title}</text>')
    for frac in (0.0, 0.5, 1.0):
        xv = xmin + frac * (xmax - xmin)
        yv = ymin + frac * (ymax - ymin)
        parts.append(f'<text x="{px(xv):.1f}" y="{_H - _MB + 16}" font-size="11" '
                     f'text-anchor="middle">{_fmt(xv)}</text>')
        parts.append(f'<text x="{x0 + _ML - 6}" y="{py(yv) + 4:.1f}" font-size="11" '
                     f'text-anchor="end">{_fmt(yv)}</text>')
    for x_arr, y_arr, style in series:
        pts = " ".join(f"{px(float(x)):.2f},{py(float(y)):.2f}"
                       for x, y in zip(x_arr, y_arr))
        dash = ' stroke-dasharray="4,3"' if style == "dotted" else ""
        parts.append(f'<polyline points="{pts}" fill="none" stroke="black" '
                     f'stroke-width="1.3"{dash}/>')
    return "\n".join(parts)


def two_panel_svg(series_left, series_right, path, title_left: str = "eps(x)",
                  title_right: str = "m(x)") -> None:
    body = _panel(series_left, title_left, 0) + "\n" + _panel(series_right, title_right, _W)
    with open(path, "w") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n'
                 f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
                 f'width="{2 * _W}" height="{_H}">\n{body}\n</svg>\n')


def single_panel_svg(series, path, title: str = "") -> None:
    with open(path, "w") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n'
                 f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
                 f'width="{_W}" height="{_H}">\n{_panel(series, title, 0)}\n</svg>\n')
