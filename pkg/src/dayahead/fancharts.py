"""Static SVG fan charts for 24-hour quantile forecasts.

Hand-rolled SVG 1.1 with canonical number formatting, so identical
forecasts render to identical bytes. Bands are nested central intervals;
their edges cannot cross because quantile values are monotone in the level.
"""

from __future__ import annotations

import numpy as np

from .forecasts import QuantileForecast
from .series import format_value

DEFAULT_BANDS = ((0.05, 0.95), (0.10, 0.90), (0.25, 0.75))

_BAND_FILL = "#3465a4"
_BAND_OPACITY = (0.15, 0.25, 0.38)
_MEDIAN_STROKE = "#204a87"
_OBS_STROKE = "#cc0000"


def _level_curve(fc: QuantileForecast, level: float) -> np.ndarray:
    return np.array(
        [np.interp(level, fc.levels, fc.values[:, h]) for h in range(24)]
    )


def render_fan_chart(
    fc: QuantileForecast,
    observations=None,
    bands=DEFAULT_BANDS,
    width: int = 640,
    height: int = 360,
    title: str = "",
) -> str:
    """SVG document with one polygon per band plus the median trajectory.

    ``observations`` is an optional length-24 vector drawn as a dashed
    overlay. Band levels outside the fitted range flatten to the outermost
    fitted quantile.
    """
    if not fc.is_monotone:
        raise ValueError("quantile values cross; repair before plotting")
    for lo, hi in bands:
        if not 0 < lo < hi < 1:
            raise ValueError(f"band ({lo}, {hi}) is not a central interval")
    obs = None
    if observations is not None:
        obs = np.asarray(observations, dtype=np.float64)
        if obs.shape != (24,):
            raise ValueError("observations must be a length-24 vector")

    curves = {}
    for lo, hi in bands:
        curves[lo] = _level_curve(fc, lo)
        curves[hi] = _level_curve(fc, hi)
    median = _level_curve(fc, 0.5)

    stacked = [median, *curves.values()] + ([obs] if obs is not None else [])
    vmin = min(float(c.min()) for c in stacked)
    vmax = max(float(c.max()) for c in stacked)
    if vmax - vmin < 1e-9:
        vmin, vmax = vmin - 1.0, vmax + 1.0
    pad = 0.05 * (vmax - vmin)
    vmin, vmax = vmin - pad, vmax + pad

    m_left, m_right, m_top, m_bottom = 56, 16, 28, 36
    plot_w = width - m_left - m_right
    plot_h = height - m_top - m_bottom

    def x(h: int) -> str:
        return format_value(m_left + plot_w * h / 23.0)

    def y(v: float) -> str:
        return format_value(m_top + plot_h * (vmax - v) / (vmax - vmin))

    def path_points(values) -> str:
        return " ".join(f"{x(h)},{y(values[h])}" for h in range(24))

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width // 2}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{title}</text>'
        )

    # widest band first so narrower ones sit on top
    ordered = sorted(bands, key=lambda b: b[1] - b[0], reverse=True)
    for i, (lo, hi) in enumerate(ordered):
        upper = path_points(curves[hi])
        lower = " ".join(
            f"{x(h)},{y(curves[lo][h])}" for h in range(23, -1, -1)
        )
        opacity = _BAND_OPACITY[min(i, len(_BAND_OPACITY) - 1)]
        parts.append(
            f'<polygon points="{upper} {lower}" fill="{_BAND_FILL}" '
            f'fill-opacity="{opacity}" stroke="none"/>'
        )
    parts.append(
        f'<polyline points="{path_points(median)}" fill="none" '
        f'stroke="{_MEDIAN_STROKE}" stroke-width="1.5"/>'
    )
    if obs is not None:
        parts.append(
            f'<polyline points="{path_points(obs)}" fill="none" '
            f'stroke="{_OBS_STROKE}" stroke-width="1.2" stroke-dasharray="4,3"/>'
        )

    axis_y = m_top + plot_h
    parts.append(
        f'<line x1="{m_left}" y1="{axis_y}" x2="{m_left + plot_w}" y2="{axis_y}" '
        'stroke="#555555" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{m_left}" y1="{m_top}" x2="{m_left}" y2="{axis_y}" '
        'stroke="#555555" stroke-width="1"/>'
    )
    for h in (0, 6, 12, 18, 23):
        parts.append(
            f'<text x="{x(h)}" y="{axis_y + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{h}</text>'
        )
    for v in np.linspace(vmin + pad, vmax - pad, 5):
        parts.append(
            f'<text x="{m_left - 6}" y="{y(float(v))}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{format_value(round(float(v), 2))}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_fan_chart(path, svg: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
