"""Minimal SVG scatter plots, emitted directly as XML.

The analysis pipeline only needs static scatter plots (one point per image,
a least-squares line, and an r/p annotation), so the SVG is built with the
standard library instead of a plotting dependency.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from .arrays import InvariantError

__all__ = ["scatter_svg"]

_WIDTH = 480
_HEIGHT = 360
_MARGIN_L = 64
_MARGIN_R = 16
_MARGIN_T = 40
_MARGIN_B = 52


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, count)
    return [float(v) for v in raw]


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def scatter_svg(
    x,
    y,
    path: Path | str | None = None,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    r: float | None = None,
    p_value: float | None = None,
) -> str:
    """Render points plus the least-squares line; annotate r and p if given."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape or x.size == 0:
        raise InvariantError("scatter_svg needs two equal-length nonempty 1D sequences")

    x_lo, x_hi = float(x.min()), float(x.max())
    y_lo, y_hi = float(y.min()), float(y.max())
    x_pad = 0.05 * (x_hi - x_lo) or 0.5
    y_pad = 0.05 * (y_hi - y_lo) or 0.5
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(v: float) -> float:
        return _MARGIN_L + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return _MARGIN_T + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h

    svg = ET.Element(
        "svg",
        {
            "xmlns": "http://www.w3.org/2000/svg",
            "width": str(_WIDTH),
            "height": str(_HEIGHT),
            "viewBox": f"0 0 {_WIDTH} {_HEIGHT}",
        },
    )
    ET.SubElement(svg, "rect", {"width": str(_WIDTH), "height": str(_HEIGHT), "fill": "white"})

    axes = {"stroke": "#333333", "stroke-width": "1", "fill": "none"}
    ET.SubElement(
        svg,
        "path",
        {
            "d": (
                f"M {_MARGIN_L} {_MARGIN_T} L {_MARGIN_L} {_MARGIN_T + plot_h} "
                f"L {_MARGIN_L + plot_w} {_MARGIN_T + plot_h}"
            ),
            **axes,
        },
    )
    text_base = {"font-family": "sans-serif", "fill": "#222222"}
    for tv in _ticks(x_lo, x_hi):
        px = sx(tv)
        ET.SubElement(
            svg,
            "line",
            {
                "x1": f"{px:.2f}",
                "y1": str(_MARGIN_T + plot_h),
                "x2": f"{px:.2f}",
                "y2": str(_MARGIN_T + plot_h + 5),
                "stroke": "#333333",
            },
        )
        label = ET.SubElement(
            svg,
            "text",
            {
                "x": f"{px:.2f}",
                "y": str(_MARGIN_T + plot_h + 20),
                "font-size": "11",
                "text-anchor": "middle",
                **text_base,
            },
        )
        label.text = _fmt(tv)
    for tv in _ticks(y_lo, y_hi):
        py = sy(tv)
        ET.SubElement(
            svg,
            "line",
            {
                "x1": str(_MARGIN_L - 5),
                "y1": f"{py:.2f}",
                "x2": str(_MARGIN_L),
                "y2": f"{py:.2f}",
                "stroke": "#333333",
            },
        )
        label = ET.SubElement(
            svg,
            "text",
            {
                "x": str(_MARGIN_L - 8),
                "y": f"{py + 4:.2f}",
                "font-size": "11",
                "text-anchor": "end",
                **text_base,
            },
        )
        label.text = _fmt(tv)

    # Least-squares line, clipped to the x range of the data.
    if x.size >= 2 and float(np.ptp(x)) > 0:
        slope, intercept = np.polyfit(x, y, 1)
        xs = np.array([x.min(), x.max()])
        ys = slope * xs + intercept
        ET.SubElement(
            svg,
            "line",
            {
                "x1": f"{sx(xs[0]):.2f}",
                "y1": f"{sy(ys[0]):.2f}",
                "x2": f"{sx(xs[1]):.2f}",
                "y2": f"{sy(ys[1]):.2f}",
                "stroke": "#d62728",
                "stroke-width": "1.5",
            },
        )

    for xi, yi in zip(x, y):
        ET.SubElement(
            svg,
            "circle",
            {
                "cx": f"{sx(float(xi)):.2f}",
                "cy": f"{sy(float(yi)):.2f}",
                "r": "3.5",
                "fill": "#1f77b4",
                "fill-opacity": "0.8",
            },
        )

    if title:
        t = ET.SubElement(
            svg,
            "text",
            {
                "x": str(_WIDTH // 2),
                "y": "20",
                "font-size": "14",
                "text-anchor": "middle",
                **text_base,
            },
        )
        t.text = title
    if x_label:
        t = ET.SubElement(
            svg,
            "text",
            {
                "x": str(_MARGIN_L + plot_w // 2),
                "y": str(_HEIGHT - 12),
                "font-size": "12",
                "text-anchor": "middle",
                **text_base,
            },
        )
        t.text = x_label
    if y_label:
        t = ET.SubElement(
            svg,
            "text",
            {
                "x": "16",
                "y": str(_MARGIN_T + plot_h // 2),
                "font-size": "12",
                "text-anchor": "middle",
                "transform": f"rotate(-90 16 {_MARGIN_T + plot_h // 2})",
                **text_base,
            },
        )
        t.text = y_label
    if r is not None:
        note = f"r = {r:.3f}"
        if p_value is not None:
            note += f", p = {p_value:.3g}"
        t = ET.SubElement(
            svg,
            "text",
            {
                "x": str(_MARGIN_L + 8),
                "y": str(_MARGIN_T + 16),
                "font-size": "12",
                **text_base,
            },
        )
        t.text = note

    text = ET.tostring(svg, encoding="unicode")
    text = '<?xml version="1.0" encoding="UTF-8"?>\n' + text + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
