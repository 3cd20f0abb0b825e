"""
Minimal SVG charts for run artifacts: spider charts of final profiles,
metric curves of a trajectory and Nash-gap overlays across a sweep.
"""
import html
import math
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from app.services.solver import Trajectory

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
FONT = 'font-family="Arial, sans-serif"'
LOG_FLOOR = 1e-12

METRIC_PANELS: Tuple[Tuple[str, str, bool], ...] = (
    ("nash_gap", "Nash gap", True),
    ("violation", "Constraint violation", True),
    ("lambda_sum", "Sum of multipliers", False),
)

Series = Tuple[Sequence[float], Sequence[float]]


def _color(k: int) -> str:
    return PALETTE[k % len(PALETTE)]


def _open(width: int, height: int) -> List[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]


def _text(x: float, y: float, label: str, size: int = 12, anchor: str = "middle", extra: str = "") -> str:
    return (f'<text x="{x:.2f}" y="{y:.2f}" {FONT} font-size="{size}" '
            f'text-anchor="{anchor}"{extra}>{html.escape(str(label))}</text>')


def _tick_label(value: float, log_y: bool) -> str:
    if log_y:
        return f"1e{int(round(value))}"
    return f"{value:.3g}"


def _transform(ys: np.ndarray, log_y: bool) -> np.ndarray:
    if log_y:
        return np.log10(np.maximum(ys, LOG_FLOOR))
    return ys


def _panel(series: Mapping[str, Series], x0: float, y0: float, width: float, height: float,
           title: str, x_label: str, log_y: bool, legend: bool) -> List[str]:
    pad_left, pad_right, pad_top, pad_bottom = 70, 20 + (140 if legend else 0), 30, 40
    plot_w, plot_h = width - pad_left - pad_right, height - pad_top - pad_bottom
    left, top = x0 + pad_left, y0 + pad_top

    cleaned = []
    for name, (xs, ys) in series.items():
        xs, ys = np.asarray(xs, dtype=float), _transform(np.asarray(ys, dtype=float), log_y)
        keep = np.isfinite(xs) & np.isfinite(ys)
        cleaned.append((name, xs[keep], ys[keep]))
    all_x = np.concatenate([xs for _, xs, _ in cleaned]) if cleaned else np.zeros(0)
    all_y = np.concatenate([ys for _, _, ys in cleaned]) if cleaned else np.zeros(0)
    x_lo, x_hi = (float(all_x.min()), float(all_x.max())) if all_x.size else (0.0, 1.0)
    y_lo, y_hi = (float(all_y.min()), float(all_y.max())) if all_y.size else (0.0, 1.0)
    if log_y:
        y_lo, y_hi = math.floor(y_lo), math.ceil(y_hi)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    def sx(v: float) -> float:
        return left + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return top + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h

    out = [_text(x0 + width / 2, y0 + 18, title, size=14, extra=' font-weight="bold"')]
    out.append(f'<rect x="{left:.2f}" y="{top:.2f}" width="{plot_w:.2f}" height="{plot_h:.2f}" '
               f'fill="none" stroke="#444" stroke-width="1"/>')
    for k in range(5):
        v = y_lo + (y_hi - y_lo) * k / 4
        out.append(f'<line x1="{left:.2f}" y1="{sy(v):.2f}" x2="{left + plot_w:.2f}" y2="{sy(v):.2f}" '
                   f'stroke="#eee" stroke-width="1"/>')
        out.append(_text(left - 6, sy(v) + 4, _tick_label(v, log_y), size=10, anchor="end"))
        u = x_lo + (x_hi - x_lo) * k / 4
        out.append(_text(sx(u), top + plot_h + 15, f"{u:.4g}", size=10))
    out.append(_text(left + plot_w / 2, top + plot_h + 32, x_label, size=11))

    for k, (name, xs, ys) in enumerate(cleaned):
        if not xs.size:
            continue
        points = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))
        out.append(f'<polyline points="{points}" fill="none" stroke="{_color(k)}" stroke-width="1.5"/>')
        if legend:
            ly = top + 14 * k + 6
            out.append(f'<line x1="{left + plot_w + 10:.2f}" y1="{ly:.2f}" x2="{left + plot_w + 28:.2f}" '
                       f'y2="{ly:.2f}" stroke="{_color(k)}" stroke-width="2"/>')
            out.append(_text(left + plot_w + 32, ly + 4, name, size=10, anchor="start"))
    return out


def line_chart(series: Mapping[str, Series], title: str, x_label: str = "t", log_y: bool = False,
               width: int = 720, height: int = 360) -> str:
    out = _open(width, height)
    out += _panel(series, 0, 0, width, height, title, x_label, log_y, legend=len(series) > 1)
    out.append("</svg>")
    return "\n".join(out)


def metric_chart(trajectory: Trajectory, width: int = 720, panel_height: int = 260) -> str:
    """Stacked panels of the Nash gap, violation and multiplier sum against t."""
    t = trajectory.column("t")
    out = _open(width, panel_height * len(METRIC_PANELS))
    for k, (column, title, log_y) in enumerate(METRIC_PANELS):
        title = f"{title} (log10)" if log_y else title
        out += _panel({column: (t, trajectory.column(column))}, 0, k * panel_height, width, panel_height,
                      title, "t", log_y, legend=False)
    out.append("</svg>")
    return "\n".join(out)


def gap_overlay(curves: Mapping[str, Series], title: str = "Nash gap across configurations") -> str:
    return line_chart(curves, f"{title} (log10)", log_y=True, width=900, height=480)


def spider_chart(strategies: Sequence[np.ndarray], axes: Sequence[str], title: str = "Final mixed strategies",
                 player_names: Optional[Sequence[str]] = None, size: int = 480) -> str:
    """One axis per action, one polygon per player; radius is the action's probability."""
    n_axes = len(axes)
    names = list(player_names) if player_names is not None else [f"Player {i + 1}" for i in range(len(strategies))]
    legend_w = 130
    cx, cy, radius = size / 2, size / 2 + 10, size / 2 - 60

    def point(k: int, r: float) -> Tuple[float, float]:
        angle = -math.pi / 2 + 2 * math.pi * k / n_axes
        return cx + r * radius * math.cos(angle), cy + r * radius * math.sin(angle)

    out = _open(size + legend_w, size + 20)
    out.append(_text(cx, 22, title, size=14, extra=' font-weight="bold"'))
    for level in (0.25, 0.5, 0.75, 1.0):
        ring = " ".join("{:.2f},{:.2f}".format(*point(k, level)) for k in range(n_axes))
        out.append(f'<polygon points="{ring}" fill="none" stroke="#ddd" stroke-width="1"/>')
    for k, label in enumerate(axes):
        x, y = point(k, 1.0)
        out.append(f'<line x1="{cx:.2f}" y1="{cy:.2f}" x2="{x:.2f}" y2="{y:.2f}" stroke="#bbb" stroke-width="1"/>')
        lx, ly = point(k, 1.12)
        out.append(_text(lx, ly + 4, label, size=12))
    for i, (s, name) in enumerate(zip(strategies, names)):
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        shape = " ".join("{:.2f},{:.2f}".format(*point(k, float(s[k]))) for k in range(n_axes))
        out.append(f'<polygon points="{shape}" fill="{_color(i)}" fill-opacity="0.15" '
                   f'stroke="{_color(i)}" stroke-width="2"/>')
        ly = 50 + 16 * i
        out.append(f'<rect x="{size + 10}" y="{ly - 9}" width="12" height="12" fill="{_color(i)}"/>')
        out.append(_text(size + 28, ly + 1, name, size=11, anchor="start"))
    out.append("</svg>")
    return "\n".join(out)


def write_svg(path: Union[str, Path], svg: str) -> Path:
    path = Path(path)
    path.write_text(svg + "\n", encoding="utf8")
    return path
