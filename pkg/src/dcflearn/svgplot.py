"""Minimal SVG line charts (fixed 800x500 viewport, no plotting dependency)."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["write_line_chart"]

WIDTH, HEIGHT = 800, 500
MARGIN = {"left": 70, "right": 20, "top": 40, "bottom": 50}
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _transform(values: np.ndarray, log: bool) -> np.ndarray:
    if log:
        return np.log10(np.maximum(values, 1e-300))
    return values


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0**e for e in range(math.floor(lo), math.ceil(hi) + 1)]
    if hi == lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / 4 or 1))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step) + 1)]


def write_line_chart(
    path,
    series: list[tuple[str, np.ndarray, np.ndarray]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    loglog: bool = False,
) -> None:
    """Write labelled (xs, ys) polylines as a standalone SVG file."""
    if not series:
        raise ValueError("need at least one series")
    xs_all = np.concatenate([_transform(np.asarray(xs, float), loglog) for _, xs, _ in series])
    ys_all = np.concatenate([_transform(np.asarray(ys, float), loglog) for _, _, ys in series])
    x_lo, x_hi = float(xs_all.min()), float(xs_all.max())
    y_lo, y_hi = float(ys_all.min()), float(ys_all.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x: float) -> float:
        return MARGIN["left"] + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN["top"] + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="16">{title}</text>',
    ]
    axis = (
        f'<line x1="{MARGIN["left"]}" y1="{MARGIN["top"] + plot_h}" '
        f'x2="{MARGIN["left"] + plot_w}" y2="{MARGIN["top"] + plot_h}" stroke="black"/>'
        f'<line x1="{MARGIN["left"]}" y1="{MARGIN["top"]}" '
        f'x2="{MARGIN["left"]}" y2="{MARGIN["top"] + plot_h}" stroke="black"/>'
    )
    parts.append(axis)
    for tick in _ticks(x_lo, x_hi, loglog):
        tx = math.log10(tick) if loglog else tick
        if not (x_lo - 1e-12 <= tx <= x_hi + 1e-12):
            continue
        label = f"{tick:g}"
        parts.append(
            f'<line x1="{px(tx):.1f}" y1="{MARGIN["top"] + plot_h}" x2="{px(tx):.1f}" '
            f'y2="{MARGIN["top"] + plot_h + 5}" stroke="black"/>'
            f'<text x="{px(tx):.1f}" y="{MARGIN["top"] + plot_h + 18}" text-anchor="middle">{label}</text>'
        )
    for tick in _ticks(y_lo, y_hi, loglog):
        ty = math.log10(tick) if loglog else tick
        if not (y_lo - 1e-12 <= ty <= y_hi + 1e-12):
            continue
        label = f"{tick:g}"
        parts.append(
            f'<line x1="{MARGIN["left"] - 5}" y1="{py(ty):.1f}" x2="{MARGIN["left"]}" '
            f'y2="{py(ty):.1f}" stroke="black"/>'
            f'<text x="{MARGIN["left"] - 8}" y="{py(ty) + 4:.1f}" text-anchor="end">{label}</text>'
        )
    parts.append(
        f'<text x="{MARGIN["left"] + plot_w / 2}" y="{HEIGHT - 10}" text-anchor="middle">{xlabel}</text>'
        f'<text x="18" y="{MARGIN["top"] + plot_h / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {MARGIN["top"] + plot_h / 2})">{ylabel}</text>'
    )
    for idx, (label, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        tx = _transform(np.asarray(xs, float), loglog)
        ty = _transform(np.asarray(ys, float), loglog)
        points = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(tx, ty))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        ly = MARGIN["top"] + 14 + 16 * idx
        lx = MARGIN["left"] + plot_w - 150
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
            f'<text x="{lx + 30}" y="{ly}">{label}</text>'
        )
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
