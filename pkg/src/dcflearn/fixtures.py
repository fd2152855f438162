"""Deterministic synthetic sequences for desk-scale tracking runs."""

from __future__ import annotations

import os

import cv2
import numpy as np

from .tracker import BoundingBox

__all__ = ["make_moving_square"]


def make_moving_square(
    out_dir: str,
    frames: int = 100,
    frame_size: tuple[int, int] = (160, 120),
    square: int = 24,
    velocity: tuple[float, float] = (1.7, 1.1),
    start: tuple[float, float] | None = None,
) -> list[BoundingBox]:
    """Write a moving-square sequence in the standard layout.

    A textured bright square drifts over a shaded background, bouncing off
    the frame borders.  Frames go to ``<out_dir>/img/%04d.png`` and the
    boxes to ``<out_dir>/groundtruth_rect.txt`` (1-indexed ``x,y,w,h``).
    Fully deterministic: no noise, integer target positions.
    """
    width, height = frame_size
    if square >= min(width, height) // 2:
        raise ValueError(f"square {square} too large for frame {frame_size}")
    img_dir = os.path.join(out_dir, "img")
    os.makedirs(img_dir, exist_ok=True)

    # Background: gentle diagonal shading; square: bright with a darker core.
    yy, xx = np.mgrid[0:height, 0:width]
    background = 0.20 + 0.10 * (xx + yy) / (width + height)
    tile = np.full((square, square), 0.90)
    core = square // 3
    c0 = (square - core) // 2
    tile[c0 : c0 + core, c0 : c0 + core] = 0.55

    if start is None:
        start = (width * 0.3, height * 0.4)
    cx, cy = start
    vx, vy = velocity
    half = (square - 1) / 2.0
    boxes: list[BoundingBox] = []
    lines = []
    for k in range(frames):
        x0 = int(round(cx - half))
        y0 = int(round(cy - half))
        x0 = int(np.clip(x0, 0, width - square))
        y0 = int(np.clip(y0, 0, height - square))
        frame = background.copy()
        frame[y0 : y0 + square, x0 : x0 + square] = tile
        img = np.clip(frame * 255.0, 0, 255).astype(np.uint8)
        cv2.imwrite(os.path.join(img_dir, f"{k + 1:04d}.png"), img)
        box = BoundingBox(x=x0 + 1, y=y0 + 1, w=square, h=square)
        boxes.append(box)
        lines.append(f"{x0 + 1},{y0 + 1},{square},{square}")
        cx += vx
        cy += vy
        if cx - half < 2 or cx + half > width - 3:
            vx = -vx
            cx += 2 * vx
        if cy - half < 2 or cy + half > height - 3:
            vy = -vy
            cy += 2 * vy
    with open(os.path.join(out_dir, "groundtruth_rect.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return boxes
