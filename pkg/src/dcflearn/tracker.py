"""Frame-by-frame tracking loop on grayscale image sequences.

Per frame: crop a square search window around the previous position, extract
hand-crafted features on a fixed cell grid, locate the target by the
frequency-domain filter response, then re-learn the filter on an updated
feature model, warm-starting the optimizer from the previous frame's state.

Geometry: image pixels are addressed 0-indexed as (x right, y down) with
float centres; bounding boxes use the 1-indexed ``x,y,w,h`` convention of
ground-truth files.  The search window side is
``round(sqrt(area_ratio * w * h))`` pixels, resampled to a fixed model
resolution of ``model_cells * cell_size`` pixels so the feature grid is a
constant ``model_cells`` regardless of target size.  Box size is constant
after initialization (no scale estimation).
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field

import cv2
import numpy as np

from .objective import (
    LabelMap,
    MaskPair,
    ProblemInstance,
    build_mask,
    cosine_window,
    default_label_sigma,
    gaussian_label,
)
from .solvers import SolverConfig, SolverState, run_solver_full
from .spectral import FeatureTensor, _fft2, _ifft2_real

__all__ = [
    "FeatureSet",
    "TrackerConfig",
    "BoundingBox",
    "TrackState",
    "crop_window",
    "extract_features",
    "detect",
    "response_peak",
    "init_state",
    "step",
    "load_frame",
    "list_frames",
    "track_sequence",
]

GRAY_WEIGHTS = (0.299, 0.587, 0.114)  # RGB order


class FeatureSet(str, enum.Enum):
    GRAY = "gray"
    GRAY_GRAD9 = "gray+grad9"


@dataclass(frozen=True)
class TrackerConfig:
    """Tracking settings; defaults follow the reference configuration."""

    area_ratio: float = 16.0
    feature_set: FeatureSet = FeatureSet.GRAY_GRAD9
    cell_size: int = 4
    label_sigma_factor: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)
    model_lr: float = 0.0125
    model_cells: int = 48
    lambda1: float = 10.0
    lambda2: float = 100.0
    warm_start: bool = True

    def __post_init__(self):
        if self.area_ratio < 1.0:
            raise ValueError(f"area_ratio must be >= 1, got {self.area_ratio}")
        if self.cell_size < 1:
            raise ValueError(f"cell_size must be >= 1, got {self.cell_size}")
        if not (0.0 <= self.model_lr <= 1.0):
            raise ValueError(f"model_lr must lie in [0, 1], got {self.model_lr}")
        if self.model_cells < 2:
            raise ValueError(f"model_cells must be >= 2, got {self.model_cells}")
        object.__setattr__(self, "feature_set", FeatureSet(self.feature_set))

    @property
    def model_pixels(self) -> int:
        return self.model_cells * self.cell_size

    def to_dict(self) -> dict:
        return {
            "area_ratio": self.area_ratio,
            "feature_set": self.feature_set.value,
            "cell_size": self.cell_size,
            "label_sigma_factor": self.label_sigma_factor,
            "solver": self.solver.to_dict(),
            "model_lr": self.model_lr,
            "model_cells": self.model_cells,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "warm_start": self.warm_start,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrackerConfig":
        d = dict(d)
        if "solver" in d:
            d["solver"] = SolverConfig.from_dict(d["solver"])
        if "feature_set" in d:
            d["feature_set"] = FeatureSet(d["feature_set"])
        return cls(**d)


@dataclass(frozen=True)
class BoundingBox:
    """1-indexed ``x,y,w,h`` box matching ground-truth file conventions."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box size must be positive, got {self.w}x{self.h}")

    @property
    def center(self) -> tuple[float, float]:
        """0-indexed pixel centre (cx, cy)."""
        return (self.x - 1.0) + (self.w - 1.0) / 2.0, (self.y - 1.0) + (self.h - 1.0) / 2.0

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(x=cx - (w - 1.0) / 2.0 + 1.0, y=cy - (h - 1.0) / 2.0 + 1.0, w=w, h=h)

    def as_line(self) -> str:
        return f"{self.x:.2f},{self.y:.2f},{self.w:.2f},{self.h:.2f}"


@dataclass
class TrackState:
    """Per-sequence tracking state (single owner, one per sequence)."""

    center: tuple[float, float]
    target_size: tuple[float, float]
    filter: np.ndarray
    model_hat: np.ndarray
    warm: SolverState | None
    window_px: int
    mask: MaskPair
    label: LabelMap
    response_bias: tuple[float, float] = (0.0, 0.0)
    solver_iterations_total: int = 0


def crop_window(
    frame: np.ndarray,
    center: tuple[float, float],
    target_size: tuple[float, float],
    area_ratio: float,
    out_size: int | None = None,
) -> tuple[np.ndarray, int]:
    """Square patch of side ``round(sqrt(area_ratio * w * h))`` around ``center``.

    Out-of-frame pixels replicate the nearest edge pixel.  When ``out_size``
    is given the patch is bilinearly resampled to that side.  Returns the
    patch and the window side in frame pixels.
    """
    if frame.size == 0:
        raise ValueError("empty frame")
    w, h = target_size
    if w <= 0 or h <= 0:
        raise ValueError(f"degenerate target size {target_size}")
    side = int(round(math.sqrt(area_ratio * w * h)))
    side = max(side, 2)
    cx, cy = center
    x0 = int(round(cx)) - side // 2
    y0 = int(round(cy)) - side // 2
    xs = np.clip(np.arange(x0, x0 + side), 0, frame.shape[1] - 1)
    ys = np.clip(np.arange(y0, y0 + side), 0, frame.shape[0] - 1)
    patch = frame[np.ix_(ys, xs)]
    if out_size is not None and out_size != side:
        patch = cv2.resize(patch, (out_size, out_size), interpolation=cv2.INTER_LINEAR)
    return np.ascontiguousarray(patch, dtype=np.float64), side


def _cell_reduce(img: np.ndarray, cell: int) -> np.ndarray:
    n = img.shape[0] // cell
    return img.reshape(n, cell, n, cell).mean(axis=(1, 3))


def _grad9(patch: np.ndarray, cell: int) -> np.ndarray:
    """9 unsigned orientation channels, cell-summed and L2-normalized per cell.

    Per-pixel gradient magnitude votes into the two nearest orientation bins
    (bin centres at k*pi/9, linear interpolation); zero-magnitude pixels
    contribute nothing.
    """
    gy, gx = np.gradient(patch)
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    pos = theta / (np.pi / 9.0)
    lo = np.floor(pos).astype(int) % 9
    frac = pos - np.floor(pos)
    bins = np.arange(9)
    votes = (bins == lo[:, :, None]) * (mag * (1.0 - frac))[:, :, None]
    votes += (bins == ((lo + 1) % 9)[:, :, None]) * (mag * frac)[:, :, None]
    n = patch.shape[0] // cell
    cells = votes.reshape(n, cell, n, cell, 9).sum(axis=(1, 3))
    norms = np.linalg.norm(cells, axis=2, keepdims=True)
    return cells / (norms + 1e-6)


def extract_features(patch: np.ndarray, cfg: TrackerConfig) -> FeatureTensor:
    """Feature grid for a square patch whose side divides by ``cell_size``.

    One grayscale cell-mean channel, plus 9 orientation channels for the
    ``gray+grad9`` set.  The cosine window multiplies every assembled channel
    (windowing raw pixels before the gradient pass is a valid alternative,
    not used here).
    """
    npx = patch.shape[0]
    if patch.ndim != 2 or patch.shape[1] != npx:
        raise ValueError(f"expected square grayscale patch, got {patch.shape}")
    if npx % cfg.cell_size != 0:
        raise ValueError(f"patch side {npx} not divisible by cell size {cfg.cell_size}")
    channels = [_cell_reduce(patch, cfg.cell_size)]
    if cfg.feature_set is FeatureSet.GRAY_GRAD9:
        grad = _grad9(patch, cfg.cell_size)
        feat = np.concatenate([channels[0][:, :, None], grad], axis=2)
    else:
        feat = channels[0][:, :, None]
    window = cosine_window(feat.shape[0])
    return FeatureTensor(feat * window[:, :, None])


def _signed_offset(idx: int, n: int) -> float:
    return float(idx - n) if idx > n // 2 else float(idx)


def _parabolic(rm: float, r0: float, rp: float) -> float:
    denom = 2.0 * r0 - rm - rp
    if denom <= 1e-12 * max(1.0, abs(r0)):
        return 0.0
    return float(np.clip(0.5 * (rp - rm) / denom, -0.5, 0.5))


def _refined_peak(response: np.ndarray) -> tuple[float, float]:
    """Sub-cell peak location as signed offsets in ``(-N/2, N/2]``.

    Argmax refined by a per-axis parabolic fit over the 3x3 neighbourhood,
    at most half a cell per axis.
    """
    n = response.shape[0]
    i, j = np.unravel_index(int(np.argmax(response)), response.shape)
    di = _signed_offset(i, n) + _parabolic(
        response[(i - 1) % n, j], response[i, j], response[(i + 1) % n, j]
    )
    dj = _signed_offset(j, n) + _parabolic(
        response[i, (j - 1) % n], response[i, j], response[i, (j + 1) % n]
    )
    return di, dj


def response_peak(
    filter_w: np.ndarray, features: FeatureTensor
) -> tuple[np.ndarray, tuple[float, float]]:
    """Raw filter response and its peak location in cells.

    The response is the inverse transform of the per-bin product of the raw
    feature spectrum with the conjugated filter spectrum (the adjoint of the
    training-time correlation product), so an input whose content is
    circularly shifted by ``(+dy, +dx)`` cells peaks ``(+dy, +dx)`` away
    from the training response's peak.
    """
    if filter_w.shape != features.data.shape:
        raise ValueError(f"filter shape {filter_w.shape} != features {features.data.shape}")
    zhat = _fft2(features.data)
    what = _fft2(filter_w)
    response = _ifft2_real(np.sum(zhat * np.conj(what), axis=2)[:, :, None])[:, :, 0]
    return response, _refined_peak(response)


def _model_response_bias(filter_w: np.ndarray, model_hat: np.ndarray) -> tuple[float, float]:
    """Peak offset of the filter's response to its own training features.

    A finite regression fit leaves the training response slightly
    asymmetric, so its refined peak sits a fraction of a cell off the
    zero-shift bin; detection subtracts this systematic part, which would
    otherwise accumulate into position drift frame over frame.
    """
    what = _fft2(filter_w)
    resp_hat = np.conj(np.sum(model_hat * what, axis=2))
    response = _ifft2_real(resp_hat[:, :, None])[:, :, 0]
    return _refined_peak(response)


def detect(state: "TrackState", features: FeatureTensor) -> tuple[np.ndarray, tuple[float, float]]:
    """Response map and displacement in cells, relative to the trained view.

    Displacement is the refined response peak minus the stored peak offset
    of the training response, so features identical to the model give
    exactly (0, 0) and circularly shifted content gives the shift.
    """
    response, (di, dj) = response_peak(state.filter, features)
    bi, bj = state.response_bias
    return response, (di - bi, dj - bj)


def _stored_spectrum(features: FeatureTensor) -> np.ndarray:
    """Correlation-convention spectrum stored for model/problem building."""
    return np.conj(_fft2(features.data))


def _target_cells(cfg: TrackerConfig, target_size: tuple[float, float], window_px: int) -> tuple[int, int]:
    w, h = target_size
    scale = cfg.model_cells / window_px
    th = int(np.clip(round(h * scale), 1, cfg.model_cells))
    tw = int(np.clip(round(w * scale), 1, cfg.model_cells))
    return th, tw


def _learn(
    prob: ProblemInstance, cfg: TrackerConfig, warm: SolverState | None
) -> tuple[SolverState, int]:
    init = warm if cfg.warm_start else None
    state, trace = run_solver_full(prob, cfg.solver, init=init)
    return state, len(trace)


def init_state(frame: np.ndarray, box: BoundingBox, cfg: TrackerConfig) -> TrackState:
    """Train the first-frame filter and assemble the tracking state."""
    cx, cy = box.center
    patch, window_px = crop_window(
        frame, (cx, cy), (box.w, box.h), cfg.area_ratio, out_size=cfg.model_pixels
    )
    features = extract_features(patch, cfg)
    model_hat = _stored_spectrum(features)
    tc = _target_cells(cfg, (box.w, box.h), window_px)
    mask = build_mask(cfg.model_cells, tc, cfg.lambda1, cfg.lambda2)
    label = gaussian_label(cfg.model_cells, default_label_sigma(tc, cfg.label_sigma_factor))
    prob = ProblemInstance(xhat=model_hat, yhat=label.yhat, mask=mask, rho=cfg.solver.rho)
    solved, iters = _learn(prob, cfg, warm=None)
    return TrackState(
        center=(cx, cy),
        target_size=(box.w, box.h),
        filter=solved.w,
        model_hat=model_hat,
        warm=solved,
        window_px=window_px,
        mask=mask,
        label=label,
        response_bias=_model_response_bias(solved.w, model_hat),
        solver_iterations_total=iters,
    )


def step(state: TrackState, frame: np.ndarray, cfg: TrackerConfig) -> tuple[TrackState, BoundingBox]:
    """Track one frame: detect, move, update the model, re-learn the filter."""
    px_per_cell = state.window_px / cfg.model_cells
    patch, _ = crop_window(
        frame, state.center, state.target_size, cfg.area_ratio, out_size=cfg.model_pixels
    )
    _, (di, dj) = detect(state, extract_features(patch, cfg))
    cx = float(np.clip(state.center[0] + dj * px_per_cell, 0.0, frame.shape[1] - 1.0))
    cy = float(np.clip(state.center[1] + di * px_per_cell, 0.0, frame.shape[0] - 1.0))

    patch, _ = crop_window(
        frame, (cx, cy), state.target_size, cfg.area_ratio, out_size=cfg.model_pixels
    )
    fresh = _stored_spectrum(extract_features(patch, cfg))
    model_hat = (1.0 - cfg.model_lr) * state.model_hat + cfg.model_lr * fresh

    prob = ProblemInstance(
        xhat=model_hat, yhat=state.label.yhat, mask=state.mask, rho=cfg.solver.rho
    )
    solved, iters = _learn(prob, cfg, warm=state.warm)
    new_state = TrackState(
        center=(cx, cy),
        target_size=state.target_size,
        filter=solved.w,
        model_hat=model_hat,
        warm=solved,
        window_px=state.window_px,
        mask=state.mask,
        label=state.label,
        response_bias=_model_response_bias(solved.w, model_hat),
        solver_iterations_total=state.solver_iterations_total + iters,
    )
    w, h = state.target_size
    return new_state, BoundingBox.from_center(cx, cy, w, h)


def load_frame(path: str) -> np.ndarray:
    """8-bit image as grayscale float in [0, 1] (0.299/0.587/0.114 weights)."""
    img = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FileNotFoundError(f"cannot read image {path!r}")
    if img.ndim == 3:
        img = cv2.cvtColor(img, cv2.COLOR_BGR2GRAY)
    return img.astype(np.float64) / 255.0


def list_frames(sequence_dir: str) -> list[str]:
    """Sorted frame paths under ``<dir>/img`` (jpg/png)."""
    img_dir = os.path.join(sequence_dir, "img")
    if not os.path.isdir(img_dir):
        raise FileNotFoundError(f"no img/ directory under {sequence_dir!r}")
    names = sorted(
        f for f in os.listdir(img_dir) if f.lower().endswith((".jpg", ".jpeg", ".png"))
    )
    if not names:
        raise FileNotFoundError(f"no frames in {img_dir!r}")
    return [os.path.join(img_dir, f) for f in names]


def track_sequence(
    frame_paths: list[str], init_box: BoundingBox, cfg: TrackerConfig
) -> tuple[list[BoundingBox], float, TrackState]:
    """One-pass tracking: initialize on frame 1, never reset.

    Returns per-frame boxes (the first is the init box), frames per second
    over the tracking computation (image decoding excluded), and the final
    state.
    """
    import time

    frames = [load_frame(p) for p in frame_paths]
    t0 = time.perf_counter()
    state = init_state(frames[0], init_box, cfg)
    boxes = [init_box]
    for frame in frames[1:]:
        state, box = step(state, frame, cfg)
        boxes.append(box)
    elapsed = time.perf_counter() - t0
    fps = len(frames) / elapsed if elapsed > 0 else float("inf")
    return boxes, fps, state
