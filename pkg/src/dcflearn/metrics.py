"""One-pass evaluation metrics: CLE, DP, OP, AUC.

Definitions (thresholds configurable per flag):

* CLE: Euclidean distance between box centres, per frame, in pixels.
* DP: fraction of frames with CLE within 20 px (inclusive by default).
* OP: fraction of frames with IoU exceeding 0.5 (strict by default).
* AUC: mean success rate over the IoU threshold grid 0:0.05:1 (21 values).

Boxes are ``(x, y, w, h)`` rows with 1-indexed top-left corners; centres use
``x + (w - 1) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "EvalReport",
    "load_boxes",
    "save_boxes",
    "box_centers",
    "center_errors",
    "overlaps",
    "precision_curve",
    "success_curve",
    "evaluate",
    "IOU_THRESHOLDS",
    "CLE_THRESHOLDS",
]

IOU_THRESHOLDS = np.round(np.arange(0.0, 1.0001, 0.05), 10)
CLE_THRESHOLDS = np.arange(0.0, 51.0, 1.0)


def load_boxes(path) -> np.ndarray:
    """Read one ``x,y,w,h`` row per line (comma, tab or space separated)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.replace(",", " ").replace("\t", " ").split()
            if len(parts) != 4:
                raise ValueError(f"malformed box line {line!r} in {path}")
            rows.append([float(p) for p in parts])
    if not rows:
        raise ValueError(f"no boxes in {path}")
    return np.array(rows)


def save_boxes(path, boxes: np.ndarray) -> None:
    with open(path, "w") as fh:
        for x, y, w, h in np.asarray(boxes):
            fh.write(f"{x:.2f},{y:.2f},{w:.2f},{h:.2f}\n")


def box_centers(boxes: np.ndarray) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64)
    return boxes[:, :2] + (boxes[:, 2:] - 1.0) / 2.0


def center_errors(result: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-frame CLE between paired box lists."""
    result, truth = _paired(result, truth)
    return np.linalg.norm(box_centers(result) - box_centers(truth), axis=1)


def overlaps(result: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-frame intersection-over-union between paired box lists."""
    a, b = _paired(result, truth)
    ix = np.minimum(a[:, 0] + a[:, 2], b[:, 0] + b[:, 2]) - np.maximum(a[:, 0], b[:, 0])
    iy = np.minimum(a[:, 1] + a[:, 3], b[:, 1] + b[:, 3]) - np.maximum(a[:, 1], b[:, 1])
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    union = a[:, 2] * a[:, 3] + b[:, 2] * b[:, 3] - inter
    return inter / union


def _paired(result, truth) -> tuple[np.ndarray, np.ndarray]:
    result = np.asarray(result, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if result.shape != truth.shape or result.ndim != 2 or result.shape[1] != 4:
        raise ValueError(
            f"box lists must be equal-length (F, 4) arrays, got {result.shape} and {truth.shape}"
        )
    return result, truth


def precision_curve(
    cle: np.ndarray, thresholds: np.ndarray = CLE_THRESHOLDS, inclusive: bool = True
) -> np.ndarray:
    """Fraction of frames with CLE within each threshold."""
    cle = np.asarray(cle)
    if inclusive:
        return np.array([np.mean(cle <= t) for t in thresholds])
    return np.array([np.mean(cle < t) for t in thresholds])


def success_curve(
    iou: np.ndarray, thresholds: np.ndarray = IOU_THRESHOLDS, strict: bool = True
) -> np.ndarray:
    """Fraction of frames with overlap exceeding each threshold."""
    iou = np.asarray(iou)
    if strict:
        return np.array([np.mean(iou > t) for t in thresholds])
    return np.array([np.mean(iou >= t) for t in thresholds])


@dataclass
class EvalReport:
    """Per-sequence and mean tracking metrics."""

    sequences: dict[str, dict] = field(default_factory=dict)
    mean_cle: float = 0.0
    dp: float = 0.0
    op: float = 0.0
    auc: float = 0.0
    fps: float | None = None
    dp_threshold: float = 20.0
    op_threshold: float = 0.5
    precision: np.ndarray | None = None
    success: np.ndarray | None = None

    def to_json_dict(self) -> dict:
        return {
            "sequences": self.sequences,
            "mean_cle": self.mean_cle,
            "dp": self.dp,
            "op": self.op,
            "auc": self.auc,
            "fps": self.fps,
            "dp_threshold": self.dp_threshold,
            "op_threshold": self.op_threshold,
        }


def evaluate(
    results: list[np.ndarray],
    truths: list[np.ndarray],
    names: list[str] | None = None,
    dp_threshold: float = 20.0,
    op_threshold: float = 0.5,
    dp_inclusive: bool = True,
    op_strict: bool = True,
    fps: float | None = None,
) -> EvalReport:
    """Score paired result/ground-truth box lists.

    Mean metrics average per-sequence values; curves pool all frames.
    """
    if len(results) != len(truths) or not results:
        raise ValueError("need equally many non-empty result and ground-truth lists")
    if names is None:
        names = [f"seq{i:02d}" for i in range(len(results))]
    report = EvalReport(dp_threshold=dp_threshold, op_threshold=op_threshold, fps=fps)
    all_cle, all_iou = [], []
    for name, res, gt in zip(names, results, truths):
        cle = center_errors(res, gt)
        iou = overlaps(res, gt)
        all_cle.append(cle)
        all_iou.append(iou)
        dp = float(np.mean(cle <= dp_threshold) if dp_inclusive else np.mean(cle < dp_threshold))
        op = float(np.mean(iou > op_threshold) if op_strict else np.mean(iou >= op_threshold))
        auc = float(np.mean(success_curve(iou, strict=op_strict)))
        report.sequences[name] = {
            "frames": int(len(cle)),
            "mean_cle": float(cle.mean()),
            "dp": dp,
            "op": op,
            "auc": auc,
        }
    seqs = report.sequences.values()
    report.mean_cle = float(np.mean([s["mean_cle"] for s in seqs]))
    report.dp = float(np.mean([s["dp"] for s in seqs]))
    report.op = float(np.mean([s["op"] for s in seqs]))
    report.auc = float(np.mean([s["auc"] for s in seqs]))
    pooled_cle = np.concatenate(all_cle)
    pooled_iou = np.concatenate(all_iou)
    report.precision = precision_curve(pooled_cle, inclusive=dp_inclusive)
    report.success = success_curve(pooled_iou, strict=op_strict)
    return report
