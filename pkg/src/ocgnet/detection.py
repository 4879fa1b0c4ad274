"""Anchor-based detection head, box coding, and the training loss.

Each stride-32 reference cell carries 9 anchors with 4 box offsets and
an objectness logit (45 channels).  Box coding follows the sigmoid
center / exponential size convention; the single box with the highest
objectness score is the prediction.  The loss is mean squared error on
the positive anchor's offsets plus binary cross entropy over all
objectness logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ocgnet.encoders import CBR
from ocgnet.errors import AnnotationError, InvalidInputError, ShapeError
from ocgnet.metrics import Box

STRIDE = 32
VALUES_PER_ANCHOR = 5  # tx, ty, tw, th, objectness


@dataclass(frozen=True)
class AnchorTable:
    """Exactly 9 (width, height) priors in reference-image pixels."""

    sizes: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.sizes) != 9:
            raise InvalidInputError(f"expected 9 anchors, got {len(self.sizes)}")
        if any(w <= 0 or h <= 0 for w, h in self.sizes):
            raise InvalidInputError("anchor dims must be positive")

    @staticmethod
    def default() -> "AnchorTable":
        # 3 scales x 3 aspect ratios
        sizes = []
        for scale in (32.0, 64.0, 128.0):
            for ratio in (0.5, 1.0, 2.0):
                sizes.append((scale * math.sqrt(ratio), scale / math.sqrt(ratio)))
        return AnchorTable(tuple(sizes))

    def to_list(self) -> list[list[float]]:
        return [[w, h] for w, h in self.sizes]

    @staticmethod
    def from_list(rows) -> "AnchorTable":
        return AnchorTable(tuple((float(w), float(h)) for w, h in rows))


@dataclass(frozen=True)
class PredictedBox:
    box: Box
    score: float
    grid_cell: tuple[int, int]  # (row, col)
    anchor_index: int
    class_label: str | None = None

    def to_dict(self, sample_id: str | None = None) -> dict:
        rec = {
            "bbox": [self.box.cx, self.box.cy, self.box.w, self.box.h],
            "score": self.score,
            "grid_cell": list(self.grid_cell),
            "anchor_index": self.anchor_index,
        }
        if sample_id is not None:
            rec["sample_id"] = sample_id
        if self.class_label is not None:
            rec["class_label"] = self.class_label
        return rec


@dataclass
class LossBreakdown:
    """total = mse + bce; tensors stay attached to the graph."""

    total: torch.Tensor
    mse: torch.Tensor
    bce: torch.Tensor

    def item(self) -> tuple[float, float, float]:
        return self.total.item(), self.mse.item(), self.bce.item()


class DetectionHead(nn.Module):
    """Attention-weighted reference features -> per-cell anchor predictions."""

    def __init__(self, nc: int):
        super().__init__()
        self.fuse = CBR(nc, nc, kernel=3)
        self.predict = nn.Conv2d(nc, 9 * VALUES_PER_ANCHOR, 1)

    def forward(self, f_s_hat: torch.Tensor, a_s: torch.Tensor) -> torch.Tensor:
        if f_s_hat.shape[-2:] != a_s.shape[-2:]:
            raise ShapeError(
                f"feature grid {tuple(f_s_hat.shape[-2:])} vs "
                f"attention grid {tuple(a_s.shape[-2:])}"
            )
        return self.predict(self.fuse(f_s_hat * a_s))


def _grid_view(raw: torch.Tensor) -> torch.Tensor:
    """(45, H, W) -> (9, 5, H, W)."""
    if raw.dim() != 3 or raw.shape[0] != 9 * VALUES_PER_ANCHOR:
        raise ShapeError(f"expected (45, H, W) raw grid, got {tuple(raw.shape)}")
    return raw.view(9, VALUES_PER_ANCHOR, raw.shape[1], raw.shape[2])


def encode_box(
    gt: Box, anchors: AnchorTable, stride: int = STRIDE, eps: float = 1e-7
) -> tuple[tuple[int, int], int, np.ndarray]:
    """Ground truth -> (cell, positive anchor index, offset targets).

    The positive anchor is the one with max shape-IoU against the box at
    its center cell.
    """
    if gt.w <= 0 or gt.h <= 0:
        raise AnnotationError("ground-truth box has non-positive area")
    col = int(gt.cx // stride)
    row = int(gt.cy // stride)
    best, best_iou = 0, -1.0
    for i, (aw, ah) in enumerate(anchors.sizes):
        inter = min(gt.w, aw) * min(gt.h, ah)
        union = gt.w * gt.h + aw * ah - inter
        if inter / union > best_iou:
            best, best_iou = i, inter / union
    aw, ah = anchors.sizes[best]
    fx = np.clip(gt.cx / stride - col, eps, 1 - eps)
    fy = np.clip(gt.cy / stride - row, eps, 1 - eps)
    t = np.array(
        [
            math.log(fx / (1 - fx)),
            math.log(fy / (1 - fy)),
            math.log(gt.w / aw),
            math.log(gt.h / ah),
        ]
    )
    return (row, col), best, t


def decode_box(
    t: np.ndarray,
    cell: tuple[int, int],
    anchor: tuple[float, float],
    stride: int = STRIDE,
) -> Box:
    """Offsets at one anchor-cell -> box in reference pixels."""
    row, col = cell
    sx = 1.0 / (1.0 + np.exp(-t[0]))
    sy = 1.0 / (1.0 + np.exp(-t[1]))
    return Box(
        cx=float((sx + col) * stride),
        cy=float((sy + row) * stride),
        w=float(anchor[0] * np.exp(t[2])),
        h=float(anchor[1] * np.exp(t[3])),
    )


def decode_and_select(
    raw: torch.Tensor, anchors: AnchorTable, stride: int = STRIDE
) -> PredictedBox:
    """Pick the anchor-cell with the highest objectness and decode it.

    Ties break toward the lowest (row, col, anchor index).
    """
    grid = _grid_view(raw.detach().to(torch.float64))
    if grid.shape[-2] == 0 or grid.shape[-1] == 0:
        raise InvalidInputError("empty prediction grid")
    obj = grid[:, 4].permute(1, 2, 0).numpy()  # (H, W, 9): row-major argmax
    flat = int(np.argmax(obj))
    row, rem = divmod(flat, obj.shape[1] * 9)
    col, a = divmod(rem, 9)
    t = grid[a, :4, row, col].numpy()
    box = decode_box(t, (row, col), anchors.sizes[a], stride)
    score = float(torch.sigmoid(grid[a, 4, row, col]))
    return PredictedBox(box=box, score=score, grid_cell=(row, col), anchor_index=a)


def compute_loss(
    raw: torch.Tensor,
    gt: Box,
    anchors: AnchorTable,
    stride: int = STRIDE,
    image_size: tuple[int, int] | None = None,
    mse_weight: float = 1.0,
) -> LossBreakdown:
    """MSE on the positive anchor's offsets + BCE over all objectness logits.

    Both components are means over their contributing terms and summed
    unweighted by default.
    """
    grid = _grid_view(raw)
    h, w = grid.shape[-2:]
    if image_size is None:
        image_size = (h * stride, w * stride)
    ih, iw = image_size
    half_w, half_h = gt.w / 2, gt.h / 2
    if gt.cx - half_w < -1 or gt.cy - half_h < -1 or gt.cx + half_w > iw + 1 or gt.cy + half_h > ih + 1:
        raise AnnotationError(f"ground-truth box {gt} outside {iw}x{ih} image")
    (row, col), a, t_target = encode_box(gt, anchors, stride)
    if not (0 <= row < h and 0 <= col < w):
        raise AnnotationError(f"ground-truth center falls outside the {h}x{w} grid")

    pred_t = grid[a, :4, row, col]
    target = torch.as_tensor(t_target, dtype=pred_t.dtype, device=pred_t.device)
    mse = mse_weight * F.mse_loss(pred_t, target)

    obj = grid[:, 4]
    obj_target = torch.zeros_like(obj)
    obj_target[a, row, col] = 1.0
    bce = F.binary_cross_entropy_with_logits(obj, obj_target)
    return LossBreakdown(total=mse + bce, mse=mse, bce=bce)


def kmeans_anchors(boxes: list[Box], iters: int = 50, seed: int = 0) -> AnchorTable:
    """Recompute the 9 anchor priors by k-means over training box shapes."""
    if not boxes:
        raise InvalidInputError("no boxes to cluster")
    pts = np.array([[b.w, b.h] for b in boxes], dtype=np.float64)
    rng = np.random.default_rng(seed)
    centers = pts[rng.choice(len(pts), size=9, replace=len(pts) < 9)]
    for _ in range(iters):
        d = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        assign = d.argmin(1)
        for k in range(9):
            if (assign == k).any():
                centers[k] = pts[assign == k].mean(0)
    order = np.argsort(centers.prod(1))
    centers = np.maximum(centers[order], 1e-3)
    return AnchorTable(tuple((float(w), float(h)) for w, h in centers))
