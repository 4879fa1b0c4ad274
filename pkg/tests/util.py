"""Shared test helpers: finite differences and loop oracles."""

import numpy as np
import torch


def central_diff_grad(fn, param: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Central finite differences of a scalar fn w.r.t. every entry of param."""
    grad = torch.zeros_like(param)
    flat = param.data.view(-1)
    gflat = grad.view(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        hi = fn().item()
        flat[i] = orig - eps
        lo = fn().item()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * eps)
    return grad


def rel_error(a: torch.Tensor, b: torch.Tensor, floor: float = 1e-8) -> float:
    num = (a - b).abs().max().item()
    den = max(a.abs().max().item(), b.abs().max().item(), floor)
    return num / den


def softmax_oracle(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax computed with plain scalar loops."""
    out = np.zeros_like(logits, dtype=np.float64)
    for r in range(logits.shape[0]):
        m = max(logits[r])
        exps = [np.exp(v - m) for v in logits[r]]
        s = sum(exps)
        out[r] = [e / s for e in exps]
    return out


def raster_iou(a, b, grid: int = 64) -> float:
    """Pixel-count IoU for integer-aligned boxes on a small grid."""
    ga = np.zeros((grid, grid), dtype=bool)
    gb = np.zeros((grid, grid), dtype=bool)
    ax0, ay0, ax1, ay1 = (int(round(v)) for v in a.corners())
    bx0, by0, bx1, by1 = (int(round(v)) for v in b.corners())
    ga[ay0:ay1, ax0:ax1] = True
    gb[by0:by1, bx0:bx1] = True
    inter = np.logical_and(ga, gb).sum()
    union = np.logical_or(ga, gb).sum()
    return inter / union
