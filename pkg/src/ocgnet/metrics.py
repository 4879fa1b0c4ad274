"""Box overlap and accuracy metrics.

Boxes are (center_x, center_y, width, height) floats everywhere in this
package; corner form is derived on demand.  Accuracy at a threshold t is
the percentage of samples whose predicted box overlaps ground truth with
IoU >= t.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ocgnet.errors import InvalidInputError


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in center/size form."""

    cx: float
    cy: float
    w: float
    h: float

    def corners(self) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1) with x0 < x1, y0 < y1."""
        return (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )

    @staticmethod
    def from_corners(x0: float, y0: float, x1: float, y1: float) -> "Box":
        return Box((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)


def iou(a: Box, b: Box) -> float:
    """Intersection area over union area, in [0, 1]."""
    if a.w <= 0 or a.h <= 0 or b.w <= 0 or b.h <= 0:
        raise InvalidInputError("boxes must have positive area")
    ax0, ay0, ax1, ay1 = a.corners()
    bx0, by0, bx1, by1 = b.corners()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    return inter / union


def acc_at_t(pairs: Sequence[tuple[Box, Box]], t: float) -> float:
    """Percent of (pred, gt) pairs with IoU >= t.  Boundary counts as hit."""
    if not pairs:
        raise InvalidInputError("empty evaluation set")
    if not (0 < t < 1):
        raise InvalidInputError(f"threshold must be in (0, 1), got {t}")
    hits = sum(1 for pred, gt in pairs if iou(pred, gt) >= t)
    return 100.0 * hits / len(pairs)


@dataclass
class EvalReport:
    acc_at_25: float
    acc_at_50: float
    mean_iou: float
    per_class: dict[str, dict] = field(default_factory=dict)
    n: int = 0

    def to_dict(self) -> dict:
        return {
            "acc_at_25": self.acc_at_25,
            "acc_at_50": self.acc_at_50,
            "mean_iou": self.mean_iou,
            "per_class": self.per_class,
            "n": self.n,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_table(self) -> str:
        """Aligned-column text table: one row per class plus overall."""
        header = f"{'class':<16}{'count':>8}{'acc@0.25':>12}{'acc@0.50':>12}{'IoU':>10}"
        lines = [header, "-" * len(header)]
        for name in sorted(self.per_class):
            row = self.per_class[name]
            lines.append(
                f"{name:<16}{row['count']:>8}"
                f"{row['acc_at_25']:>12.2f}{row['acc_at_50']:>12.2f}{'':>10}"
            )
        lines.append(
            f"{'overall':<16}{self.n:>8}"
            f"{self.acc_at_25:>12.2f}{self.acc_at_50:>12.2f}{self.mean_iou:>10.2f}"
        )
        return "\n".join(lines)


def per_class_report(
    pairs_with_labels: Iterable[tuple[Box, Box, str]],
    thresholds: Sequence[float] = (0.25, 0.50),
    known_labels: Sequence[str] | None = None,
) -> EvalReport:
    """Grouped accuracy per class label plus the overall summary.

    Labels outside ``known_labels`` (when given) are bucketed under
    "other" with a warning.  Class ordering in the report is
    lexicographic.
    """
    items = list(pairs_with_labels)
    if not items:
        raise InvalidInputError("empty evaluation set")
    t_lo, t_hi = sorted(thresholds)[:2] if len(thresholds) >= 2 else (0.25, 0.50)

    groups: dict[str, list[float]] = {}
    ious = []
    for pred, gt, label in items:
        if known_labels is not None and label not in known_labels:
            warnings.warn(f"unknown class label {label!r}, bucketing under 'other'")
            label = "other"
        v = iou(pred, gt)
        groups.setdefault(label, []).append(v)
        ious.append(v)

    per_class = {}
    for label in sorted(groups):
        vals = groups[label]
        per_class[label] = {
            "count": len(vals),
            "acc_at_25": 100.0 * sum(v >= t_lo for v in vals) / len(vals),
            "acc_at_50": 100.0 * sum(v >= t_hi for v in vals) / len(vals),
        }
    n = len(items)
    return EvalReport(
        acc_at_25=100.0 * sum(v >= t_lo for v in ious) / n,
        acc_at_50=100.0 * sum(v >= t_hi for v in ious) / n,
        mean_iou=100.0 * sum(ious) / n,
        per_class=per_class,
        n=n,
    )
