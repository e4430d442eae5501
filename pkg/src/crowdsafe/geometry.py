"""Bounding-box arithmetic shared by the detection stages.

Boxes are (x, y, w, h) in pixels with the origin at the top-left corner,
x growing rightward and y downward.  Widths and heights are non-negative;
degenerate (zero-area) boxes are legal everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Sequence

PERSON = "person"
FACE = "face"


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"box {name} must be finite, got {v!r}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"box size must be non-negative, got w={self.w} h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def shifted(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)

    def scaled(self, sx: float, sy: float) -> "BoundingBox":
        return BoundingBox(self.x * sx, self.y * sy, self.w * sx, self.h * sy)


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    confidence: float
    category: str = PERSON

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class NmsParams:
    confidence_threshold: float = 0.5  # detections below this are dropped (inclusive keep)
    iou_threshold: float = 0.3         # overlaps strictly above this are suppressed

    def __post_init__(self) -> None:
        for name in ("confidence_threshold", "iou_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


def centroid(box: BoundingBox) -> Point:
    """Midpoint of a box."""
    return Point(box.x + box.w / 2.0, box.y + box.h / 2.0)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0.0 when the union has no area.

    Areas are derived from the same corner arithmetic as the intersection,
    so identical boxes give exactly 1.0.
    """
    ax2, ay2 = a.x + a.w, a.y + a.h
    bx2, by2 = b.x + b.w, b.y + b.h
    iw = min(ax2, bx2) - max(a.x, b.x)
    ih = min(ay2, by2) - max(a.y, b.y)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax2 - a.x) * (ay2 - a.y) + (bx2 - b.x) * (by2 - b.y) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def non_max_suppression(dets: Sequence[Detection], params: NmsParams = NmsParams()) -> List[Detection]:
    """Greedy NMS over one detection category.

    Detections below the confidence threshold are dropped first.  Survivors
    are visited in descending confidence (ties keep input order) and kept
    unless their IoU with an already-kept detection exceeds the IoU
    threshold.  The result is in visit order, i.e. sorted by descending
    confidence.
    """
    if len({d.category for d in dets}) > 1:
        raise ValueError("non_max_suppression expects a single category per call")
    survivors = [d for d in dets if d.confidence >= params.confidence_threshold]
    order = sorted(range(len(survivors)), key=lambda i: -survivors[i].confidence)
    kept: List[Detection] = []
    for i in order:
        d = survivors[i]
        if all(iou(d.box, k.box) <= params.iou_threshold for k in kept):
            kept.append(d)
    return kept


def centroids_of(boxes: Iterable[BoundingBox]) -> List[Point]:
    return [centroid(b) for b in boxes]
