"""Count-based evaluation against labelled videos.

Labels are per-sampled-frame counts (people, violators, faces, masked).
Counts are matched by truncation: TP = min(pred, gt), FP = the surplus,
FN = the shortfall.  Only the masked quantity has a natural negative class
(unmasked faces), so TN = 0 elsewhere and the accuracy formula reduces to
TP / (TP + FP + FN) there.  Confusions are summed across frames before the
metric formulas are applied once (micro-averaging).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

# metrics-report row name per counted quantity, mirroring the system
# performance table
QUANTITY_ROWS = {
    "people": "person_detection",
    "violators": "social_distancing",
    "faces": "face_detection",
    "masked": "mask_classification",
}
# report timing key feeding each row's seconds_per_video_second column
ROW_TIMING_KEYS = {
    "person_detection": "person_detection",
    "social_distancing": "distancing",
    "face_detection": "face_detection",
    "mask_classification": "mask_classification",
}


class LabelError(ValueError):
    """Malformed ground-truth label document."""


class LabelMismatchError(ValueError):
    """Labels reference frames absent from the report."""

    def __init__(self, missing_frames):
        self.missing_frames = tuple(sorted(missing_frames))
        super().__init__(f"labels reference frames missing from the report: {list(self.missing_frames)}")


@dataclass(frozen=True)
class GroundTruthCounts:
    people: int
    violators: int
    faces: int
    masked: int

    def __post_init__(self) -> None:
        for name in ("people", "violators", "faces", "masked"):
            if getattr(self, name) < 0:
                raise LabelError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.masked > self.faces:
            raise LabelError(f"masked ({self.masked}) cannot exceed faces ({self.faces})")
        if self.violators > self.people:
            raise LabelError(f"violators ({self.violators}) cannot exceed people ({self.people})")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


def confusion_from_counts(pred: int, gt: int, pred_neg: int = 0, gt_neg: int = 0) -> ConfusionCounts:
    """Truncation matching of predicted vs ground-truth counts."""
    if min(pred, gt, pred_neg, gt_neg) < 0:
        raise ValueError("counts must be non-negative")
    return ConfusionCounts(
        tp=min(pred, gt),
        fp=max(pred - gt, 0),
        fn=max(gt - pred, 0),
        tn=min(pred_neg, gt_neg),
    )


def accuracy(cc: ConfusionCounts) -> Optional[float]:
    """(TP+TN) / ((TP+FP)+(TN+FN)); None when the confusion is all zero."""
    denom = cc.tp + cc.fp + cc.tn + cc.fn
    if denom == 0:
        return None
    return (cc.tp + cc.tn) / denom


def precision_recall_f1(cc: ConfusionCounts) -> Tuple[Optional[float], Optional[float], Optional[float]]:
    """Precision, recall and F1 = 2PR/(P+R); divisions by zero yield None."""
    precision = cc.tp / (cc.tp + cc.fp) if cc.tp + cc.fp > 0 else None
    recall = cc.tp / (cc.tp + cc.fn) if cc.tp + cc.fn > 0 else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2.0 * (precision * recall) / (precision + recall)
    return precision, recall, f1


def load_labels(path) -> Dict[int, GroundTruthCounts]:
    """Read a ground-truth label file {"frames": {"<index>": {counts...}}}."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise LabelError(f"{path}: {e}") from e
    except json.JSONDecodeError as e:
        raise LabelError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("frames"), dict):
        raise LabelError(f"{path}: expected a top-level object with a 'frames' mapping")
    labels: Dict[int, GroundTruthCounts] = {}
    for key, counts in doc["frames"].items():
        try:
            index = int(key)
        except ValueError:
            raise LabelError(f"{path}: frame key {key!r} is not an integer") from None
        if index < 0:
            raise LabelError(f"{path}: frame index {index} is negative")
        if not isinstance(counts, dict):
            raise LabelError(f"{path}: frames.{key} must be an object")
        try:
            labels[index] = GroundTruthCounts(
                people=int(counts.get("people", 0)),
                violators=int(counts.get("violators", 0)),
                faces=int(counts.get("faces", 0)),
                masked=int(counts.get("masked", 0)),
            )
        except (TypeError, ValueError) as e:
            raise LabelError(f"{path}: frames.{key}: {e}") from None
    return labels


def evaluate(report: Mapping, labels: Mapping[int, GroundTruthCounts]) -> dict:
    """Score a video report against count labels.

    Confusions are summed over all labelled frames per quantity, then the
    accuracy / precision / recall / F1 formulas are applied once on the
    aggregate.  The result mirrors the per-stage system performance table:
    one row per quantity with its seconds-per-video-second timing.
    """
    by_index = {f["index"]: f for f in report.get("frames", [])}
    missing = [i for i in labels if i not in by_index]
    if missing:
        raise LabelMismatchError(missing)

    sums = {q: ConfusionCounts() for q in QUANTITY_ROWS}
    for index, gt in sorted(labels.items()):
        counts = by_index[index]["counts"]
        pred = {q: int(counts[q]) for q in QUANTITY_ROWS}
        sums["people"] += confusion_from_counts(pred["people"], gt.people)
        sums["violators"] += confusion_from_counts(pred["violators"], gt.violators)
        sums["faces"] += confusion_from_counts(pred["faces"], gt.faces)
        sums["masked"] += confusion_from_counts(
            pred["masked"], gt.masked,
            pred_neg=pred["faces"] - pred["masked"] if pred["faces"] >= pred["masked"] else 0,
            gt_neg=gt.faces - gt.masked,
        )

    timing = report.get("timing_per_video_second_s", {})
    rows = {}
    for quantity, row_name in QUANTITY_ROWS.items():
        cc = sums[quantity]
        precision, recall, f1 = precision_recall_f1(cc)
        rows[row_name] = {
            "accuracy": accuracy(cc),
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "confusion": {"tp": cc.tp, "fp": cc.fp, "fn": cc.fn, "tn": cc.tn},
            "seconds_per_video_second": timing.get(ROW_TIMING_KEYS[row_name]),
        }
    defined_acc = [r["accuracy"] for r in rows.values() if r["accuracy"] is not None]
    defined_f1 = [r["f1"] for r in rows.values() if r["f1"] is not None]
    return {
        "rows": rows,
        "overall": {
            "accuracy": sum(defined_acc) / len(defined_acc) if defined_acc else None,
            "f1": sum(defined_f1) / len(defined_f1) if defined_f1 else None,
            "seconds_per_video_second": timing.get("total"),
        },
        "frames_evaluated": len(labels),
    }
