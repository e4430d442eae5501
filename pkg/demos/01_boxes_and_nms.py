#!/usr/bin/env python3
"""Bounding-box arithmetic walk-through: centroids, IoU, and greedy NMS.

A detector firing twice on the same pedestrian produces overlapping boxes;
NMS keeps the confident one.  Run: python3 demos/01_boxes_and_nms.py
"""
from crowdsafe import BoundingBox, Detection, NmsParams, centroid, iou, non_max_suppression

a = BoundingBox(100, 80, 40, 110)
b = BoundingBox(110, 82, 40, 110)   # near-duplicate of a
c = BoundingBox(400, 90, 42, 105)   # a second pedestrian

print("centroids:")
for name, box in (("a", a), ("b", b), ("c", c)):
    print(f"  {name}: {centroid(box)}")

print(f"\niou(a, b) = {iou(a, b):.3f}   (same person, heavy overlap)")
print(f"iou(a, c) = {iou(a, c):.3f}   (different people)")

detections = [
    Detection(a, 0.92),
    Detection(b, 0.71),   # suppressed: overlaps a beyond the 0.3 threshold
    Detection(c, 0.84),
    Detection(BoundingBox(600, 90, 40, 100), 0.31),  # dropped: below 0.5 confidence
]
kept = non_max_suppression(detections, NmsParams(confidence_threshold=0.5, iou_threshold=0.3))

print(f"\n{len(detections)} raw detections -> {len(kept)} after NMS:")
for d in kept:
    print(f"  conf {d.confidence:.2f} at ({d.box.x:.0f}, {d.box.y:.0f})")
