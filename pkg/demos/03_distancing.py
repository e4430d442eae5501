#!/usr/bin/env python3
"""DBSCAN distancing on a synthetic crowd, annotated the monitoring way:
orange = keeping distance, blue = in a violation cluster, red = the
too-close links.  Writes demos/output/crowd_annotated.png.
Run: python3 demos/03_distancing.py
"""
from pathlib import Path

import numpy as np

from crowdsafe import BoundingBox, Detection, DbscanParams, assess
from crowdsafe.distancing import dbscan
from crowdsafe.geometry import Point, centroid
from crowdsafe.imaging import new_image
from crowdsafe.pipeline import FrameRecord, FrameResult, Counts, annotate
from crowdsafe import imgio

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

rng = np.random.default_rng(11)
boxes = []
# two tight huddles plus scattered loners
for cx, cy, k in ((250, 360, 3), (850, 300, 2)):
    for _ in range(k):
        x = cx + float(rng.uniform(-80, 80))
        y = cy + float(rng.uniform(-40, 40))
        boxes.append(BoundingBox(x, y, 46, 118))
for _ in range(3):
    boxes.append(BoundingBox(float(rng.uniform(60, 1200)), float(rng.uniform(500, 580)), 46, 118))

params = DbscanParams(eps=200.0, min_pts=2)
report = assess(boxes, params)

print(f"{len(boxes)} people: {len(report.safe_indices)} safe, "
      f"{report.violator_count} in violation clusters")
for i, members in enumerate(report.clusters):
    print(f"  cluster {i}: people {list(members)}")
print(f"  violation links: {list(report.edges)}")

labels = dbscan([centroid(b) for b in boxes], params)
print(f"  raw dbscan labels: {list(labels.labels)}  (-1 = noise = safe)")

frame = FrameRecord(0, 0.0, new_image(1280, 720, 3, fill=30))
persons = tuple(Detection(b, 0.9) for b in boxes)
result = FrameResult(index=0, persons=persons, violation=report,
                     counts=Counts(len(boxes), report.violator_count, 0, 0))
imgio.write_image(out_dir / "crowd_annotated.png", annotate(frame, result))
print("wrote crowd_annotated.png")
