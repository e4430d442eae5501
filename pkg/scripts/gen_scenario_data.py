#!/usr/bin/env python3
"""Regenerate the packaged 78-frame demo scenario and its count labels.

The scenario is built from closed-form geometry (cluster pairs 120 px
apart, isolated people 680+ px away, one NMS-duplicate box, one
below-threshold ghost), and the labels are derived here with standalone
oracles (greedy reference NMS + union-find over the proximity graph), not
with the library code, so the packaged labels stay independent of the
pipeline they validate.
"""
import json
import math
import sys
from pathlib import Path

SRC_W, SRC_H = 1280, 720
FPS = 13.0
FRAME_COUNT = 78
STRIDE = 5
CONF_THRESHOLD = 0.5
IOU_THRESHOLD = 0.3
EPS = 200.0

PERSON_W, PERSON_H = 48.0, 120.0
PERSON_XS = [100.0, 220.0, 900.0, 1020.0]
PERSON_Y = 300.0
PERSON_CONFS = [0.9, 0.85, 0.8, 0.75]
FACE_W = FACE_H = 24.0


def build_scenario():
    frames = {}
    for f in range(FRAME_COUNT):
        if f % STRIDE != 0:
            # distractor content on skipped frames; must never reach the report
            frames[str(f)] = {
                "persons": [{"box": [640.0, 200.0, PERSON_W, PERSON_H], "conf": 0.9}],
                "faces": [],
            }
            continue
        s = f // STRIDE
        n = s % 5
        persons = [
            {"box": [PERSON_XS[i], PERSON_Y, PERSON_W, PERSON_H], "conf": PERSON_CONFS[i]}
            for i in range(n)
        ]
        if s % 3 == 0 and n >= 1:
            # near-duplicate of person 0: IoU 42/54 with it, suppressed by NMS
            persons.append({"box": [PERSON_XS[0] + 6.0, PERSON_Y, PERSON_W, PERSON_H],
                            "conf": 0.72})
        if s % 4 == 0 and n >= 1:
            # ghost below the confidence threshold
            persons.append({"box": [600.0, PERSON_Y, PERSON_W, PERSON_H], "conf": 0.3})
        m = min(n, s % 3)
        faces = [
            {"box": [108.0 + 120.0 * j, 310.0, FACE_W, FACE_H], "conf": 0.95,
             "mask_prob": 0.9 if j % 2 == 0 else 0.2}
            for j in range(m)
        ]
        frames[str(f)] = {"persons": persons, "faces": faces}
    return {"frames": frames}


# --- standalone oracles -----------------------------------------------------

def oracle_iou(a, b):
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def oracle_nms(entries):
    """entries: [(box, conf)] -> surviving boxes (greedy reference)."""
    survivors = [(b, c) for b, c in entries if c >= CONF_THRESHOLD]
    order = sorted(range(len(survivors)), key=lambda i: -survivors[i][1])
    kept = []
    for i in order:
        box, conf = survivors[i]
        if all(oracle_iou(box, kb) <= IOU_THRESHOLD for kb, _ in kept):
            kept.append((box, conf))
    return [b for b, _ in kept]


def oracle_clusters(boxes):
    """Union-find over the <=eps proximity graph of centroids."""
    cents = [(x + w / 2.0, y + h / 2.0) for x, y, w, h in boxes]
    parent = list(range(len(cents)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(cents)):
        for j in range(i + 1, len(cents)):
            if math.dist(cents[i], cents[j]) <= EPS:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(len(cents)):
        groups.setdefault(find(i), []).append(i)
    violators = sum(len(g) for g in groups.values() if len(g) >= 2)
    return violators


def build_labels(scenario):
    labels = {}
    for f in range(0, FRAME_COUNT, STRIDE):
        entry = scenario["frames"][str(f)]
        kept = oracle_nms([(p["box"], p["conf"]) for p in entry["persons"]])
        people = len(kept)
        violators = oracle_clusters(kept)
        faces = len(entry["faces"])
        masked = sum(1 for face in entry["faces"] if face["mask_prob"] >= 0.5)
        labels[str(f)] = {"people": people, "violators": violators,
                          "faces": faces, "masked": masked}
    return {"frames": labels}


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else \
        Path(__file__).resolve().parent.parent / "src" / "crowdsafe" / "data"
    scenario = build_scenario()
    labels = build_labels(scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scenario_78.json").write_text(
        json.dumps(scenario, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / "scenario_78_labels.json").write_text(
        json.dumps(labels, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote scenario ({FRAME_COUNT} frames) and labels to {out_dir}")
    for f in sorted((int(k) for k in labels["frames"]),)[:16]:
        print(f"  frame {f:2d}: {labels['frames'][str(f)]}")


if __name__ == "__main__":
    main()
