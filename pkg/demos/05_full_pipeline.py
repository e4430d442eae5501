#!/usr/bin/env python3
"""End-to-end run on the packaged 78-frame scenario: synthetic frames in,
annotated frames + report out, then evaluation against the packaged count
labels and a per-stage timing table.
Run: python3 demos/05_full_pipeline.py
"""
import json
from pathlib import Path

from crowdsafe import evaluate, run
from crowdsafe.backends import load_scenario, synthetic_backends
from crowdsafe.data import SCENARIO_78, SCENARIO_78_LABELS, path as data_path
from crowdsafe.evaluation import load_labels
from crowdsafe.imaging import new_image
from crowdsafe.pipeline import PipelineConfig
from crowdsafe import imgio

out_dir = Path(__file__).parent / "output" / "pipeline_run"
frames_dir = Path(__file__).parent / "output" / "source_frames"
frames_dir.mkdir(parents=True, exist_ok=True)

frame_names = []
for i in range(78):
    name = f"src_{i:03d}.png"
    imgio.write_image(frames_dir / name, new_image(1280, 720, 3, fill=96))
    frame_names.append(str(frames_dir / name))
manifest = {"fps": 13.0, "frames": frame_names}

script = load_scenario(data_path(SCENARIO_78))
report = run(manifest, PipelineConfig(), synthetic_backends(script), out_dir=out_dir,
             extra_config={"backend": "synthetic", "scenario": SCENARIO_78})

agg = report.aggregates()
print(f"processed {agg['frames']} sampled frames of 78 "
      f"({agg['video_seconds']:.1f}s of video at 13 fps)")
print(f"totals: {agg['totals']}")

print("\nper-frame counts:")
for f in report.frames:
    print(f"  frame {f.index:2d}: people={f.counts.people} violators={f.counts.violators} "
          f"faces={f.counts.faces} masked={f.counts.masked}")

labels = load_labels(data_path(SCENARIO_78_LABELS))
metrics = evaluate(report.to_dict(), labels)
print("\nevaluation against the packaged labels (accuracy / F1 / s-per-video-s):")
for row_name, row in metrics["rows"].items():
    t = row["seconds_per_video_second"]
    print(f"  {row_name:<20} {row['accuracy']:.3f}   {row['f1']:.3f}   {t:.5f}")
overall = metrics["overall"]
print(f"  {'overall':<20} {overall['accuracy']:.3f}   {overall['f1']:.3f}   "
      f"{overall['seconds_per_video_second']:.5f}")

print(f"\nannotated frames + report.json under {out_dir}")
