"""End-to-end video processing: sample frames, detect people, cluster for
distancing violations, detect faces, classify masks, annotate, report.

Observable outputs (counts, annotations, report ordering) are independent
of the worker count; only wall-clock timings vary between runs.  Per-frame
total time covers overlapping stages, so it is >= the max stage time, not
necessarily the sum.
"""
from __future__ import annotations

import json
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from time import perf_counter
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import imgio
from .backends import Backends
from .distancing import DbscanParams, ViolationReport, assess
from .geometry import BoundingBox, Detection, NmsParams, centroid, non_max_suppression
from .imaging import CropOutsideImage, crop, resize_bilinear, validate_image

STAGES = ("person_detection", "distancing", "face_detection", "mask_classification", "annotation")

# annotation palette (RGB)
COLOR_SAFE = (255, 165, 0)      # orange boxes for people outside any cluster
COLOR_VIOLATOR = (0, 0, 255)    # blue boxes for cluster members
COLOR_EDGE = (255, 0, 0)        # red lines between too-close pairs
COLOR_MASKED = (0, 200, 0)
COLOR_UNMASKED = (255, 0, 0)
STROKE = 2


class VideoManifestError(ValueError):
    """Malformed video manifest document."""


class ReportError(ValueError):
    """Malformed video report document."""


class Counts(NamedTuple):
    people: int
    violators: int
    faces: int
    masked: int


@dataclass
class FrameRecord:
    index: int
    timestamp: float
    image: np.ndarray


@dataclass(frozen=True)
class FaceObservation:
    box: BoundingBox
    mask_prob: float
    masked: bool


@dataclass(frozen=True)
class PipelineConfig:
    stride: int = 5
    detector_input: int = 416
    classifier_input: int = 128
    nms: NmsParams = NmsParams()
    dbscan: DbscanParams = DbscanParams()
    mask_threshold: float = 0.5
    workers: int = 1
    pixels_per_meter: Optional[float] = None  # when set, eps = min_distance_m * this
    min_distance_m: float = 2.0

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.detector_input < 1 or self.classifier_input < 1:
            raise ValueError("input sizes must be >= 1")
        if not 0.0 <= self.mask_threshold <= 1.0:
            raise ValueError(f"mask threshold must be in [0, 1], got {self.mask_threshold}")

    def effective_dbscan(self) -> DbscanParams:
        if self.pixels_per_meter is None:
            return self.dbscan
        return DbscanParams(eps=self.min_distance_m * self.pixels_per_meter,
                            min_pts=self.dbscan.min_pts)

    def to_config_dict(self) -> dict:
        return {
            "stride": self.stride,
            "detector_input": self.detector_input,
            "classifier_input": self.classifier_input,
            "conf": self.nms.confidence_threshold,
            "nms": self.nms.iou_threshold,
            "eps": self.effective_dbscan().eps,
            "min_pts": self.dbscan.min_pts,
            "mask_threshold": self.mask_threshold,
            "workers": self.workers,
        }


_EMPTY_VIOLATION = ViolationReport((), (), ())


@dataclass
class FrameResult:
    index: int
    persons: Tuple[Detection, ...] = ()
    violation: ViolationReport = _EMPTY_VIOLATION
    faces: Tuple[FaceObservation, ...] = ()
    counts: Counts = Counts(0, 0, 0, 0)
    stage_timings: Dict[str, float] = field(default_factory=dict)
    failed: bool = False
    error: Optional[str] = None
    total_s: float = 0.0


def sample_indices(frame_count: int, stride: int) -> List[int]:
    """Indices 0, stride, 2*stride, ... below frame_count."""
    if frame_count < 0:
        raise ValueError(f"frame count must be >= 0, got {frame_count}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    return list(range(0, frame_count, stride))


def process_frame(frame: FrameRecord, cfg: PipelineConfig, backends: Backends) -> FrameResult:
    """Run detection, distancing and mask stages on one frame.

    Any backend invocation failure marks the frame failed instead of
    raising.  Faces whose boxes miss the frame entirely are dropped.
    """
    timings = {s: 0.0 for s in STAGES}
    t_start = perf_counter()
    try:
        validate_image(frame.image)
        h, w = frame.image.shape[:2]

        t0 = perf_counter()
        d = cfg.detector_input
        det_img = resize_bilinear(frame.image, d, d)
        raw = backends.person.detect(det_img, frame.index, (d / w, d / h))
        sx, sy = w / d, h / d
        persons = tuple(non_max_suppression(
            [Detection(r.box.scaled(sx, sy), r.confidence, r.category) for r in raw],
            cfg.nms))
        timings["person_detection"] = perf_counter() - t0

        def distancing_stage():
            t = perf_counter()
            violation = assess([p.box for p in persons], cfg.effective_dbscan())
            return violation, perf_counter() - t

        def face_mask_stage():
            t = perf_counter()
            size = backends.face.input_size
            if size is None:
                face_img, fsc = frame.image, (1.0, 1.0)
            else:
                fw, fh = size
                face_img, fsc = resize_bilinear(frame.image, fw, fh), (fw / w, fh / h)
            raw_faces = backends.face.detect(face_img, frame.index, fsc)
            face_dets = [Detection(r.box.scaled(1.0 / fsc[0], 1.0 / fsc[1]), r.confidence,
                                   r.category) for r in raw_faces]
            t_face = perf_counter() - t
            t = perf_counter()
            c = cfg.classifier_input
            observations = []
            for j, det in enumerate(face_dets):
                try:
                    face_crop = crop(frame.image, det.box)
                except CropOutsideImage:
                    continue
                prob = backends.mask.classify(resize_bilinear(face_crop, c, c), frame.index, j)
                observations.append(FaceObservation(det.box, prob, prob >= cfg.mask_threshold))
            return tuple(observations), t_face, perf_counter() - t

        if cfg.workers == 1:
            violation, timings["distancing"] = distancing_stage()
            faces, timings["face_detection"], timings["mask_classification"] = face_mask_stage()
        else:
            # distancing and the face/mask chain are independent stages
            with ThreadPoolExecutor(max_workers=2) as pool:
                fut_v = pool.submit(distancing_stage)
                fut_f = pool.submit(face_mask_stage)
                violation, timings["distancing"] = fut_v.result()
                faces, timings["face_detection"], timings["mask_classification"] = fut_f.result()

        counts = Counts(len(persons), violation.violator_count, len(faces),
                        sum(1 for f in faces if f.masked))
        return FrameResult(frame.index, persons, violation, faces, counts, timings,
                           total_s=perf_counter() - t_start)
    except Exception as e:  # backend/contract failures poison one frame, not the run
        return FrameResult(frame.index, stage_timings=timings, failed=True,
                           error=f"{type(e).__name__}: {e}", total_s=perf_counter() - t_start)


# ---------------------------------------------------------------------------
# annotation

def _round_px(v: float) -> int:
    return int(math.floor(v + 0.5))


def _fill(img: np.ndarray, y0: int, y1: int, x0: int, x1: int, color) -> None:
    h, w = img.shape[:2]
    y0, y1 = max(y0, 0), min(y1, h)
    x0, x1 = max(x0, 0), min(x1, w)
    if y0 < y1 and x0 < x1:
        img[y0:y1, x0:x1] = color


def draw_box_outline(img: np.ndarray, box: BoundingBox, color, stroke: int = STROKE) -> None:
    x0, y0 = _round_px(box.x), _round_px(box.y)
    x1, y1 = _round_px(box.x + box.w), _round_px(box.y + box.h)
    ix0, iy0 = x0 + stroke, y0 + stroke
    ix1, iy1 = x1 - stroke, y1 - stroke
    _fill(img, y0, min(iy0, y1), x0, x1, color)                    # top band
    _fill(img, max(iy1, y0), y1, x0, x1, color)                    # bottom band
    _fill(img, min(iy0, y1), max(iy1, y0), x0, min(ix0, x1), color)  # left band
    _fill(img, min(iy0, y1), max(iy1, y0), max(ix1, x0), x1, color)  # right band


def draw_segment(img: np.ndarray, p0, p1, color, thickness: int = STROKE) -> None:
    """Bresenham line; each point stamps a thickness x thickness block."""
    x0, y0 = _round_px(p0[0]), _round_px(p0[1])
    x1, y1 = _round_px(p1[0]), _round_px(p1[1])
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        _fill(img, y0, y0 + thickness, x0, x0 + thickness, color)
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def annotate(frame: FrameRecord, result: FrameResult) -> np.ndarray:
    """Draw the frame verdicts: orange safe boxes, blue violator boxes,
    red violation edges, green/red face boxes.  Returns a 3-channel image."""
    img = validate_image(frame.image)
    if img.shape[2] == 1:
        canvas = np.repeat(img, 3, axis=2)
    elif img.shape[2] == 4:
        canvas = img[:, :, :3].copy()
    else:
        canvas = img.copy()
    if result.failed:
        return canvas
    for i in result.violation.safe_indices:
        draw_box_outline(canvas, result.persons[i].box, COLOR_SAFE)
    for members in result.violation.clusters:
        for i in members:
            draw_box_outline(canvas, result.persons[i].box, COLOR_VIOLATOR)
    for i, j in result.violation.edges:
        draw_segment(canvas, centroid(result.persons[i].box), centroid(result.persons[j].box),
                     COLOR_EDGE)
    for face in result.faces:
        draw_box_outline(canvas, face.box, COLOR_MASKED if face.masked else COLOR_UNMASKED)
    return canvas


# ---------------------------------------------------------------------------
# whole-video runs and the report document

def load_manifest(path) -> dict:
    """Read a video manifest {"fps": number, "frames": [paths...]}."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise VideoManifestError(f"{path}: {e}") from e
    except json.JSONDecodeError as e:
        raise VideoManifestError(
            f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise VideoManifestError(f"{path}: expected a top-level object")
    fps = doc.get("fps")
    if not isinstance(fps, (int, float)) or isinstance(fps, bool) or not fps > 0:
        raise VideoManifestError(f"{path}: fps must be a positive number, got {fps!r}")
    frames = doc.get("frames")
    if not isinstance(frames, list) or not all(isinstance(f, str) for f in frames):
        raise VideoManifestError(f"{path}: frames must be a list of paths")
    # frame paths resolve relative to the manifest location
    base = path.parent
    return {"fps": float(fps), "frames": [str(base / f) if not Path(f).is_absolute() else f
                                          for f in frames]}


@dataclass
class VideoReport:
    config: dict
    frames: List[FrameResult]
    fps: float
    source_frame_count: int

    def aggregates(self) -> dict:
        totals = Counts(*(sum(f.counts[i] for f in self.frames) for i in range(4)))
        n = len(self.frames)
        return {
            "totals": totals._asdict(),
            "means": {k: (v / n if n else None) for k, v in totals._asdict().items()},
            "frames": n,
            "frames_failed": sum(1 for f in self.frames if f.failed),
            "video_seconds": self.source_frame_count / self.fps if self.fps > 0 else None,
        }

    def timing_per_video_second(self) -> dict:
        seconds = self.source_frame_count / self.fps if self.fps > 0 else 0.0
        def norm(value: float) -> Optional[float]:
            return value / seconds if seconds > 0 else None
        out = {stage: norm(sum(f.stage_timings.get(stage, 0.0) for f in self.frames))
               for stage in ("person_detection", "distancing", "face_detection",
                             "mask_classification")}
        out["total"] = norm(sum(f.total_s for f in self.frames))
        return out

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "frames": [
                {
                    "index": f.index,
                    "counts": f.counts._asdict(),
                    "timings_s": {**{s: f.stage_timings.get(s, 0.0) for s in STAGES},
                                  "total": f.total_s},
                    "failed": f.failed,
                    **({"error": f.error} if f.failed else {}),
                }
                for f in self.frames
            ],
            "aggregates": self.aggregates(),
            "timing_per_video_second_s": self.timing_per_video_second(),
        }

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")


def load_report(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ReportError(f"{path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ReportError(f"{path}: invalid JSON: {e.msg}") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("frames"), list):
        raise ReportError(f"{path}: expected a report object with a 'frames' list")
    return doc


def run(manifest: dict, cfg: PipelineConfig, backends: Backends,
        out_dir=None, write_frames: bool = True, extra_config: Optional[dict] = None) -> VideoReport:
    """Process every sampled frame of a video manifest.

    Annotated frames and annotated_manifest.json are written under out_dir
    when given.  Unreadable frames are recorded as failed and skipped.
    """
    fps = float(manifest["fps"])
    frame_paths = list(manifest["frames"])
    indices = sample_indices(len(frame_paths), cfg.stride)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        (out_dir / "frames").mkdir(parents=True, exist_ok=True)

    def job(index: int):
        t0 = perf_counter()
        try:
            image = imgio.read_image(frame_paths[index])
        except (OSError, ValueError) as e:
            return FrameResult(index, failed=True, error=f"unreadable frame: {e}",
                               stage_timings={s: 0.0 for s in STAGES},
                               total_s=perf_counter() - t0), None
        record = FrameRecord(index, index / fps, image)
        result = process_frame(record, cfg, backends)
        t1 = perf_counter()
        annotated = annotate(record, result)
        result.stage_timings["annotation"] = perf_counter() - t1
        result.total_s = perf_counter() - t0
        return result, annotated

    workers = cfg.workers if cfg.workers > 0 else (os.cpu_count() or 1)
    if workers > 1 and len(indices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, indices))
    else:
        outcomes = [job(i) for i in indices]

    results: List[FrameResult] = []
    annotated_paths: List[str] = []
    for result, annotated in outcomes:
        results.append(result)
        if out_dir is not None and write_frames and annotated is not None:
            rel = f"frames/frame_{result.index:05d}.png"
            imgio.write_image(out_dir / rel, annotated)
            annotated_paths.append(rel)

    config = dict(extra_config or {})
    config.update(cfg.to_config_dict())
    report = VideoReport(config, results, fps, len(frame_paths))
    if out_dir is not None:
        if write_frames:
            (out_dir / "annotated_manifest.json").write_text(
                json.dumps({"fps": fps, "stride": cfg.stride, "frames": annotated_paths},
                           indent=2, sort_keys=True) + "\n", encoding="utf-8")
        report.save(out_dir / "report.json")
    return report


def bench(manifest: dict, cfg: PipelineConfig, backends: Backends, repeat: int) -> dict:
    """Run the pipeline repeatedly; per-stage seconds per video second.

    Rows mirror the per-stage performance table: person_detection,
    social_distancing, face_detection, mask_classification, total.
    """
    if repeat < 1:
        raise ValueError(f"repeat must be >= 1, got {repeat}")
    row_keys = {
        "person_detection": "person_detection",
        "social_distancing": "distancing",
        "face_detection": "face_detection",
        "mask_classification": "mask_classification",
        "total": "total",
    }
    samples: Dict[str, List[float]] = {row: [] for row in row_keys}
    for _ in range(repeat):
        report = run(manifest, cfg, backends, out_dir=None, write_frames=False)
        timing = report.timing_per_video_second()
        for row, key in row_keys.items():
            value = timing[key]
            samples[row].append(float(value) if value is not None else 0.0)
    return {
        row: {
            "mean": statistics.fmean(vals),
            "stddev": statistics.pstdev(vals) if len(vals) > 1 else 0.0,
            "runs": len(vals),
        }
        for row, vals in samples.items()
    }
