"""Dataset-generation procedures: mask superimposition and random blur.

Mask overlay is landmark-driven: the mask asset is split at its vertical
midline and each half is warped (projective quad-to-quad, bilinear
sampling) onto a destination quad anchored at the nose bridge and the chin
points, then alpha-composited.  Landmarks come from sidecar JSON files,
not from a detector, so the geometry stays exactly controllable.

Blur augmentation draws one of gaussian / average / motion / none
uniformly, with the kernel size uniform over that style's inclusive range.
All randomness flows through numpy Generators; dataset runs derive one
substream per record from (seed, record index), so results never depend
on processing order.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import imgio
from .geometry import Point
from .imaging import (
    AVERAGE_SIZES,
    GAUSSIAN_SIZES,
    MOTION_DIRECTIONS,
    MOTION_SIZES,
    BlurChoice,
    average_kernel,
    convolve2d,
    gaussian_kernel,
    motion_kernel,
    quantize_u8,
    validate_image,
)

Quad = Tuple[Point, Point, Point, Point]  # corner order TL, TR, BR, BL


class LandmarkError(ValueError):
    """Missing, malformed or degenerate face landmarks."""


class ManifestError(ValueError):
    """Malformed dataset manifest CSV."""


@dataclass(frozen=True)
class LandmarkSet:
    nose_bridge: Point
    chin_left: Point
    chin_bottom: Point
    chin_right: Point
    chin_contour: Tuple[Point, ...] = ()

    def __post_init__(self) -> None:
        named = [self.nose_bridge, self.chin_left, self.chin_bottom, self.chin_right]
        if len({(p.x, p.y) for p in named}) != 4:
            raise LandmarkError("the four named landmarks must be pairwise distinct")


@dataclass(frozen=True)
class MaskPlacement:
    rotation_deg: float
    left_quad: Quad
    right_quad: Quad


@dataclass(frozen=True)
class BlurConfig:
    gaussian_range: Tuple[int, int] = GAUSSIAN_SIZES
    average_range: Tuple[int, int] = AVERAGE_SIZES
    motion_range: Tuple[int, int] = MOTION_SIZES


_BLUR_OPTIONS = ("gaussian", "average", "motion", "none")


def mask_fit(lm: LandmarkSet) -> MaskPlacement:
    """Compute the mask rotation and the two destination quads.

    Rotation is atan2(u.x, -u.y) for u = nose_bridge - chin_bottom: 0 for
    an upright face, positive clockwise.  Both quads share the center edge
    nose_bridge -> chin_bottom; the top edge sits on the nose-bridge line
    (the chin corners translated by u), the bottom edge on the chin.
    """
    ux = lm.nose_bridge.x - lm.chin_bottom.x
    uy = lm.nose_bridge.y - lm.chin_bottom.y
    if ux == 0.0 and uy == 0.0:
        raise LandmarkError("nose_bridge and chin_bottom coincide")
    rotation = math.degrees(math.atan2(ux, -uy))
    up = Point(ux, uy)
    left_quad = (
        Point(lm.chin_left.x + up.x, lm.chin_left.y + up.y),
        lm.nose_bridge,
        lm.chin_bottom,
        lm.chin_left,
    )
    right_quad = (
        lm.nose_bridge,
        Point(lm.chin_right.x + up.x, lm.chin_right.y + up.y),
        lm.chin_right,
        lm.chin_bottom,
    )
    return MaskPlacement(rotation, left_quad, right_quad)


def _homography(src: Sequence[Tuple[float, float]], dst: Sequence[Tuple[float, float]]) -> np.ndarray:
    """3x3 projective map sending the 4 src points onto the 4 dst points."""
    rows = []
    rhs = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y])
        rhs.append(u)
        rows.append([0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y])
        rhs.append(v)
    try:
        p = np.linalg.solve(np.asarray(rows, dtype=np.float64), np.asarray(rhs, dtype=np.float64))
    except np.linalg.LinAlgError as e:
        raise LandmarkError(f"degenerate destination quad: {e}") from e
    return np.array([[p[0], p[1], p[2]], [p[3], p[4], p[5]], [p[6], p[7], 1.0]])


def _bilinear_rgba(asset: np.ndarray, ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
    """Sample an RGBA asset at continuous (ax, ay) pixel centers, edge-clamped."""
    h, w, _ = asset.shape
    sx = np.clip(ax - 0.5, 0.0, w - 1.0)
    sy = np.clip(ay - 0.5, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    data = asset.astype(np.float64)
    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bottom = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def _warp_half(img: np.ndarray, asset: np.ndarray, src_quad: Sequence[Tuple[float, float]],
               dst_quad: Quad) -> None:
    """Warp one asset half onto its destination quad, compositing in place."""
    h, w, channels = img.shape
    xs = [p.x for p in dst_quad]
    ys = [p.y for p in dst_quad]
    x0 = max(int(math.floor(min(xs))), 0)
    y0 = max(int(math.floor(min(ys))), 0)
    x1 = min(int(math.ceil(max(xs))), w)
    y1 = min(int(math.ceil(max(ys))), h)
    if x1 <= x0 or y1 <= y0:
        return
    hom = _homography([(p.x, p.y) for p in dst_quad], src_quad)  # image -> asset coords
    gx, gy = np.meshgrid(np.arange(x0, x1) + 0.5, np.arange(y0, y1) + 0.5)
    denom = hom[2, 0] * gx + hom[2, 1] * gy + hom[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ax = (hom[0, 0] * gx + hom[0, 1] * gy + hom[0, 2]) / denom
        ay = (hom[1, 0] * gx + hom[1, 1] * gy + hom[1, 2]) / denom
    sxs = [p[0] for p in src_quad]
    sys_ = [p[1] for p in src_quad]
    valid = (
        np.isfinite(ax) & np.isfinite(ay) & (np.abs(denom) > 1e-12)
        & (ax >= min(sxs)) & (ax <= max(sxs)) & (ay >= min(sys_)) & (ay <= max(sys_))
    )
    if not valid.any():
        return
    sample = _bilinear_rgba(asset, ax, ay)
    alpha = sample[..., 3:4]
    region = img[y0:y1, x0:x1].astype(np.float64)
    if channels == 1:
        src_val = (0.299 * sample[..., 0] + 0.587 * sample[..., 1] + 0.114 * sample[..., 2])[..., None]
        blended = (alpha * src_val + (255.0 - alpha) * region) / 255.0
    else:
        blended = region.copy()
        blended[..., :3] = (alpha * sample[..., :3] + (255.0 - alpha) * region[..., :3]) / 255.0
        if channels == 4:
            blended[..., 3:4] = 255.0 - (255.0 - alpha) * (255.0 - region[..., 3:4]) / 255.0
    out = np.where(valid[..., None], quantize_u8(blended), img[y0:y1, x0:x1])
    img[y0:y1, x0:x1] = out


def overlay_mask(img: np.ndarray, lm: LandmarkSet, asset: np.ndarray) -> np.ndarray:
    """Superimpose a mask asset on a face, guided by its landmarks.

    The asset is split at its vertical midline; each half maps onto the
    quad from mask_fit and is alpha-composited.  Pixels outside the quads
    are untouched.
    """
    img = validate_image(img).copy()
    asset = validate_image(asset)
    if asset.shape[2] != 4:
        raise ValueError(f"mask asset must be RGBA, got {asset.shape[2]} channels")
    placement = mask_fit(lm)
    ah, aw = asset.shape[:2]
    half = aw / 2.0
    left_src = [(0.0, 0.0), (half, 0.0), (half, float(ah)), (0.0, float(ah))]
    right_src = [(half, 0.0), (float(aw), 0.0), (float(aw), float(ah)), (half, float(ah))]
    _warp_half(img, asset, left_src, placement.left_quad)
    _warp_half(img, asset, right_src, placement.right_quad)
    return img


def pick_blur(rng: np.random.Generator, cfg: BlurConfig = BlurConfig()) -> BlurChoice:
    """Draw one blur option uniformly, then its size (and direction) uniformly."""
    kind = _BLUR_OPTIONS[int(rng.integers(len(_BLUR_OPTIONS)))]
    if kind == "none":
        return BlurChoice("none")
    lo, hi = {
        "gaussian": cfg.gaussian_range,
        "average": cfg.average_range,
        "motion": cfg.motion_range,
    }[kind]
    size = int(rng.integers(lo, hi + 1))
    if kind == "motion":
        direction = MOTION_DIRECTIONS[int(rng.integers(len(MOTION_DIRECTIONS)))]
        return BlurChoice("motion", size, direction)
    return BlurChoice(kind, size)


def blur_augment(img: np.ndarray, choice: BlurChoice) -> np.ndarray:
    """Apply the chosen blur; kind "none" returns the input unchanged."""
    if choice.kind == "none":
        return img
    if choice.kind == "gaussian":
        kernel = gaussian_kernel(choice.kernel_size)
    elif choice.kind == "average":
        kernel = average_kernel(choice.kernel_size)
    else:
        kernel = motion_kernel(choice.kernel_size, choice.motion_direction)
    return convolve2d(img, kernel)


# ---------------------------------------------------------------------------
# manifests, landmarks and the dataset run

@dataclass(frozen=True)
class DatasetRecord:
    path: str
    label: int


def read_manifest(path) -> List[DatasetRecord]:
    """Read a `path,label` CSV manifest."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header[:2]] != ["path", "label"]:
                raise ManifestError(f"{path}: expected header 'path,label', got {header}")
            records = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) < 2:
                    raise ManifestError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
                try:
                    label = int(row[1])
                except ValueError:
                    raise ManifestError(f"{path}:{lineno}: label must be an integer") from None
                if label not in (0, 1):
                    raise ManifestError(f"{path}:{lineno}: label must be 0 or 1, got {label}")
                records.append(DatasetRecord(row[0], label))
            return records
    except OSError as e:
        raise ManifestError(f"{path}: {e}") from e


def write_manifest(path, records: Sequence[DatasetRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label"])
        for rec in records:
            writer.writerow([rec.path, rec.label])


def load_landmarks(path) -> LandmarkSet:
    """Read a sidecar landmark file {"nose_bridge": [x, y], ...}."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise LandmarkError(f"{path}: {e}") from e
    except json.JSONDecodeError as e:
        raise LandmarkError(f"{path}: invalid JSON: {e.msg}") from e
    points = {}
    for key in ("nose_bridge", "chin_left", "chin_bottom", "chin_right"):
        value = doc.get(key)
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise LandmarkError(f"{path}: {key} must be [x, y], got {value!r}")
        points[key] = Point(float(value[0]), float(value[1]))
    contour = tuple(Point(float(x), float(y)) for x, y in doc.get("chin_contour", []))
    return LandmarkSet(chin_contour=contour, **points)


def split_records(records: Sequence[DatasetRecord], test_fraction: float,
                  seed: int) -> Tuple[List[DatasetRecord], List[DatasetRecord]]:
    """Seeded shuffle-and-split into train/test lists."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError(f"test fraction must be in [0, 1), got {test_fraction}")
    rng = np.random.default_rng([seed, len(records)])
    order = rng.permutation(len(records))
    n_test = int(math.floor(len(records) * test_fraction + 0.5))
    test_idx = set(order[:n_test].tolist())
    train = [r for i, r in enumerate(records) if i not in test_idx]
    test = [r for i, r in enumerate(records) if i in test_idx]
    return train, test


def generate_dataset(records: Sequence[DatasetRecord], out_dir,
                     mask_assets: Optional[Sequence[np.ndarray]] = None,
                     landmarks_dir=None,
                     blur_cfg: BlurConfig = BlurConfig(),
                     seed: int = 0,
                     image_format: str = "png") -> Tuple[List[DatasetRecord], List[Tuple[str, str]]]:
    """Run the augmentation procedure over a manifest.

    When mask assets are supplied, label-0 records get a mask superimposed
    (assets round-robin by record index) and become label-1 outputs; every
    record then passes through the random blur step.  Per-record failures
    (unreadable image, missing landmarks) are collected into failures.csv
    and the run continues.  A fixed seed reproduces the output tree
    byte-identically.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    outputs: List[DatasetRecord] = []
    failures: List[Tuple[str, str]] = []
    for idx, rec in enumerate(records):
        rng = np.random.default_rng([seed, idx])
        try:
            img = imgio.read_image(rec.path)
            label = rec.label
            if mask_assets and rec.label == 0:
                if landmarks_dir is None:
                    raise LandmarkError("mask overlay requested but no landmarks directory given")
                lm_path = Path(landmarks_dir) / (Path(rec.path).stem + ".json")
                lm = load_landmarks(lm_path)
                img = overlay_mask(img, lm, mask_assets[idx % len(mask_assets)])
                label = 1
            img = blur_augment(img, pick_blur(rng, blur_cfg))
            name = f"{idx:05d}_{Path(rec.path).stem}.{image_format}"
            imgio.write_image(out_dir / "images" / name, img)
            outputs.append(DatasetRecord(f"images/{name}", label))
        except (OSError, ValueError) as e:
            failures.append((rec.path, str(e)))
    write_manifest(out_dir / "manifest.csv", outputs)
    if failures:
        with open(out_dir / "failures.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "error"])
            writer.writerows(failures)
    return outputs, failures
