"""8-bit image buffers, bilinear resize, crop, and the blur kernel family.

An image is a numpy uint8 array of shape (height, width, channels) with
1, 3 or 4 channels, row-major and channel-interleaved.  Operations return
new arrays and never modify their inputs.

Quantization rule used everywhere: round to nearest with halves up
(floor(x + 0.5); all sample domains here are non-negative), then clamp to
[0, 255].  Test oracles rely on this exact rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import BoundingBox

# Inclusive kernel-size ranges for each blur style.
GAUSSIAN_SIZES = (6, 10)
AVERAGE_SIZES = (3, 9)
MOTION_SIZES = (3, 10)
MOTION_DIRECTIONS = ("vertical", "horizontal", "main_diagonal", "anti_diagonal")
BLUR_KINDS = ("none", "gaussian", "average", "motion")


class CropOutsideImage(ValueError):
    """The requested crop box lies fully outside the image."""


@dataclass(frozen=True)
class BlurChoice:
    kind: str                           # one of BLUR_KINDS
    kernel_size: int = 0                # 0 for kind "none"
    motion_direction: str = "horizontal"

    def __post_init__(self) -> None:
        if self.kind not in BLUR_KINDS:
            raise ValueError(f"unknown blur kind {self.kind!r}")
        if self.kind == "motion" and self.motion_direction not in MOTION_DIRECTIONS:
            raise ValueError(f"unknown motion direction {self.motion_direction!r}")


def validate_image(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise ValueError(f"image samples must be uint8, got {arr.dtype}")
    if arr.ndim != 3 or arr.shape[2] not in (1, 3, 4):
        raise ValueError(f"image must have shape (h, w, c) with c in 1/3/4, got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image must be at least 1x1, got {arr.shape}")
    return arr


def new_image(width: int, height: int, channels: int = 3, fill: int = 0) -> np.ndarray:
    return np.full((height, width, channels), fill, dtype=np.uint8)


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Round to nearest (halves up) and clamp into the uint8 range."""
    return np.clip(np.floor(values + 0.5), 0.0, 255.0).astype(np.uint8)


def resize_bilinear(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize with edge clamping.

    Source coordinates map as s = (d + 0.5) * (in / out) - 0.5, so resizing
    an image to its own dimensions is the identity.
    """
    img = validate_image(img)
    if out_w < 1 or out_h < 1:
        raise ValueError(f"output size must be at least 1x1, got {out_w}x{out_h}")
    h, w, _ = img.shape
    if (out_w, out_h) == (w, h):
        return img.copy()
    sx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    sy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[None, :, None]
    fy = (sy - y0)[:, None, None]
    data = img.astype(np.float64)
    top = data[y0][:, x0] * (1.0 - fx) + data[y0][:, x1] * fx
    bottom = data[y1][:, x0] * (1.0 - fx) + data[y1][:, x1] * fx
    return quantize_u8(top * (1.0 - fy) + bottom * fy)


def gaussian_kernel(k: int) -> np.ndarray:
    """k x k gaussian weights, normalized to sum 1.

    sigma follows the conventional size mapping 0.3*((k-1)*0.5 - 1) + 0.8.
    The center is the real-valued (k-1)/2, so even sizes stay symmetric.
    """
    if k < 1:
        raise ValueError(f"kernel size must be >= 1, got {k}")
    sigma = 0.3 * ((k - 1) * 0.5 - 1.0) + 0.8
    d = np.arange(k, dtype=np.float64) - (k - 1) / 2.0
    g = np.exp(-(d[:, None] ** 2 + d[None, :] ** 2) / (2.0 * sigma * sigma))
    return g / g.sum()


def average_kernel(k: int) -> np.ndarray:
    """k x k box filter: every weight is 1/k^2."""
    if k < 1:
        raise ValueError(f"kernel size must be >= 1, got {k}")
    return np.full((k, k), 1.0 / (k * k), dtype=np.float64)


def motion_kernel(k: int, direction: str) -> np.ndarray:
    """Line of k weights of 1/k along one of the four streak directions."""
    if k < 1:
        raise ValueError(f"kernel size must be >= 1, got {k}")
    kern = np.zeros((k, k), dtype=np.float64)
    mid = (k - 1) // 2
    idx = np.arange(k)
    if direction == "horizontal":
        kern[mid, :] = 1.0
    elif direction == "vertical":
        kern[:, mid] = 1.0
    elif direction == "main_diagonal":
        kern[idx, idx] = 1.0
    elif direction == "anti_diagonal":
        kern[idx, k - 1 - idx] = 1.0
    else:
        raise ValueError(f"unknown motion direction {direction!r}")
    return kern / k


def convolve2d(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Per-channel correlation with replicate-edge padding.

    The kernel anchor sits at floor((k-1)/2).  Accumulation runs in fixed
    (row, column) kernel order in float64, so results are bit-identical to
    a nested-loop evaluation of the same sum.
    """
    img = validate_image(img)
    kern = np.asarray(kernel, dtype=np.float64)
    if kern.ndim != 2 or kern.shape[0] != kern.shape[1] or kern.shape[0] < 1:
        raise ValueError(f"kernel must be square and non-empty, got shape {kern.shape}")
    k = kern.shape[0]
    anchor = (k - 1) // 2
    h, w, c = img.shape
    padded = np.pad(
        img.astype(np.float64),
        ((anchor, k - 1 - anchor), (anchor, k - 1 - anchor), (0, 0)),
        mode="edge",
    )
    acc = np.zeros((h, w, c), dtype=np.float64)
    for i in range(k):
        for j in range(k):
            wij = kern[i, j]
            if wij == 0.0:
                continue  # adding an exact +0.0 never changes the sum
            acc += wij * padded[i:i + h, j:j + w, :]
    return quantize_u8(acc)


def crop(img: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Subimage of the box intersected with the image, rounded outward.

    Raises CropOutsideImage when the box misses the image entirely.
    """
    img = validate_image(img)
    h, w, _ = img.shape
    x0 = int(math.floor(max(box.x, 0.0)))
    y0 = int(math.floor(max(box.y, 0.0)))
    x1 = int(math.ceil(min(box.x + box.w, float(w))))
    y1 = int(math.ceil(min(box.y + box.h, float(h))))
    if x1 <= x0 or y1 <= y0:
        raise CropOutsideImage(f"box {box} does not intersect a {w}x{h} image")
    return img[y0:y1, x0:x1].copy()
