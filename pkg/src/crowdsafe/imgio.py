"""PNG / binary PPM file IO used by the CLI layer and dataset tools.

The in-memory contract everywhere else is a uint8 (h, w, c) array; this
module only converts between that and files on disk.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

_MODES = {1: "L", 3: "RGB", 4: "RGBA"}


def read_image(path) -> np.ndarray:
    path = Path(path)
    with Image.open(path) as im:
        if im.mode not in _MODES.values():
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def write_image(path, img: np.ndarray) -> None:
    path = Path(path)
    arr = np.asarray(img, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    channels = arr.shape[2]
    mode = _MODES.get(channels)
    if mode is None:
        raise ValueError(f"cannot encode a {channels}-channel image")
    if path.suffix.lower() in (".ppm", ".pgm") and channels == 4:
        arr = arr[:, :, :3]
        mode = "RGB"
    pil = Image.fromarray(arr[:, :, 0] if mode == "L" else arr, mode=mode)
    path.parent.mkdir(parents=True, exist_ok=True)
    pil.save(path)
