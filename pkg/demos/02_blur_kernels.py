#!/usr/bin/env python3
"""The three blur families on a test card, plus the seeded random picker.

Writes one image per blur style to demos/output/.
Run: python3 demos/02_blur_kernels.py
"""
from pathlib import Path

import numpy as np

from crowdsafe import BlurChoice, blur_augment, pick_blur
from crowdsafe.augmentation import BlurConfig
from crowdsafe.imaging import average_kernel, gaussian_kernel, motion_kernel
from crowdsafe import imgio

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

# a checkerboard with a bright diagonal makes streaking obvious
card = np.zeros((128, 128, 3), dtype=np.uint8)
yy, xx = np.mgrid[0:128, 0:128]
card[(yy // 16 + xx // 16) % 2 == 0] = (70, 110, 160)
card[np.abs(yy - xx) < 4] = (250, 240, 90)
imgio.write_image(out_dir / "card_original.png", card)

for choice in (BlurChoice("gaussian", 9),
               BlurChoice("average", 7),
               BlurChoice("motion", 9, "main_diagonal")):
    blurred = blur_augment(card, choice)
    name = f"card_{choice.kind}.png"
    imgio.write_image(out_dir / name, blurred)
    print(f"wrote {name}")

print("\nkernel mass check (all sum to 1):")
print(f"  gaussian(9) sum = {gaussian_kernel(9).sum():.12f}")
print(f"  average(7)  sum = {average_kernel(7).sum():.12f}")
print(f"  motion(9)   sum = {motion_kernel(9, 'vertical').sum():.12f}")

rng = np.random.default_rng(42)
print("\nten seeded random picks (reproducible with seed 42):")
for _ in range(10):
    c = pick_blur(rng, BlurConfig())
    extra = f" {c.motion_direction}" if c.kind == "motion" else ""
    size = f" k={c.kernel_size}" if c.kind != "none" else ""
    print(f"  {c.kind}{size}{extra}")
