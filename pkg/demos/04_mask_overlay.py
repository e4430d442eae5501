#!/usr/bin/env python3
"""Landmark-driven mask superimposition on a cartoon face, upright and
tilted, then the blur pass that roughs it up to surveillance quality.
Writes before/after images to demos/output/.
Run: python3 demos/04_mask_overlay.py
"""
import math
from pathlib import Path

import numpy as np

from crowdsafe import BlurChoice, LandmarkSet, blur_augment, mask_fit, overlay_mask
from crowdsafe.geometry import Point
from crowdsafe import imgio

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)


def cartoon_face(w=160, h=160):
    img = np.full((h, w, 3), (235, 220, 200), dtype=np.uint8)
    yy, xx = np.mgrid[0:h, 0:w]
    head = ((xx - 80) / 55.0) ** 2 + ((yy - 80) / 70.0) ** 2 <= 1.0
    img[head] = (250, 214, 180)
    img[~head] = (60, 60, 70)
    for ex in (58, 102):
        img[(xx - ex) ** 2 + (yy - 62) ** 2 <= 36] = (40, 40, 40)
    return img


def mask_asset(w=48, h=26):
    asset = np.zeros((h, w, 4), dtype=np.uint8)
    asset[:, :] = (90, 160, 220, 255)
    asset[::6, :, :3] = (70, 130, 190)  # pleat lines
    return asset


def rotated(lm: LandmarkSet, theta_deg: float, cx=80.0, cy=80.0) -> LandmarkSet:
    c, s = math.cos(math.radians(theta_deg)), math.sin(math.radians(theta_deg))

    def rot(p):
        return Point(cx + (p.x - cx) * c - (p.y - cy) * s,
                     cy + (p.x - cx) * s + (p.y - cy) * c)

    return LandmarkSet(rot(lm.nose_bridge), rot(lm.chin_left),
                       rot(lm.chin_bottom), rot(lm.chin_right))


upright = LandmarkSet(nose_bridge=Point(80, 88), chin_left=Point(42, 118),
                      chin_bottom=Point(80, 146), chin_right=Point(118, 118))
face = cartoon_face()
asset = mask_asset()
imgio.write_image(out_dir / "face_unmasked.png", face)

for label, lm in (("upright", upright), ("tilted", rotated(upright, 25.0))):
    placement = mask_fit(lm)
    print(f"{label}: mask rotation {placement.rotation_deg:+.1f} deg")
    masked = overlay_mask(face, lm, asset)
    imgio.write_image(out_dir / f"face_masked_{label}.png", masked)
    roughed = blur_augment(masked, BlurChoice("gaussian", 7))
    imgio.write_image(out_dir / f"face_masked_{label}_blurred.png", roughed)
    print(f"  wrote face_masked_{label}.png and its blurred version")
