import math

import numpy as np
import pytest

from crowdsafe.geometry import BoundingBox
from crowdsafe.imaging import (
    AVERAGE_SIZES,
    GAUSSIAN_SIZES,
    MOTION_DIRECTIONS,
    MOTION_SIZES,
    BlurChoice,
    CropOutsideImage,
    average_kernel,
    convolve2d,
    crop,
    gaussian_kernel,
    motion_kernel,
    new_image,
    resize_bilinear,
    validate_image,
)


# -- independent reference implementations -----------------------------------

def ref_gaussian(k):
    sigma = 0.3 * ((k - 1) * 0.5 - 1.0) + 0.8
    center = (k - 1) / 2.0
    out = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            di, dj = i - center, j - center
            out[i, j] = math.exp(-(di * di + dj * dj) / (2.0 * sigma * sigma))
    return out / out.sum()


def ref_convolve(img, kernel):
    """Nested-loop correlation with replicate padding; same rounding rule."""
    k = kernel.shape[0]
    anchor = (k - 1) // 2
    h, w, c = img.shape
    out = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            for ch in range(c):
                s = 0.0
                for i in range(k):
                    for j in range(k):
                        yy = min(max(y + i - anchor, 0), h - 1)
                        xx = min(max(x + j - anchor, 0), w - 1)
                        s += kernel[i, j] * float(img[yy, xx, ch])
                out[y, x, ch] = min(max(int(math.floor(s + 0.5)), 0), 255)
    return out


def random_image(rng, max_side=16, channels=None):
    h = int(rng.integers(1, max_side + 1))
    w = int(rng.integers(1, max_side + 1))
    c = channels if channels is not None else int(rng.choice([1, 3, 4]))
    return rng.integers(0, 256, size=(h, w, c), dtype=np.uint8)


# -- kernels -------------------------------------------------------------------

def test_gaussian_k1_degenerate():
    assert gaussian_kernel(1).tolist() == [[1.0]]


def test_gaussian_k3_center_heaviest_and_normalized():
    k = gaussian_kernel(3)
    assert abs(k.sum() - 1.0) <= 1e-9
    center = k[1, 1]
    others = [k[i, j] for i in range(3) for j in range(3) if (i, j) != (1, 1)]
    assert all(center > o for o in others)


def test_gaussian_k6_matches_direct_formula():
    assert np.allclose(gaussian_kernel(6), ref_gaussian(6), rtol=0, atol=1e-15)
    assert gaussian_kernel(6).shape == (6, 6)


@pytest.mark.parametrize("k", range(1, 12))
def test_gaussian_flip_invariance(k):
    g = gaussian_kernel(k)
    assert np.array_equal(g, g[::-1, :])
    assert np.array_equal(g, g[:, ::-1])


def test_average_kernel_values():
    assert average_kernel(1).tolist() == [[1.0]]
    assert np.allclose(average_kernel(3), np.full((3, 3), 1 / 9), rtol=0, atol=0)
    k9 = average_kernel(9)
    assert k9.shape == (9, 9) and np.all(k9 == 1.0 / 81.0)


def test_motion_kernel_horizontal_k3():
    expected = [[0, 0, 0], [1 / 3, 1 / 3, 1 / 3], [0, 0, 0]]
    assert motion_kernel(3, "horizontal").tolist() == expected


def test_motion_kernel_main_diagonal_k3():
    k = motion_kernel(3, "main_diagonal")
    nz = list(zip(*np.nonzero(k)))
    assert nz == [(0, 0), (1, 1), (2, 2)]
    assert np.allclose(k[np.nonzero(k)], 1 / 3)


def test_motion_kernel_k1_any_direction():
    for d in MOTION_DIRECTIONS:
        assert motion_kernel(1, d).tolist() == [[1.0]]


@pytest.mark.parametrize("direction", MOTION_DIRECTIONS)
@pytest.mark.parametrize("k", range(1, 11))
def test_motion_kernel_structure(k, direction):
    kern = motion_kernel(k, direction)
    assert np.count_nonzero(kern) == k
    assert abs(kern.sum() - 1.0) <= 1e-9


def test_all_kernels_normalized_and_non_negative():
    kernels = [gaussian_kernel(k) for k in range(GAUSSIAN_SIZES[0], GAUSSIAN_SIZES[1] + 1)]
    kernels += [average_kernel(k) for k in range(AVERAGE_SIZES[0], AVERAGE_SIZES[1] + 1)]
    kernels += [motion_kernel(k, d) for k in range(MOTION_SIZES[0], MOTION_SIZES[1] + 1)
                for d in MOTION_DIRECTIONS]
    for kern in kernels:
        assert abs(kern.sum() - 1.0) <= 1e-9
        assert np.all(kern >= 0)


def test_kernel_size_validation():
    for fn in (gaussian_kernel, average_kernel):
        with pytest.raises(ValueError):
            fn(0)
    with pytest.raises(ValueError):
        motion_kernel(3, "sideways")


# -- convolve2d -----------------------------------------------------------------

def test_convolve_constant_image_unchanged():
    img = new_image(7, 5, 3, fill=120)
    for kern in (gaussian_kernel(6), average_kernel(5), motion_kernel(4, "vertical")):
        assert np.array_equal(convolve2d(img, kern), img)


def test_convolve_identity_kernel():
    rng = np.random.default_rng(0)
    img = random_image(rng)
    assert np.array_equal(convolve2d(img, np.array([[1.0]])), img)


def test_convolve_average_center_is_mean():
    img = np.arange(9, dtype=np.uint8).reshape(3, 3, 1)
    out = convolve2d(img, average_kernel(3))
    assert out[1, 1, 0] == 4  # round(mean(0..8))
    assert np.array_equal(out, ref_convolve(img, average_kernel(3)))


def test_convolve_matches_reference_bit_exactly():
    rng = np.random.default_rng(123)
    kernels = [gaussian_kernel(6), gaussian_kernel(7), average_kernel(3),
               average_kernel(4), motion_kernel(5, "anti_diagonal"),
               motion_kernel(3, "horizontal")]
    for kern in kernels:
        for channels in (1, 3, 4):
            img = random_image(rng, max_side=12, channels=channels)
            assert np.array_equal(convolve2d(img, kern), ref_convolve(img, kern))


def test_convolve_stays_within_sample_range():
    rng = np.random.default_rng(9)
    for _ in range(20):
        img = random_image(rng, max_side=10)
        kern = gaussian_kernel(int(rng.integers(1, 9)))
        out = convolve2d(img, kern)
        assert out.min() >= img.min()
        assert out.max() <= img.max()


def test_convolve_rejects_non_square_kernel():
    with pytest.raises(ValueError):
        convolve2d(new_image(4, 4), np.ones((2, 3)))


# -- resize ----------------------------------------------------------------------

def test_resize_identity():
    rng = np.random.default_rng(1)
    img = random_image(rng, max_side=9)
    out = resize_bilinear(img, img.shape[1], img.shape[0])
    assert np.array_equal(out, img)
    assert out is not img


def test_resize_2x2_to_center_sample():
    img = np.array([[10, 20], [30, 40]], dtype=np.uint8)[:, :, None]
    assert resize_bilinear(img, 1, 1).tolist() == [[[25]]]


def test_resize_to_detector_input_dims():
    img = new_image(100, 80, 3, fill=9)
    out = resize_bilinear(img, 416, 416)
    assert out.shape == (416, 416, 3)


def test_resize_validates_output_size():
    with pytest.raises(ValueError):
        resize_bilinear(new_image(4, 4), 0, 4)


def test_resize_preserves_constant_images():
    img = new_image(13, 7, 4, fill=201)
    assert np.all(resize_bilinear(img, 31, 17) == 201)


# -- crop ------------------------------------------------------------------------

def test_crop_full_image():
    rng = np.random.default_rng(2)
    img = random_image(rng, max_side=8)
    h, w, _ = img.shape
    assert np.array_equal(crop(img, BoundingBox(0, 0, w, h)), img)


def test_crop_top_left_block():
    img = np.arange(16, dtype=np.uint8).reshape(4, 4, 1)
    assert np.array_equal(crop(img, BoundingBox(0, 0, 2, 2)), img[:2, :2])


def test_crop_clipped_to_bounds():
    img = np.arange(25, dtype=np.uint8).reshape(5, 5, 1)
    out = crop(img, BoundingBox(3, 3, 4, 4))
    assert np.array_equal(out, img[3:5, 3:5])


def test_crop_rounds_outward():
    img = np.arange(25, dtype=np.uint8).reshape(5, 5, 1)
    out = crop(img, BoundingBox(1.4, 1.6, 1.2, 0.5))
    assert np.array_equal(out, img[1:3, 1:3])


def test_crop_outside_raises():
    img = new_image(4, 4)
    with pytest.raises(CropOutsideImage):
        crop(img, BoundingBox(10, 10, 3, 3))


# -- buffer validation ------------------------------------------------------------

def test_validate_image_rejects_bad_buffers():
    with pytest.raises(ValueError):
        validate_image(np.zeros((4, 4, 2), dtype=np.uint8))
    with pytest.raises(ValueError):
        validate_image(np.zeros((4, 4, 3), dtype=np.float32))


def test_blur_choice_validation():
    with pytest.raises(ValueError):
        BlurChoice("sharpen")
    with pytest.raises(ValueError):
        BlurChoice("motion", 3, "sideways")
    assert BlurChoice("none").kernel_size == 0
