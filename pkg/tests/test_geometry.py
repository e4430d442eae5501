import numpy as np
import pytest

from crowdsafe.geometry import (
    PERSON,
    BoundingBox,
    Detection,
    NmsParams,
    Point,
    centroid,
    iou,
    non_max_suppression,
)


# -- independent reference implementations -----------------------------------

def ref_iou(a, b):
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def ref_nms(dets, conf_t, iou_t):
    """O(n^2) greedy reference: filter, sort stably, suppress strictly-above-threshold overlaps."""
    idx = [i for i, d in enumerate(dets) if d.confidence >= conf_t]
    idx.sort(key=lambda i: -dets[i].confidence)
    kept = []
    for i in idx:
        a = (dets[i].box.x, dets[i].box.y, dets[i].box.w, dets[i].box.h)
        suppressed = False
        for k in kept:
            b = (dets[k].box.x, dets[k].box.y, dets[k].box.w, dets[k].box.h)
            if ref_iou(a, b) > iou_t:
                suppressed = True
                break
        if not suppressed:
            kept.append(i)
    return [dets[i] for i in kept]


def random_detections(rng, n):
    dets = []
    for _ in range(n):
        box = BoundingBox(float(rng.uniform(0, 100)), float(rng.uniform(0, 100)),
                          float(rng.uniform(0, 30)), float(rng.uniform(0, 30)))
        # two-decimal confidences force plenty of ties
        dets.append(Detection(box, round(float(rng.uniform(0, 1)), 2), PERSON))
    return dets


# -- types --------------------------------------------------------------------

def test_bounding_box_rejects_negative_size():
    with pytest.raises(ValueError):
        BoundingBox(0, 0, -1, 5)
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 5, float("nan"))


def test_detection_rejects_bad_confidence():
    with pytest.raises(ValueError):
        Detection(BoundingBox(0, 0, 1, 1), 1.5)


def test_nms_params_validate():
    with pytest.raises(ValueError):
        NmsParams(confidence_threshold=-0.1)
    assert NmsParams() == NmsParams(0.5, 0.3)


# -- centroid -------------------------------------------------------------------

def test_centroid_square_at_origin():
    assert centroid(BoundingBox(0, 0, 10, 10)) == Point(5, 5)


def test_centroid_direct_arithmetic():
    assert centroid(BoundingBox(2, 3, 4, 6)) == Point(4, 6)


def test_centroid_degenerate_box():
    assert centroid(BoundingBox(7, 7, 0, 0)) == Point(7, 7)


# -- iou ------------------------------------------------------------------------

def test_iou_identical_boxes():
    a = BoundingBox(0, 0, 10, 10)
    assert iou(a, a) == 1.0


def test_iou_disjoint():
    assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(20, 20, 5, 5)) == 0.0


def test_iou_one_third_overlap():
    # intersection 50, union 150
    value = iou(BoundingBox(0, 0, 10, 10), BoundingBox(5, 0, 10, 10))
    assert value == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_iou_zero_union():
    assert iou(BoundingBox(1, 1, 0, 0), BoundingBox(1, 1, 0, 0)) == 0.0


def test_iou_symmetry_and_range():
    rng = np.random.default_rng(7)
    for _ in range(500):
        a = BoundingBox(*(float(v) for v in rng.uniform(0, 50, 2)),
                        *(float(v) for v in rng.uniform(0, 20, 2)))
        b = BoundingBox(*(float(v) for v in rng.uniform(0, 50, 2)),
                        *(float(v) for v in rng.uniform(0, 20, 2)))
        ab, ba = iou(a, b), iou(b, a)
        assert ab == ba
        assert 0.0 <= ab <= 1.0
        if a.area > 0:
            assert iou(a, a) == 1.0


def test_iou_shift_invariance():
    rng = np.random.default_rng(11)
    for _ in range(200):
        a = BoundingBox(*(float(v) for v in rng.uniform(0, 50, 2)), 10.0, 12.0)
        b = BoundingBox(*(float(v) for v in rng.uniform(0, 50, 2)), 8.0, 9.0)
        dx, dy = float(rng.uniform(-100, 100)), float(rng.uniform(-100, 100))
        assert iou(a.shifted(dx, dy), b.shifted(dx, dy)) == pytest.approx(iou(a, b), abs=1e-9)


# -- non_max_suppression ----------------------------------------------------------

def test_nms_empty():
    assert non_max_suppression([]) == []


def test_nms_singleton_above_threshold():
    d = Detection(BoundingBox(0, 0, 10, 10), 0.9)
    assert non_max_suppression([d]) == [d]


def test_nms_suppresses_overlap_above_threshold():
    a = Detection(BoundingBox(0, 0, 10, 10), 0.9)
    b = Detection(BoundingBox(5, 0, 10, 10), 0.8)  # IoU 1/3 > 0.3
    assert non_max_suppression([a, b], NmsParams(0.5, 0.3)) == [a]


def test_nms_confidence_filter():
    a = Detection(BoundingBox(0, 0, 10, 10), 0.4)
    b = Detection(BoundingBox(50, 50, 10, 10), 0.9)
    out = non_max_suppression([a, b], NmsParams(0.5, 0.3))
    assert a not in out and out == [b]


def test_nms_keeps_exact_threshold_confidence():
    d = Detection(BoundingBox(0, 0, 10, 10), 0.5)
    assert non_max_suppression([d], NmsParams(0.5, 0.3)) == [d]


def test_nms_keeps_overlap_at_exact_threshold():
    # IoU exactly 1/3 with threshold 1/3 is not "more than", so both stay
    a = Detection(BoundingBox(0, 0, 10, 10), 0.9)
    b = Detection(BoundingBox(5, 0, 10, 10), 0.8)
    out = non_max_suppression([a, b], NmsParams(0.5, 1.0 / 3.0))
    assert out == [a, b]


def test_nms_tie_break_by_input_order():
    a = Detection(BoundingBox(0, 0, 10, 10), 0.8)
    b = Detection(BoundingBox(1, 0, 10, 10), 0.8)  # heavy overlap, equal confidence
    assert non_max_suppression([a, b]) == [a]
    assert non_max_suppression([b, a]) == [b]


def test_nms_rejects_mixed_categories():
    a = Detection(BoundingBox(0, 0, 10, 10), 0.9, "person")
    b = Detection(BoundingBox(0, 0, 10, 10), 0.9, "face")
    with pytest.raises(ValueError):
        non_max_suppression([a, b])


def test_nms_output_sorted_and_subset():
    rng = np.random.default_rng(3)
    for _ in range(100):
        dets = random_detections(rng, int(rng.integers(0, 40)))
        out = non_max_suppression(dets)
        assert all(d in dets for d in out)
        confs = [d.confidence for d in out]
        assert confs == sorted(confs, reverse=True)
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                # greedy keep-set rule: later keeps never exceed threshold vs earlier keeps
                assert iou(out[j].box, out[i].box) <= 0.3


def test_nms_matches_reference_on_random_inputs():
    rng = np.random.default_rng(42)
    for _ in range(150):
        dets = random_detections(rng, int(rng.integers(0, 100)))
        params = NmsParams(0.5, 0.3)
        assert non_max_suppression(dets, params) == ref_nms(dets, 0.5, 0.3)


def test_nms_shift_leaves_keep_set_unchanged():
    rng = np.random.default_rng(5)
    for _ in range(50):
        dets = random_detections(rng, 30)
        kept = [dets.index(d) for d in non_max_suppression(dets)]
        shifted = [Detection(d.box.shifted(37.5, -12.25), d.confidence, d.category)
                   for d in dets]
        kept_shifted = [shifted.index(d) for d in non_max_suppression(shifted)]
        assert kept == kept_shifted
