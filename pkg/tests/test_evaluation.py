import math

import numpy as np
import pytest
from hypothesis import example, given, strategies as st

from superseg3d.evaluation import (
    IOU_THRESHOLDS, InstancePrediction, average_precision, evaluate_labels, iou_matrix, mask_iou,
)
from oracles import exhaustive_ap


def test_iou_thresholds():
    assert IOU_THRESHOLDS == (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95)


@pytest.mark.parametrize("a, b, expected", [
    (range(10), range(10), 1.0),
    (range(10), range(10, 20), 0.0),
    (range(100), range(50, 150), 1 / 3),
    ([], [], 0.0),
])
def test_mask_iou(a, b, expected):
    assert mask_iou(np.array(list(a)), np.array(list(b))) == pytest.approx(expected)


def test_iou_matrix_matches_pairwise(rng):
    preds = [InstancePrediction(np.unique(rng.integers(0, 60, 20)), 1.0) for _ in range(4)]
    gts = [np.arange(k * 15, k * 15 + 15) for k in range(4)]
    m = iou_matrix(preds, gts)
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            assert m[i, j] == pytest.approx(mask_iou(p.indices, g), abs=1e-15)


def test_perfect_predictions():
    gts = [np.arange(0, 10), np.arange(10, 30), np.arange(30, 31)]
    rep = average_precision([InstancePrediction(g, c) for g, c in zip(gts, (0.1, 0.9, 0.5))], gts)
    assert rep.ap == rep.ap50 == rep.ap25 == 1.0


def test_zero_predictions():
    rep = average_precision([], [np.arange(5)])
    assert rep.ap == rep.ap50 == rep.ap25 == 0.0


def test_empty_ground_truth_is_skipped():
    rep = average_precision([InstancePrediction(np.arange(3), 1.0)], [])
    assert rep.skipped and math.isnan(rep.ap)


def three_by_three():
    """3 GT of 10 points; predictions with IoU 1.0, 0.6 and 0.3 against GT 0, 1, 2."""
    gts = [np.arange(0, 10), np.arange(10, 20), np.arange(20, 30)]
    p0 = gts[0]
    p1 = np.r_[np.arange(10, 18), np.arange(100, 103)]  # 8 / 13 ~ 0.615
    p2 = np.r_[np.arange(20, 25), np.arange(200, 207)]  # 5 / 17 ~ 0.294
    preds = [InstancePrediction(p0, 0.9), InstancePrediction(p1, 0.8), InstancePrediction(p2, 0.7)]
    return preds, gts


def test_hand_computed_ap50():
    preds, gts = three_by_three()
    rep = average_precision(preds, gts)
    # TP, TP, FP at 0.5: precision 1 up to recall 2/3
    assert rep.ap50 == pytest.approx(2 / 3, abs=1e-12)
    assert rep.ap25 == pytest.approx(1.0, abs=1e-12)
    ious = iou_matrix(preds, gts)
    assert rep.ap50 == pytest.approx(exhaustive_ap(ious, [0.9, 0.8, 0.7], 0.5), abs=1e-12)


def random_case(rng, n_gt, n_pred):
    sizes = rng.integers(3, 12, n_gt)
    bounds = np.r_[0, np.cumsum(sizes)]
    gts = [np.arange(bounds[k], bounds[k + 1]) for k in range(n_gt)]
    total = bounds[-1] + 10
    preds = []
    for _ in range(n_pred):
        g = gts[rng.integers(n_gt)]
        keep = g[rng.random(len(g)) < rng.uniform(0.3, 1.0)]
        extra = rng.integers(0, total, rng.integers(0, 5))
        pts = np.unique(np.r_[keep, extra]).astype(int)
        if len(pts) == 0:
            pts = g[:1]
        preds.append(InstancePrediction(pts, float(rng.random())))
    return preds, gts


@pytest.mark.parametrize("seed", range(30))
def test_matches_exhaustive_assignment(seed):
    rng = np.random.default_rng(seed)
    preds, gts = random_case(rng, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
    rep = average_precision(preds, gts)
    ious = iou_matrix(preds, gts)
    conf = [p.confidence for p in preds]
    for t in IOU_THRESHOLDS:
        assert rep.per_threshold[t] == pytest.approx(exhaustive_ap(ious, conf, t), abs=1e-12)


@given(st.integers(0, 2**31))
@example(seed=42300)   # ten equal per-threshold values whose mean rounded up
def test_ap_ordering(seed):
    rng = np.random.default_rng(seed)
    preds, gts = random_case(rng, int(rng.integers(1, 6)), int(rng.integers(0, 8)))
    rep = average_precision(preds, gts)
    assert 0.0 <= rep.ap <= rep.ap50 <= rep.ap25 <= 1.0


@given(st.integers(0, 2**31), st.floats(0.01, 100))
def test_confidence_rescaling_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    preds, gts = random_case(rng, 3, 5)
    scaled = [InstancePrediction(p.indices, p.confidence * scale) for p in preds]
    assert average_precision(preds, gts).per_threshold == average_precision(scaled, gts).per_threshold


@given(st.integers(0, 2**31))
def test_lower_confidence_duplicate_never_helps(seed):
    rng = np.random.default_rng(seed)
    preds, gts = random_case(rng, 3, 4)
    base = average_precision(preds, gts)
    k = int(rng.integers(len(preds)))
    low = min(p.confidence for p in preds) * 0.5
    dup = preds + [InstancePrediction(preds[k].indices, low)]
    assert average_precision(dup, gts).ap <= base.ap + 1e-12


def test_evaluate_labels_ignores_unannotated_points():
    gt = np.array([1, 1, 1, 2, 2, 0, 0, 0])
    pred = np.array([5, 5, 5, 7, 7, 7, 7, 7])
    # 7 would have IoU 2/5 with instance 2 if the id-0 points counted
    assert evaluate_labels(pred, gt).ap == 1.0


def test_evaluate_labels_shape_check():
    with pytest.raises(ValueError):
        evaluate_labels(np.zeros(3), np.zeros(4))


def test_report_serialisation():
    preds, gts = three_by_three()
    rep = average_precision(preds, gts)
    d = rep.as_dict()
    assert set(d) >= {"ap", "ap50", "ap25", "per_threshold"}
    assert "AP50" in rep.table()
