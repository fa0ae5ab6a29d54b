"""Class-agnostic instance segmentation average precision."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

IOU_THRESHOLDS = tuple(np.round(np.arange(0.5, 0.951, 0.05), 2).tolist())


@dataclass(frozen=True)
class InstancePrediction:
    indices: np.ndarray
    confidence: float = 1.0

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.int64))
        if idx.size == 0:
            raise ValueError("a prediction needs at least one point")
        object.__setattr__(self, "indices", idx)


@dataclass
class APReport:
    ap: float
    ap50: float
    ap25: float
    per_threshold: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    skipped: bool = False

    def as_dict(self) -> dict:
        return {
            "ap": self.ap, "ap50": self.ap50, "ap25": self.ap25,
            "per_threshold": {f"{k:.2f}": v for k, v in self.per_threshold.items()},
            "skipped": self.skipped,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def table(self) -> str:
        return f"{'AP':>6} {'AP50':>6} {'AP25':>6}\n{100 * self.ap:6.1f} {100 * self.ap50:6.1f} {100 * self.ap25:6.1f}"


def mask_iou(a, b) -> float:
    a, b = set(np.asarray(a).tolist()), set(np.asarray(b).tolist())
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def iou_matrix(predictions: Sequence[InstancePrediction], ground_truth: Sequence) -> np.ndarray:
    if not predictions or not ground_truth:
        return np.zeros((len(predictions), len(ground_truth)))
    rows = np.concatenate([np.full(len(p.indices), k) for k, p in enumerate(predictions)])
    cols_p = np.concatenate([p.indices for p in predictions])
    gt = [np.unique(np.asarray(g, dtype=np.int64)) for g in ground_truth]
    n = int(max(cols_p.max(), max((g.max() for g in gt if g.size), default=0))) + 1
    pm = sparse.csr_matrix((np.ones(len(rows)), (rows, cols_p)), shape=(len(predictions), n))
    g_rows = np.concatenate([np.full(len(g), k) for k, g in enumerate(gt)])
    gm = sparse.csr_matrix((np.ones(len(g_rows)), (g_rows, np.concatenate(gt))), shape=(len(gt), n))
    inter = (pm @ gm.T).toarray()
    p_size = np.array([len(p.indices) for p in predictions], dtype=np.float64)
    g_size = np.array([len(g) for g in gt], dtype=np.float64)
    union = p_size[:, None] + g_size[None, :] - inter
    return np.where(union > 0, inter / np.where(union > 0, union, 1), 0.0)


def match_greedy(ious: np.ndarray, order: np.ndarray, threshold: float) -> np.ndarray:
    """TP flags in ranked order: each prediction takes the free GT of highest IoU >= threshold."""
    taken = np.zeros(ious.shape[1], dtype=bool)
    tp = np.zeros(len(order), dtype=bool)
    for rank, p in enumerate(order):
        cand = np.where(~taken & (ious[p] >= threshold), ious[p], -1.0)
        if cand.size and cand.max() >= 0:
            g = int(np.argmax(cand))
            taken[g] = True
            tp[rank] = True
    return tp


def ap_from_ranked(tp: np.ndarray, num_gt: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Area under the precision envelope, stepping at each recall increase."""
    if tp.size == 0:
        return 0.0, np.zeros(0), np.zeros(0)
    ctp = np.cumsum(tp)
    precision = ctp / np.arange(1, len(tp) + 1)
    recall = ctp / num_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * envelope)), precision, recall


def average_precision(predictions: Sequence[InstancePrediction], ground_truth: Sequence,
                      iou_thresholds: Sequence[float] = IOU_THRESHOLDS) -> APReport:
    """AP averaged over ``iou_thresholds`` plus AP50 and AP25.

    Predictions are ranked by descending confidence (stable for ties).
    """
    if len(ground_truth) == 0:
        nan = float("nan")
        return APReport(nan, nan, nan, skipped=True)
    ious = iou_matrix(predictions, ground_truth)
    conf = np.array([p.confidence for p in predictions], dtype=np.float64)
    order = np.argsort(-conf, kind="stable")
    thresholds = sorted(set(float(t) for t in iou_thresholds) | {0.5, 0.25})
    per, curves = {}, {}
    for t in thresholds:
        tp = match_greedy(ious, order, t)
        per[t], prec, rec = ap_from_ranked(tp, len(ground_truth))
        curves[t] = (prec, rec)
    vals = np.array([per[float(t)] for t in iou_thresholds])
    ap = float(np.clip(vals.mean(), vals.min(), vals.max()))   # mean of equal values can drift an ulp
    return APReport(ap, per[0.5], per[0.25], per, curves)


def instances_from_labels(ids: np.ndarray, valid: Optional[np.ndarray] = None) -> dict:
    """Map each non-zero id to its point indices, restricted to ``valid`` points."""
    ids = np.asarray(ids, dtype=np.int64)
    idx = np.arange(len(ids))
    if valid is not None:
        idx = idx[valid]
    lab = ids[idx]
    idx, lab = idx[lab > 0], lab[lab > 0]
    order = np.argsort(lab, kind="stable")
    lab, idx = lab[order], idx[order]
    keys, starts = np.unique(lab, return_index=True)
    return {int(k): part for k, part in zip(keys, np.split(idx, starts[1:]))}


def evaluate_labels(pred_ids, gt_ids, confidences: Optional[dict] = None,
                    iou_thresholds: Sequence[float] = IOU_THRESHOLDS) -> APReport:
    """AP from per-point instance ids; GT id 0 points are ignored on both sides."""
    pred_ids, gt_ids = np.asarray(pred_ids), np.asarray(gt_ids)
    if pred_ids.shape != gt_ids.shape:
        raise ValueError("prediction and ground truth must label the same points")
    valid = gt_ids > 0
    gt = list(instances_from_labels(gt_ids, valid).values())
    preds = [
        InstancePrediction(pts, 1.0 if confidences is None else confidences.get(k, 1.0))
        for k, pts in instances_from_labels(pred_ids, valid).items()
    ]
    return average_precision(preds, gt, iou_thresholds)
