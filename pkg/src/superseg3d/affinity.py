"""Mask-label histograms and the multi-view superpoint affinity matrix.

A pair's affinity in one view is the cosine similarity of the two
superpoints' mask-label histograms. Views are combined by a weighted mean,
weighting each view by the product of the two superpoints' visibilities.
Pairs without any weighted evidence are "no evidence" and stored as NaN.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import sparse

from .geometry import DEFAULT_DEPTH_TOLERANCE, CameraView, PointCloud, Projection, project_points
from .masks2d import MaskImage
from .oversegment import AdjacencyGraph, SuperpointPartition, pairs_within

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelHistogram:
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(k == 0 for k in self.counts):
            raise ValueError("background label 0 is never stored")
        if any(v <= 0 for v in self.counts.values()):
            raise ValueError("histogram counts must be positive")

    @property
    def norm(self) -> float:
        return math.sqrt(sum(float(c) * c for c in self.counts.values()))

    def __bool__(self):
        return bool(self.counts)


def point_labels(projection: Projection, masks: MaskImage) -> np.ndarray:
    """Mask label under each point; 0 for invisible or background points."""
    h, w = masks.labels.shape
    row, col, _ = projection.pixel_index(w, h)
    lab = masks.labels[row, col].astype(np.int64)
    lab[~projection.visible] = 0
    return lab


def compute_histogram(indices, projection: Projection, masks: MaskImage) -> LabelHistogram:
    lab = point_labels(projection, masks)[np.asarray(indices, dtype=np.int64)]
    lab = lab[lab > 0]
    ids, counts = np.unique(lab, return_counts=True)
    return LabelHistogram({int(i): int(c) for i, c in zip(ids, counts)})


def single_view_affinity(h_i: LabelHistogram, h_j: LabelHistogram) -> Optional[float]:
    """Cosine similarity of two histograms, or None when either is empty."""
    if not h_i or not h_j:
        return None
    dot = sum(float(c) * h_j.counts.get(k, 0) for k, c in h_i.counts.items())
    return min(1.0, dot / (h_i.norm * h_j.norm))


def aggregate_affinity(per_view: Iterable[tuple]) -> tuple[Optional[float], float]:
    """Combine ``(affinity, v_i, v_j)`` triples from several views.

    ``affinity`` may be None (the view gave no evidence), which zeroes that
    view's weight. Returns ``(A, weight_total)`` with ``A`` None when the
    total weight is zero.
    """
    num = den = 0.0
    for value, v_i, v_j in per_view:
        if value is None:
            continue
        w = float(v_i) * float(v_j)
        num += w * value
        den += w
    if den <= 0.0:
        return None, 0.0
    return num / den, den


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    """Sparse symmetric affinities over unordered pairs (i < j).

    ``affinity`` holds finalized values (NaN = no evidence) and
    ``weight_total`` the summed view weights; the weighted sum is their
    product. Each unordered pair is stored once.
    """

    num_nodes: int
    pairs: np.ndarray
    affinity: np.ndarray
    weight_total: np.ndarray
    distance: Optional[np.ndarray] = None

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        if len(pairs) and np.any(pairs[:, 0] >= pairs[:, 1]):
            raise ValueError("pairs must satisfy i < j")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "affinity", np.asarray(self.affinity, dtype=np.float64))
        object.__setattr__(self, "weight_total", np.asarray(self.weight_total, dtype=np.float64))
        object.__setattr__(self, "_index", None)

    @property
    def has_evidence(self) -> np.ndarray:
        return ~np.isnan(self.affinity)

    @property
    def weighted_sum(self) -> np.ndarray:
        return np.where(self.has_evidence, self.affinity * self.weight_total, 0.0)

    def _lookup(self) -> dict:
        if self._index is None:
            idx = {(int(i), int(j)): k for k, (i, j) in enumerate(self.pairs.tolist())}
            object.__setattr__(self, "_index", idx)
        return self._index

    def get(self, i: int, j: int) -> Optional[float]:
        """Finalized affinity of a pair; None if unstored or no evidence."""
        if i > j:
            i, j = j, i
        k = self._lookup().get((i, j))
        if k is None or np.isnan(self.affinity[k]):
            return None
        return float(self.affinity[k])

    def evidence_dict(self) -> dict:
        ok = self.has_evidence
        return {
            (int(i), int(j)): float(a)
            for (i, j), a in zip(self.pairs[ok].tolist(), self.affinity[ok].tolist())
        }

    def to_dense(self) -> np.ndarray:
        """Dense symmetric array with NaN for missing pairs (small graphs only)."""
        out = np.full((self.num_nodes, self.num_nodes), np.nan)
        i, j = self.pairs.T
        out[i, j] = self.affinity
        out[j, i] = self.affinity
        return out

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# nodes {self.num_nodes}\n")
            for (i, j), a, w in zip(self.pairs.tolist(), self.affinity.tolist(), self.weight_total.tolist()):
                fh.write(f"{i} {j} {a!r} {w!r}\n")

    @classmethod
    def load(cls, path) -> "AffinityMatrix":
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("# nodes "):
            raise ValueError(f"{path}: missing '# nodes N' header")
        n = int(lines[0].split()[2])
        rows = [ln.split() for ln in lines[1:] if ln.strip()]
        pairs = np.array([[int(r[0]), int(r[1])] for r in rows], dtype=np.int64).reshape(-1, 2)
        aff = np.array([float(r[2]) for r in rows], dtype=np.float64)
        wt = np.array([float(r[3]) for r in rows], dtype=np.float64)
        return cls(n, pairs, aff, wt)


def _view_terms(cloud, partition, view, pairs, tolerance):
    """Per-pair (weight, cosine) contributions from one view."""
    n_q = partition.num_superpoints
    proj = project_points(cloud, view, tolerance)
    sp = partition.label
    vis = np.bincount(sp[proj.visible], minlength=n_q) / partition.sizes
    lab = point_labels(proj, view.masks)
    keep = lab > 0
    hist = sparse.coo_matrix(
        (np.ones(int(keep.sum())), (sp[keep], lab[keep])),
        shape=(n_q, view.masks.num_masks + 1),
    ).tocsr()
    hist.sum_duplicates()
    norm = np.sqrt(np.asarray(hist.multiply(hist).sum(axis=1)).ravel())
    i, j = pairs[:, 0], pairs[:, 1]
    w = vis[i] * vis[j]
    live = (w > 0) & (norm[i] > 0) & (norm[j] > 0)
    cos = np.zeros(len(pairs))
    if live.any():
        li, lj = i[live], j[live]
        dot = np.asarray(hist[li].multiply(hist[lj]).sum(axis=1)).ravel()
        cos[live] = np.minimum(1.0, dot / (norm[li] * norm[lj]))
    w = np.where(live, w, 0.0)
    if not proj.visible.any():
        log.info("frame %s: no visible points, skipped", view.frame_id or "?")
    return w, cos


def build_affinity_matrix(
    cloud: PointCloud,
    partition: SuperpointPartition,
    adjacency: AdjacencyGraph,
    views: Sequence[CameraView],
    *,
    tolerance: float = DEFAULT_DEPTH_TOLERANCE,
    max_distance: int = 2,
    w_min: float = 0.0,
    threads: int = 1,
) -> AffinityMatrix:
    """Affinities for every pair within ``max_distance`` hops of each other.

    View contributions are reduced in list order, so the result does not
    depend on ``threads``.
    """
    if len(partition.label) != len(cloud):
        raise ValueError("partition does not match the cloud")
    pairs, dist = pairs_within(adjacency, max_distance)
    num = np.zeros(len(pairs))
    den = np.zeros(len(pairs))

    def work(view):
        if view.masks is None:
            raise ValueError(f"frame {view.frame_id!r} has no masks")
        return _view_terms(cloud, partition, view, pairs, tolerance)

    if threads > 1 and len(views) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, views))
    else:
        results = map(work, views)
    for w, cos in results:
        num += w * cos
        den += w
    ok = (den > 0) & (den >= w_min)
    with np.errstate(invalid="ignore", divide="ignore"):
        aff = np.where(ok, num / np.where(den > 0, den, 1.0), np.nan)
    aff = np.where(ok, np.clip(aff, 0.0, 1.0), np.nan)
    return AffinityMatrix(adjacency.num_nodes, pairs, aff, den, dist)
