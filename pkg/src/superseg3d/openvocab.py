"""Text queries over 3D instances via back-projected 2D semantic masks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geometry import CameraView, PointCloud, backproject

DEFAULT_VOTE_RADIUS = 0.02


@dataclass(frozen=True, eq=False)
class SemanticMaskImage:
    labels: np.ndarray
    names: dict

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        present = set(np.unique(labels[labels > 0]).tolist())
        missing = present - set(self.names)
        if missing:
            raise ValueError(f"labels {sorted(missing)} have no name")
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True, eq=False)
class PointSemantics:
    """Per-point winning label (0 = no votes) and the raw vote counts."""

    label: np.ndarray
    votes: np.ndarray
    names: dict

    def mask(self, query: str) -> np.ndarray:
        ids = [k for k, v in self.names.items() if v == query]
        return np.isin(self.label, ids) if ids else np.zeros(len(self.label), dtype=bool)


@dataclass(frozen=True)
class QueryResult:
    query: str
    matches: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"query": self.query,
                "instances": [{"id": int(i), "overlap": float(o)} for i, o in self.matches]}


def backproject_semantics(views: Sequence[CameraView], semantics: Sequence[SemanticMaskImage],
                          cloud: PointCloud, radius: float = DEFAULT_VOTE_RADIUS) -> PointSemantics:
    """Lift labelled pixels with valid depth and vote for the nearest point within ``radius``.

    Ties between labels go to the lower label id.
    """
    if len(views) != len(semantics):
        raise ValueError("one semantic image per view is required")
    names = {}
    for sem in semantics:
        names.update(sem.names)
    n_labels = max(names, default=0) + 1
    tree = cKDTree(cloud.positions)
    votes = np.zeros((len(cloud), n_labels), dtype=np.int64)
    for view, sem in zip(views, semantics):
        if sem.labels.shape != view.depth.shape:
            raise ValueError(f"frame {view.frame_id!r}: semantic mask size mismatch")
        rows, cols = np.nonzero((sem.labels > 0) & (view.depth > 0))
        if rows.size == 0:
            continue
        pts = backproject(cols + 0.5, rows + 0.5, view.depth[rows, cols], view.intrinsics, view.pose)
        dist, idx = tree.query(pts, distance_upper_bound=radius)
        ok = np.isfinite(dist)
        np.add.at(votes, (idx[ok], sem.labels[rows[ok], cols[ok]]), 1)
    label = np.argmax(votes, axis=1)
    label[votes.max(axis=1) == 0] = 0
    return PointSemantics(label, votes, names)


def query_instances(point_ids: np.ndarray, semantics: PointSemantics, query: str,
                    threshold: float = 0.5) -> QueryResult:
    """Instances whose fraction of points labelled ``query`` exceeds ``threshold``."""
    point_ids = np.asarray(point_ids, dtype=np.int64)
    hit = semantics.mask(query)
    if not hit.any():
        return QueryResult(query, [])
    total = np.bincount(point_ids)
    inside = np.bincount(point_ids[hit], minlength=len(total))
    matches = []
    for inst in np.nonzero(total)[0].tolist():
        if inst == 0:
            continue
        overlap = inside[inst] / total[inst]
        if overlap > threshold:
            matches.append((inst, float(overlap)))
    matches.sort(key=lambda m: (-m[1], m[0]))
    return QueryResult(query, matches)
