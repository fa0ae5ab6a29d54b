"""Per-frame 2D instance masks: overlap resolution and label images."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io as sio


def densify(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Renumber non-zero labels to 1..K in ascending order of original id.

    Returns the dense image and the original id of each new label
    (index 0 corresponds to label 1).
    """
    labels = np.asarray(labels)
    ids, inverse = np.unique(labels, return_inverse=True)
    inverse = inverse.reshape(labels.shape)
    if ids.size and ids[0] == 0:
        return inverse.astype(np.int32), ids[1:]
    return (inverse + 1).astype(np.int32), ids


@dataclass(frozen=True, eq=False)
class MaskImage:
    labels: np.ndarray
    num_masks: int
    scores: Optional[dict] = None

    @classmethod
    def from_labels(cls, labels, scores: Optional[dict] = None) -> "MaskImage":
        labels = np.asarray(labels)
        if labels.ndim != 2:
            raise ValueError("mask label image must be 2D")
        if labels.size and labels.min() < 0:
            raise ValueError("mask labels must be non-negative")
        dense, original = densify(labels)
        if scores is not None:
            scores = {i + 1: float(scores[int(o)]) for i, o in enumerate(original) if int(o) in scores}
        return cls(dense, int(original.size), scores)


@dataclass(frozen=True, eq=False)
class RawMaskSet:
    """Possibly overlapping binary masks with optional quality scores."""

    masks: list
    scores: Optional[list] = None

    def __post_init__(self):
        masks = [np.asarray(m, dtype=bool) for m in self.masks]
        if masks and any(m.shape != masks[0].shape for m in masks):
            raise ValueError("all raw masks must share the same dimensions")
        if self.scores is not None:
            if len(self.scores) != len(masks):
                raise ValueError("one score per mask is required")
            if not np.all(np.isfinite(self.scores)):
                raise ValueError("mask scores must be finite")
        object.__setattr__(self, "masks", masks)


def resolve_overlaps(raw: RawMaskSet, shape: Optional[tuple] = None) -> MaskImage:
    """Flatten overlapping masks; each pixel keeps its highest-scoring mask.

    Without scores, larger masks take priority. Ties go to the lower mask
    index. Output labels are numbered by priority, so label 1 is the
    best-scoring mask that kept at least one pixel.
    """
    if not raw.masks:
        if shape is None:
            raise ValueError("shape is required for an empty mask set")
        return MaskImage(np.zeros(shape, dtype=np.int32), 0, {})
    if shape is not None and raw.masks[0].shape != tuple(shape):
        raise ValueError("raw mask dimensions do not match the frame")
    n = len(raw.masks)
    if raw.scores is not None:
        key = np.asarray(raw.scores, dtype=np.float64)
    else:
        key = np.array([m.sum() for m in raw.masks], dtype=np.float64)
    order = sorted(range(n), key=lambda k: (-key[k], k))

    owner = np.full(raw.masks[0].shape, -1, dtype=np.int64)
    for k in reversed(order):
        owner[raw.masks[k]] = k

    labels = np.zeros(owner.shape, dtype=np.int32)
    scores = {}
    next_label = 1
    for k in order:
        hit = owner == k
        if hit.any():
            labels[hit] = next_label
            scores[next_label] = float(key[k]) if raw.scores is not None else None
            next_label += 1
    if raw.scores is None:
        scores = None
    return MaskImage(labels, next_label - 1, scores)


def load_mask_image(path, expected_shape: Optional[tuple] = None) -> MaskImage:
    labels = sio.read_png16(path)
    if expected_shape is not None and labels.shape != tuple(expected_shape):
        raise ValueError(
            f"{path}: mask size {labels.shape} does not match depth map {tuple(expected_shape)}"
        )
    return MaskImage.from_labels(labels)


def save_mask_image(path, masks: MaskImage) -> None:
    sio.write_png16(path, masks.labels)


def load_binary_masks(directory) -> RawMaskSet:
    """Read ``mask_<k>.png`` files plus an optional ``scores.txt``."""
    directory = Path(directory)
    files = sorted(directory.glob("mask_*.png"), key=lambda p: int(p.stem.split("_")[1]))
    masks = [sio.read_png_any(p) > 0 for p in files]
    scores = None
    score_file = directory / "scores.txt"
    if score_file.exists():
        scores = [float(s) for s in score_file.read_text().split()]
        if len(scores) != len(masks):
            raise ValueError(f"{score_file}: {len(scores)} scores for {len(masks)} masks")
    return RawMaskSet(masks, scores)


def load_frame_masks(root: Path, frame_id: str, shape: Sequence[int]) -> MaskImage:
    """Load a frame's masks in either accepted on-disk form."""
    flat = root / f"{frame_id}.png"
    if flat.exists():
        return load_mask_image(flat, shape)
    folder = root / frame_id
    if folder.is_dir():
        return resolve_overlaps(load_binary_masks(folder), tuple(shape))
    raise FileNotFoundError(f"no masks for frame {frame_id!r} under {root}")
