"""End-to-end orchestration over in-memory inputs or a scene directory."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io as sio
from .affinity import AffinityMatrix, build_affinity_matrix
from .errors import InvariantViolation, SceneError
from .evaluation import APReport, evaluate_labels
from .geometry import DEFAULT_DEPTH_TOLERANCE, CameraView, PointCloud
from .masks2d import load_frame_masks
from .oversegment import (
    DEFAULT_ADJACENCY_RADIUS, DEFAULT_KNN, DEFAULT_MIN_SIZE, DEFAULT_THRESHOLD_SCALE,
    AdjacencyGraph, SuperpointPartition, estimate_normals, felzenszwalb_segment,
    point_graph, superpoint_adjacency,
)
from .regiongrow import (
    MULTILEVEL, PAIRWISE, SCHEDULE_CLUTTERED, SCHEDULE_FINE, GrowthConfig, RegionLabeling,
    drop_small_regions, progressive_grow, region_confidence,
)

log = logging.getLogger(__name__)
DEFAULT_SEED = 0


@dataclass(frozen=True)
class PipelineConfig:
    knn: int = DEFAULT_KNN
    threshold_scale: float = DEFAULT_THRESHOLD_SCALE
    min_size: int = DEFAULT_MIN_SIZE
    adjacency_radius: float = DEFAULT_ADJACENCY_RADIUS
    normal_k: int = DEFAULT_KNN
    tolerance: float = DEFAULT_DEPTH_TOLERANCE
    w_min: float = 0.0
    thresholds: tuple = SCHEDULE_FINE
    gamma: float = 0.5
    criterion: str = MULTILEVEL
    point_level: bool = False
    min_points: int = 0
    views_fraction: float = 1.0
    threads: int = 1
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not 0.0 < self.views_fraction <= 1.0:
            raise ValueError("views_fraction must lie in (0, 1]")
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        self.growth  # validates

    @property
    def growth(self) -> GrowthConfig:
        return GrowthConfig(self.thresholds, self.gamma, 2, self.criterion)

    def with_overrides(self, **kw) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @classmethod
    def from_keyvalue(cls, kv: dict) -> "PipelineConfig":
        types = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, raw in kv.items():
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            if key == "thresholds":
                out[key] = tuple(float(t) for t in raw.replace(",", " ").split())
            elif types[key] in ("int", int):
                out[key] = int(raw)
            elif types[key] in ("bool", bool):
                out[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            elif types[key] in ("str", str):
                out[key] = raw.strip()
            else:
                out[key] = float(raw)
        return cls(**out)


def select_views(views: Sequence[CameraView], fraction: float) -> list:
    """First ceil(fraction * M) frames in frame-id order."""
    ordered = sorted(views, key=lambda v: v.frame_id)
    count = max(1, math.ceil(fraction * len(ordered) - 1e-9))
    return ordered[:count]


@dataclass(eq=False)
class PipelineResult:
    partition: SuperpointPartition
    adjacency: AdjacencyGraph
    matrix: AffinityMatrix
    labeling: RegionLabeling
    point_ids: np.ndarray
    confidences: dict
    num_views: int
    report: Optional[APReport] = None


def oversegment_cloud(cloud: PointCloud, config: PipelineConfig, views=(),
                      segs: Optional[np.ndarray] = None):
    if config.point_level:
        return cloud, SuperpointPartition.singletons(len(cloud)), point_graph(cloud, config.knn)
    if segs is not None:
        if len(segs) != len(cloud):
            raise SceneError(f"segs has {len(segs)} entries for {len(cloud)} points")
        partition = SuperpointPartition.from_labels(segs)
    else:
        if cloud.normals is None:
            centres = np.array([v.center for v in views]) if len(views) else None
            cloud, diag = estimate_normals(cloud, config.normal_k, centres)
            if diag.degenerate:
                log.info("normal estimation: %d degenerate neighbourhoods", diag.degenerate)
        partition = felzenszwalb_segment(cloud, config.knn, config.threshold_scale, config.min_size)
    adjacency = superpoint_adjacency(cloud, partition, config.adjacency_radius)
    return cloud, partition, adjacency


def compute_affinity(cloud, partition, adjacency, views, config: PipelineConfig) -> AffinityMatrix:
    max_distance = 2 if config.criterion == MULTILEVEL else 1
    return build_affinity_matrix(cloud, partition, adjacency, views, tolerance=config.tolerance,
                                 max_distance=max_distance, w_min=config.w_min, threads=config.threads)


def grow(partition, adjacency, matrix, config: PipelineConfig):
    labeling = progressive_grow(partition, adjacency, matrix, config.growth)
    if np.any(labeling.instance_id == 0):
        raise InvariantViolation("region growing left superpoints unlabeled")
    point_ids = drop_small_regions(labeling.point_ids(partition), config.min_points)
    return labeling, point_ids, region_confidence(labeling.instance_id, matrix)


def run_pipeline(cloud: PointCloud, views: Sequence[CameraView], config: PipelineConfig = PipelineConfig(),
                 gt_ids: Optional[np.ndarray] = None, segs: Optional[np.ndarray] = None) -> PipelineResult:
    views = select_views(views, config.views_fraction)
    cloud, partition, adjacency = oversegment_cloud(cloud, config, views, segs)
    matrix = compute_affinity(cloud, partition, adjacency, views, config)
    labeling, point_ids, conf = grow(partition, adjacency, matrix, config)
    report = evaluate_labels(point_ids, gt_ids, conf) if gt_ids is not None else None
    return PipelineResult(partition, adjacency, matrix, labeling, point_ids, conf, len(views), report)


# ---------------------------------------------------------------- scene directories

@dataclass(eq=False)
class SceneDirectory:
    root: Path
    cloud: PointCloud
    views: list
    gt_ids: Optional[np.ndarray] = None
    segs: Optional[np.ndarray] = None
    semantic: Optional[list] = None
    label_names: Optional[dict] = None


def _need(path: Path) -> Path:
    if not path.exists():
        raise SceneError(f"missing required path: {path}")
    return path


def frame_ids(root: Path) -> list:
    return sorted(p.stem for p in _need(root / "poses").glob("*.txt"))


def load_scene(root, with_masks: bool = True, with_semantic: bool = False) -> SceneDirectory:
    root = Path(root)
    _need(root)
    try:
        cloud = sio.read_ply(_need(root / "cloud.ply"))
        intr = sio.read_intrinsics(_need(root / "intrinsics.txt"))
    except SceneError:
        raise
    except Exception as exc:
        raise SceneError(f"{root}: {exc}") from exc
    depth_dir = _need(root / "depth")
    mask_dir = _need(root / "masks") if with_masks else None
    ids = frame_ids(root)
    if not ids:
        raise SceneError(f"no frames under {root / 'poses'}")
    views = []
    for fid in ids:
        depth_path = _need(depth_dir / f"{fid}.png")
        try:
            pose = sio.read_pose(root / "poses" / f"{fid}.txt")
            depth = sio.read_depth(depth_path)
            masks = load_frame_masks(mask_dir, fid, depth.shape) if with_masks else None
            views.append(CameraView(intr, pose, depth, masks, fid))
        except (ValueError, FileNotFoundError) as exc:
            raise SceneError(f"frame {fid}: {exc}") from exc
    scene = SceneDirectory(root, cloud, views)
    if (root / "gt_instances.txt").exists():
        scene.gt_ids = sio.read_ids(root / "gt_instances.txt")
        if len(scene.gt_ids) != len(cloud):
            raise SceneError(f"{root / 'gt_instances.txt'}: {len(scene.gt_ids)} ids for {len(cloud)} points")
    if (root / "segs.json").exists():
        scene.segs = sio.read_segs(root / "segs.json")
    if with_semantic:
        sem_dir = _need(root / "semantic")
        with open(_need(root / "labels.json")) as fh:
            scene.label_names = {int(k): v for k, v in json.load(fh).items()}
        scene.semantic = [sio.read_png16(_need(sem_dir / f"{fid}.png")) for fid in ids]
    return scene
