"""Point clouds, pinhole cameras, projection and depth-based visibility.

Pixel convention: a continuous coordinate ``u`` falls in pixel column
``floor(u)``, so pixel ``k`` spans ``[k, k + 1)`` and its centre is at
``k + 0.5``. Poses stored on a :class:`CameraView` map world to camera
(x right, y down, z forward).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateError

DEFAULT_DEPTH_TOLERANCE = 0.05


@dataclass(frozen=True, eq=False)
class PointCloud:
    positions: np.ndarray
    normals: Optional[np.ndarray] = None
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or len(pos) < 1:
            raise ValueError(f"positions must be (N, 3) with N >= 1, got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions contain non-finite values")
        object.__setattr__(self, "positions", pos)
        if self.normals is not None:
            nrm = np.ascontiguousarray(self.normals, dtype=np.float64)
            if nrm.shape != pos.shape:
                raise ValueError("normals must match positions in shape")
            if np.any(np.abs(np.linalg.norm(nrm, axis=1) - 1.0) > 1e-6):
                raise ValueError("normals must be unit length")
            object.__setattr__(self, "normals", nrm)
        if self.colors is not None:
            col = np.asarray(self.colors)
            if col.shape != pos.shape:
                raise ValueError("colors must match positions in shape")
            object.__setattr__(self, "colors", col.astype(np.uint8))

    def __len__(self):
        return len(self.positions)

    def with_normals(self, normals: np.ndarray) -> "PointCloud":
        return PointCloud(self.positions, normals, self.colors)


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


def check_rigid(pose: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    pose = np.asarray(pose, dtype=np.float64)
    if pose.shape != (4, 4):
        raise ValueError(f"pose must be 4x4, got {pose.shape}")
    rot = pose[:3, :3]
    if not np.allclose(rot @ rot.T, np.eye(3), atol=atol, rtol=0):
        raise ValueError("pose rotation block is not orthonormal")
    if np.linalg.det(rot) <= 0:
        raise ValueError("pose rotation has negative determinant")
    if not np.allclose(pose[3], [0, 0, 0, 1]):
        raise ValueError("pose last row must be [0, 0, 0, 1]")
    return pose


def invert_rigid(pose: np.ndarray) -> np.ndarray:
    rot, t = pose[:3, :3], pose[:3, 3]
    inv = np.eye(4)
    inv[:3, :3] = rot.T
    inv[:3, 3] = -rot.T @ t
    return inv


@dataclass(frozen=True, eq=False)
class CameraView:
    """One posed frame. ``masks`` is a :class:`~superseg3d.masks2d.MaskImage` or None."""

    intrinsics: Intrinsics
    pose: np.ndarray
    depth: np.ndarray
    masks: object = None
    frame_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "pose", check_rigid(self.pose))
        depth = np.asarray(self.depth, dtype=np.float64)
        if depth.shape != (self.intrinsics.height, self.intrinsics.width):
            raise ValueError(
                f"depth shape {depth.shape} does not match intrinsics "
                f"({self.intrinsics.height}, {self.intrinsics.width})"
            )
        if not np.all(np.isfinite(depth)) or np.any(depth < 0):
            raise ValueError("depth values must be finite and non-negative")
        object.__setattr__(self, "depth", depth)
        if self.masks is not None and self.masks.labels.shape != depth.shape:
            raise ValueError("mask image dimensions do not match the depth map")

    @property
    def width(self) -> int:
        return self.intrinsics.width

    @property
    def height(self) -> int:
        return self.intrinsics.height

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return invert_rigid(self.pose)[:3, 3]


@dataclass(frozen=True, eq=False)
class Projection:
    pixel: np.ndarray
    cam_depth: np.ndarray
    visible: np.ndarray = field(default=None)

    def pixel_index(self, width: int, height: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer (row, col) of each point's pixel plus an in-bounds flag."""
        u, v = self.pixel[:, 0], self.pixel[:, 1]
        inside = (
            (self.cam_depth > 0) & (u >= 0) & (u < width) & (v >= 0) & (v < height)
        )
        col = np.zeros(len(u), dtype=np.int64)
        row = np.zeros(len(v), dtype=np.int64)
        col[inside] = np.floor(u[inside]).astype(np.int64)
        row[inside] = np.floor(v[inside]).astype(np.int64)
        # floating error at the far border
        np.minimum(col, width - 1, out=col)
        np.minimum(row, height - 1, out=row)
        return row, col, inside


def transform_points(pose: np.ndarray, points: np.ndarray) -> np.ndarray:
    return points @ pose[:3, :3].T + pose[:3, 3]


def project_camera_points(intr: Intrinsics, cam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(z > 0, z, np.nan)
        u = intr.fx * cam[:, 0] / safe + intr.cx
        v = intr.fy * cam[:, 1] / safe + intr.cy
    return np.stack([u, v], axis=1), z


def visibility_test(
    projection: Projection, depth: np.ndarray, tolerance: float = DEFAULT_DEPTH_TOLERANCE
) -> np.ndarray:
    """Depth-consistency visibility with nearest-pixel lookup.

    A point is visible when it projects in bounds with positive camera depth,
    its pixel has valid depth, and the two depths agree within ``tolerance``.
    """
    height, width = depth.shape
    row, col, inside = projection.pixel_index(width, height)
    ref = depth[row, col]
    return inside & (ref > 0) & (np.abs(projection.cam_depth - ref) <= tolerance)


def project_points(
    cloud: PointCloud, view: CameraView, tolerance: float = DEFAULT_DEPTH_TOLERANCE
) -> Projection:
    cam = transform_points(view.pose, cloud.positions)
    pixel, z = project_camera_points(view.intrinsics, cam)
    proj = Projection(pixel, z)
    visible = visibility_test(proj, view.depth, tolerance)
    return Projection(pixel, z, visible)


def backproject(
    u: np.ndarray, v: np.ndarray, depth: np.ndarray, intr: Intrinsics, pose: np.ndarray
) -> np.ndarray:
    """Lift continuous pixel coordinates with camera depth to world points."""
    x = (np.asarray(u, dtype=np.float64) - intr.cx) / intr.fx * depth
    y = (np.asarray(v, dtype=np.float64) - intr.cy) / intr.fy * depth
    cam = np.stack([x, y, np.asarray(depth, dtype=np.float64)], axis=-1)
    return transform_points(invert_rigid(pose), cam)


def primitive_visibility(indices, projection: Projection) -> float:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise DegenerateError("empty superpoint: the partition is degenerate")
    return float(np.count_nonzero(projection.visible[indices])) / indices.size


def look_at_pose(eye, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """World-to-camera pose for a camera at ``eye`` looking at ``target``."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, [0.0, 1.0, 0.0])
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward])
    pose = np.eye(4)
    pose[:3, :3] = rot
    pose[:3, 3] = -rot @ eye
    return pose
