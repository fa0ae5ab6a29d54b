"""File formats: PLY clouds, 16-bit PNGs, poses, intrinsics, segs, key-value configs."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image
from plyfile import PlyData, PlyElement

from .geometry import Intrinsics, PointCloud, check_rigid, invert_rigid


def read_ply(path) -> PointCloud:
    vertex = PlyData.read(str(path))["vertex"]
    names = vertex.data.dtype.names
    pos = np.stack([vertex["x"], vertex["y"], vertex["z"]], axis=1).astype(np.float64)
    normals = colors = None
    if {"nx", "ny", "nz"} <= set(names):
        normals = np.stack([vertex["nx"], vertex["ny"], vertex["nz"]], axis=1).astype(np.float64)
        # float32 storage loses unit length; renormalise
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    if {"red", "green", "blue"} <= set(names):
        colors = np.stack([vertex["red"], vertex["green"], vertex["blue"]], axis=1)
    return PointCloud(pos, normals, colors)


def write_ply(path, cloud: PointCloud, colors=None, binary: bool = True) -> None:
    fields = [("x", "f8"), ("y", "f8"), ("z", "f8")]
    if cloud.normals is not None:
        fields += [("nx", "f8"), ("ny", "f8"), ("nz", "f8")]
    colors = cloud.colors if colors is None else np.asarray(colors, dtype=np.uint8)
    if colors is not None:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    data = np.empty(len(cloud), dtype=fields)
    data["x"], data["y"], data["z"] = cloud.positions.T
    if cloud.normals is not None:
        data["nx"], data["ny"], data["nz"] = cloud.normals.T
    if colors is not None:
        data["red"], data["green"], data["blue"] = colors.T
    PlyData([PlyElement.describe(data, "vertex")], text=not binary).write(str(path))


def read_png16(path) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode not in ("I;16", "I;16B", "I;16L"):
            raise ValueError(f"{path}: expected a 16-bit single-channel PNG, got mode {img.mode}")
        return np.array(img, dtype=np.uint16).astype(np.int64)


def read_png_any(path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.array(img)
    return arr if arr.ndim == 2 else arr[..., 0]


def write_png16(path, array) -> None:
    arr = np.asarray(array)
    if arr.size and (arr.min() < 0 or arr.max() > 65535):
        raise ValueError("values do not fit in 16 bits")
    Image.fromarray(arr.astype(np.uint16)).save(path)


def read_depth(path) -> np.ndarray:
    """Depth in metres from a millimetre PNG (0 = invalid)."""
    return read_png16(path).astype(np.float64) / 1000.0


def write_depth(path, depth) -> None:
    write_png16(path, np.round(np.asarray(depth) * 1000.0))


def read_pose(path) -> np.ndarray:
    """Read a camera-to-world 4x4 matrix and return world-to-camera."""
    values = np.loadtxt(path, dtype=np.float64).reshape(-1)
    if values.size != 16:
        raise ValueError(f"{path}: expected 16 numbers, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{path}: pose contains non-finite values")
    cam_to_world = values.reshape(4, 4)
    # text round-trips lose a little orthonormality; re-project onto SO(3)
    u, _, vt = np.linalg.svd(cam_to_world[:3, :3])
    cam_to_world[:3, :3] = u @ vt
    return check_rigid(invert_rigid(cam_to_world))


def write_pose(path, world_to_cam) -> None:
    np.savetxt(path, invert_rigid(np.asarray(world_to_cam)), fmt="%.17g")


def read_intrinsics(path) -> Intrinsics:
    values = Path(path).read_text().split()
    if len(values) != 6:
        raise ValueError(f"{path}: expected 'fx fy cx cy width height'")
    fx, fy, cx, cy = map(float, values[:4])
    return Intrinsics(fx, fy, cx, cy, int(values[4]), int(values[5]))


def write_intrinsics(path, intr: Intrinsics) -> None:
    Path(path).write_text(
        f"{intr.fx!r} {intr.fy!r} {intr.cx!r} {intr.cy!r} {intr.width} {intr.height}\n"
    )


def read_segs(path) -> np.ndarray:
    with open(path) as fh:
        doc = json.load(fh)
    if "segIndices" not in doc:
        raise ValueError(f"{path}: missing 'segIndices'")
    return np.asarray(doc["segIndices"], dtype=np.int64)


def write_segs(path, labels) -> None:
    with open(path, "w") as fh:
        json.dump({"segIndices": [int(x) for x in labels]}, fh)


def read_ids(path) -> np.ndarray:
    """One integer per line (per-point instance ids)."""
    return np.loadtxt(path, dtype=np.int64, ndmin=1)


def write_ids(path, ids) -> None:
    np.savetxt(path, np.asarray(ids, dtype=np.int64), fmt="%d")


def read_keyvalue(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment. Later keys win."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_keyvalue(path, values: dict) -> None:
    Path(path).write_text("".join(f"{k} = {v}\n" for k, v in values.items()))
