"""Procedural desk-scale scenes with exact depth and ground-truth masks.

Scenes are a square floor (instance id 1) plus objects built from boxes,
spheres and vertical cylinders (ids 2, 3, ...). Surfaces are sampled
uniformly at a fixed density with analytic normals; surfaces in contact
with the floor or another primitive are not sampled. Views come from a
circular camera orbit and are ray-cast analytically, so depth and masks
are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from . import io as sio
from .geometry import CameraView, Intrinsics, PointCloud, backproject, invert_rigid, look_at_pose
from .masks2d import MaskImage

FLOOR_ID = 1
_EPS = 1e-9
OBJECT_NAMES = (
    "chair", "table", "lamp", "bin", "ball", "vase", "cabinet", "banana",
    "kettle", "plant", "stool", "speaker", "pillow", "bucket", "globe", "crate",
)


@dataclass(frozen=True)
class Primitive:
    """``dims`` is (sx, sy, sz) for a box, (r,) for a sphere, (r, h) for a cylinder."""

    shape: str
    dims: tuple
    x: float = 0.0
    y: float = 0.0
    elevation: float = 0.0
    yaw: float = 0.0  # degrees, boxes only

    def __post_init__(self):
        need = {"box": 3, "sphere": 1, "cylinder": 2}
        if self.shape not in need:
            raise ValueError(f"unknown shape {self.shape!r}")
        if len(self.dims) != need[self.shape] or any(d <= 0 for d in self.dims):
            raise ValueError(f"{self.shape} needs {need[self.shape]} positive dims")
        object.__setattr__(self, "dims", tuple(float(d) for d in self.dims))

    @property
    def top(self) -> float:
        if self.shape == "box":
            return self.elevation + self.dims[2]
        if self.shape == "sphere":
            return self.elevation + 2 * self.dims[0]
        return self.elevation + self.dims[1]

    @property
    def footprint_radius(self) -> float:
        if self.shape == "box":
            return 0.5 * math.hypot(self.dims[0], self.dims[1])
        return self.dims[0]

    def _rot(self) -> np.ndarray:
        c, s = math.cos(math.radians(self.yaw)), math.sin(math.radians(self.yaw))
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def to_local(self, pts: np.ndarray) -> np.ndarray:
        return (pts - [self.x, self.y, 0.0]) @ self._rot()

    def contains(self, pts: np.ndarray, eps: float = _EPS) -> np.ndarray:
        """Points inside or on the surface."""
        p = self.to_local(pts)
        if self.shape == "box":
            sx, sy, sz = self.dims
            return ((np.abs(p[:, 0]) <= sx / 2 + eps) & (np.abs(p[:, 1]) <= sy / 2 + eps)
                    & (p[:, 2] >= self.elevation - eps) & (p[:, 2] <= self.elevation + sz + eps))
        if self.shape == "sphere":
            r = self.dims[0]
            c = np.array([0.0, 0.0, self.elevation + r])
            return np.linalg.norm(p - c, axis=1) <= r + eps
        r, h = self.dims
        return ((np.hypot(p[:, 0], p[:, 1]) <= r + eps)
                & (p[:, 2] >= self.elevation - eps) & (p[:, 2] <= self.elevation + h + eps))

    def sample(self, density: float, rng: np.random.Generator):
        """Uniform surface samples and outward normals in world coordinates."""
        pts, nrm = [], []

        def add(p, n):
            pts.append(p)
            nrm.append(np.broadcast_to(n, p.shape) if np.ndim(n) == 1 else n)

        if self.shape == "box":
            sx, sy, sz = self.dims
            e = self.elevation
            half = np.array([sx, sy, sz]) / 2
            centre = np.array([0.0, 0.0, e + sz / 2])
            for axis in range(3):
                a, b = [k for k in range(3) if k != axis]
                area = 4 * half[a] * half[b]
                for sign in (1.0, -1.0):
                    m = int(round(area * density))
                    p = np.empty((m, 3))
                    p[:, a] = rng.uniform(-half[a], half[a], m)
                    p[:, b] = rng.uniform(-half[b], half[b], m)
                    p[:, axis] = sign * half[axis]
                    n = np.zeros(3)
                    n[axis] = sign
                    add(p + centre, n)
        elif self.shape == "sphere":
            r = self.dims[0]
            m = int(round(4 * math.pi * r * r * density))
            n = rng.normal(size=(m, 3))
            n /= np.linalg.norm(n, axis=1, keepdims=True)
            add(n * r + [0.0, 0.0, self.elevation + r], n)
        else:
            r, h = self.dims
            e = self.elevation
            m = int(round(2 * math.pi * r * h * density))
            th = rng.uniform(0, 2 * math.pi, m)
            n = np.column_stack([np.cos(th), np.sin(th), np.zeros(m)])
            p = np.column_stack([r * n[:, 0], r * n[:, 1], rng.uniform(e, e + h, m)])
            add(p, n)
            for z, sign in ((e + h, 1.0), (e, -1.0)):
                m = int(round(math.pi * r * r * density))
                rad = r * np.sqrt(rng.uniform(0, 1, m))
                th = rng.uniform(0, 2 * math.pi, m)
                p = np.column_stack([rad * np.cos(th), rad * np.sin(th), np.full(m, z)])
                add(p, np.array([0.0, 0.0, sign]))
        p = np.concatenate(pts) if pts else np.zeros((0, 3))
        n = np.concatenate(nrm) if nrm else np.zeros((0, 3))
        rot = self._rot()
        return p @ rot.T + [self.x, self.y, 0.0], n @ rot.T

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Ray parameter of the first hit (inf for a miss)."""
        o = self.to_local(origin[None])[0]
        d = dirs @ self._rot()
        t = np.full(len(d), np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.shape == "box":
                sx, sy, sz = self.dims
                lo = np.array([-sx / 2, -sy / 2, self.elevation])
                hi = np.array([sx / 2, sy / 2, self.elevation + sz])
                t1 = (lo - o) / d
                t2 = (hi - o) / d
                tn = np.nanmax(np.minimum(t1, t2), axis=1)
                tf = np.nanmin(np.maximum(t1, t2), axis=1)
                hit = (tn <= tf) & (tn > 0)
                t[hit] = tn[hit]
            elif self.shape == "sphere":
                r = self.dims[0]
                oc = o - [0.0, 0.0, self.elevation + r]
                a = np.einsum("ij,ij->i", d, d)
                b = 2 * d @ oc
                c = oc @ oc - r * r
                disc = b * b - 4 * a * c
                root = (-b - np.sqrt(np.maximum(disc, 0))) / (2 * a)
                hit = (disc >= 0) & (root > 0)
                t[hit] = root[hit]
            else:
                r, h = self.dims
                e = self.elevation
                a = d[:, 0] ** 2 + d[:, 1] ** 2
                b = 2 * (o[0] * d[:, 0] + o[1] * d[:, 1])
                c = o[0] ** 2 + o[1] ** 2 - r * r
                disc = b * b - 4 * a * c
                root = (-b - np.sqrt(np.maximum(disc, 0))) / (2 * a)
                z = o[2] + root * d[:, 2]
                side = (disc >= 0) & (a > 0) & (root > 0) & (z >= e) & (z <= e + h)
                t[side] = root[side]
                for zc in (e + h, e):
                    tc = (zc - o[2]) / d[:, 2]
                    xc, yc = o[0] + tc * d[:, 0], o[1] + tc * d[:, 1]
                    cap = (tc > 0) & (xc * xc + yc * yc <= r * r)
                    t = np.where(cap & (tc < t), tc, t)
        return t


@dataclass(frozen=True)
class SceneObject:
    name: str
    parts: tuple

    @classmethod
    def single(cls, name: str, shape: str, dims, **pose) -> "SceneObject":
        return cls(name, (Primitive(shape, tuple(dims), **pose),))


@dataclass(frozen=True)
class CameraOrbit:
    count: int = 24
    radius: float = 3.5
    height: float = 2.0
    look_at: tuple = (0.0, 0.0, 0.2)
    width: int = 192
    height_px: int = 144
    fx: float = 130.0
    fy: float = 130.0
    phase: float = 0.0  # degrees

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("camera count must be >= 1")

    @property
    def intrinsics(self) -> Intrinsics:
        return Intrinsics(self.fx, self.fy, self.width / 2, self.height_px / 2, self.width, self.height_px)

    def poses(self) -> list:
        out = []
        for k in range(self.count):
            ang = math.radians(self.phase) + 2 * math.pi * k / self.count
            eye = (self.radius * math.cos(ang), self.radius * math.sin(ang), self.height)
            out.append(look_at_pose(eye, self.look_at))
        return out


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    floor_extent: float = 4.0
    objects: tuple = ()
    density: float = 1000.0
    cameras: CameraOrbit = CameraOrbit()
    observed_only: bool = False

    def __post_init__(self):
        if self.density <= 0:
            raise ValueError("density must be positive")
        if self.floor_extent <= 0:
            raise ValueError("floor extent must be positive")
        object.__setattr__(self, "objects", tuple(self.objects))

    @property
    def spacing(self) -> float:
        return 1.0 / math.sqrt(self.density)

    @property
    def names(self) -> dict:
        """Instance id to object name (floor included)."""
        out = {FLOOR_ID: "floor"}
        for k, obj in enumerate(self.objects):
            out[k + 2] = obj.name
        return out


@dataclass(frozen=True)
class NoiseModel:
    merge_prob: float = 0.0
    split_prob: float = 0.0
    erode_px: int = 0
    seed: int = 0

    def __post_init__(self):
        for p in (self.merge_prob, self.split_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.erode_px < 0:
            raise ValueError("erode_px must be >= 0")

    @property
    def is_identity(self) -> bool:
        return self.merge_prob == 0 and self.split_prob == 0 and self.erode_px == 0


def _all_parts(spec: SceneSpec):
    for k, obj in enumerate(spec.objects):
        for part in obj.parts:
            yield k + 2, part


def generate_scene(spec: SceneSpec) -> tuple[PointCloud, np.ndarray]:
    """Sample the scene surfaces; returns the cloud and per-point instance ids.

    With ``spec.observed_only`` samples that no orbit camera sees are
    dropped, as in a reconstruction fused from the same frames.
    """
    rng = np.random.default_rng(spec.seed)
    parts = list(_all_parts(spec))
    half = spec.floor_extent / 2
    m = int(round(spec.floor_extent ** 2 * spec.density))
    floor = np.column_stack([rng.uniform(-half, half, m), rng.uniform(-half, half, m), np.zeros(m)])
    keep = np.ones(m, dtype=bool)
    for _, part in parts:
        keep &= ~part.contains(floor)
    pts = [floor[keep]]
    nrm = [np.tile([0.0, 0.0, 1.0], (int(keep.sum()), 1))]
    ids = [np.full(int(keep.sum()), FLOOR_ID)]
    for k, (oid, part) in enumerate(parts):
        p, n = part.sample(spec.density, rng)
        keep = ~((p[:, 2] <= _EPS) & (n[:, 2] < -0.5))
        for k2, (_, other) in enumerate(parts):
            if k2 != k:
                keep &= ~other.contains(p)
        pts.append(p[keep])
        nrm.append(n[keep])
        ids.append(np.full(int(keep.sum()), oid))
    pts, nrm, ids = np.concatenate(pts), np.concatenate(nrm), np.concatenate(ids).astype(np.int64)
    if spec.observed_only:
        seen = np.zeros(len(pts), dtype=bool)
        intr = spec.cameras.intrinsics
        for pose in spec.cameras.poses():
            seen |= raycast_visibility(spec, pts, intr, pose)
        pts, nrm, ids = pts[seen], nrm[seen], ids[seen]
    return PointCloud(pts, nrm), ids


def first_hit(spec: SceneSpec, origin: np.ndarray, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ray parameter and instance id of the first surface hit along each ray."""
    best = np.full(len(dirs), np.inf)
    ids = np.zeros(len(dirs), dtype=np.int64)
    half = spec.floor_extent / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        tf = -origin[2] / dirs[:, 2]
    hx, hy = origin[0] + tf * dirs[:, 0], origin[1] + tf * dirs[:, 1]
    floor_hit = (tf > 0) & (np.abs(hx) <= half) & (np.abs(hy) <= half)
    best[floor_hit] = tf[floor_hit]
    ids[floor_hit] = FLOOR_ID
    for oid, part in _all_parts(spec):
        t = part.intersect(origin, dirs)
        closer = t < best
        best[closer] = t[closer]
        ids[closer] = oid
    return best, ids


def raycast_visibility(spec: SceneSpec, points: np.ndarray, intr: Intrinsics, pose: np.ndarray,
                       rel_tol: float = 1e-6) -> np.ndarray:
    """Exact visibility of surface points: inside the image and unoccluded.

    A point is unoccluded when the first hit on the segment from the camera
    centre to the point is the point itself (up to ``rel_tol``).
    """
    cam = points @ pose[:3, :3].T + pose[:3, 3]
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * cam[:, 0] / z + intr.cx
        v = intr.fy * cam[:, 1] / z + intr.cy
    inside = (z > 0) & (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
    eye = invert_rigid(pose)[:3, 3]
    out = np.zeros(len(points), dtype=bool)
    if inside.any():
        t, _ = first_hit(spec, eye, points[inside] - eye)
        out[inside] = t >= 1.0 - rel_tol
    return out


def raycast(spec: SceneSpec, intr: Intrinsics, pose: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact depth (0 = miss) and first-hit instance id per pixel centre."""
    u, v = np.meshgrid(np.arange(intr.width) + 0.5, np.arange(intr.height) + 0.5)
    cam_dirs = np.column_stack([((u - intr.cx) / intr.fx).ravel(),
                                ((v - intr.cy) / intr.fy).ravel(),
                                np.ones(u.size)])
    c2w = invert_rigid(pose)
    origin = c2w[:3, 3]
    dirs = cam_dirs @ c2w[:3, :3].T
    best, ids = first_hit(spec, origin, dirs)
    # camera-space ray directions have unit z, so t is the depth
    depth = np.where(np.isfinite(best), best, 0.0).reshape(intr.height, intr.width)
    return depth, ids.reshape(intr.height, intr.width)


def render_views(spec: SceneSpec, with_ids: bool = False):
    """Ray-cast every orbit camera; masks are the ground-truth instance masks."""
    intr = spec.cameras.intrinsics
    views, id_images = [], []
    for k, pose in enumerate(spec.cameras.poses()):
        depth, ids = raycast(spec, intr, pose)
        views.append(CameraView(intr, pose, depth, MaskImage.from_labels(ids), f"{k:04d}"))
        id_images.append(ids)
    return (views, id_images) if with_ids else views


def _adjacent_pairs(labels: np.ndarray) -> list:
    pairs = set()
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        diff = (a != b) & (a > 0) & (b > 0)
        lo, hi = np.minimum(a[diff], b[diff]), np.maximum(a[diff], b[diff])
        pairs.update(zip(lo.tolist(), hi.tolist()))
    return sorted(pairs)


def _corrupt_one(labels: np.ndarray, model: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    labels = labels.astype(np.int64).copy()
    if model.merge_prob > 0:
        parent = {}

        def find(x):
            while parent.get(x, x) != x:
                x = parent[x]
            return x

        for a, b in _adjacent_pairs(labels):
            if rng.random() < model.merge_prob:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        if parent:
            top = int(labels.max())
            lut = np.array([find(x) for x in range(top + 1)])
            labels = lut[labels]
    if model.split_prob > 0:
        next_id = int(labels.max()) + 1
        rows, cols = np.indices(labels.shape)
        for lab in np.unique(labels[labels > 0]).tolist():
            u, theta = rng.random(), rng.uniform(0.0, 2 * math.pi)
            if u >= model.split_prob:
                continue
            sel = labels == lab
            cy, cx = rows[sel].mean(), cols[sel].mean()
            side = sel & ((cols - cx) * math.cos(theta) + (rows - cy) * math.sin(theta) > 0)
            if side.any() and side.sum() < sel.sum():
                labels[side] = next_id
                next_id += 1
    if model.erode_px > 0:
        r = model.erode_px
        yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
        disk = xx * xx + yy * yy <= r * r
        hi = ndimage.maximum_filter(labels, footprint=disk, mode="nearest")
        lo = ndimage.minimum_filter(labels, footprint=disk, mode="nearest")
        labels[hi != lo] = 0
    return labels


def corrupt_masks(masks: Sequence[MaskImage], model: NoiseModel) -> list:
    """Fuse, split and erode masks; view ``k`` draws from rng seeded by (seed, k)."""
    if model.is_identity:
        return list(masks)
    out = []
    for k, m in enumerate(masks):
        rng = np.random.default_rng([model.seed, k])
        out.append(MaskImage.from_labels(_corrupt_one(m.labels, model, rng)))
    return out


def with_masks(views: Sequence[CameraView], masks: Sequence[MaskImage]) -> list:
    return [replace(v, masks=m) for v, m in zip(views, masks)]


@dataclass(eq=False)
class SyntheticScene:
    spec: SceneSpec
    cloud: PointCloud
    gt_ids: np.ndarray
    views: list
    id_images: list = field(repr=False, default_factory=list)

    @property
    def names(self) -> dict:
        return self.spec.names

    def semantic_table(self) -> dict:
        """Semantic id to name; one id per distinct name, in instance order."""
        table, seen = {}, {}
        for _, name in sorted(self.names.items()):
            if name not in seen:
                seen[name] = len(seen) + 1
                table[seen[name]] = name
        return table

    def semantic_images(self) -> list:
        by_name = {name: sid for sid, name in self.semantic_table().items()}
        lut = np.zeros(max(self.names) + 1, dtype=np.int64)
        for oid, name in self.names.items():
            lut[oid] = by_name[name]
        return [lut[ids] for ids in self.id_images]


def build_scene(spec: SceneSpec, noise: Optional[NoiseModel] = None) -> SyntheticScene:
    cloud, gt = generate_scene(spec)
    views, ids = render_views(spec, with_ids=True)
    if noise is not None and not noise.is_identity:
        views = with_masks(views, corrupt_masks([v.masks for v in views], noise))
    return SyntheticScene(spec, cloud, gt, views, ids)


def random_scene_spec(seed: int, num_objects: int = 8, num_views: int = 24,
                      floor_extent: float = 4.0, density: float = 1000.0,
                      clearance: float = 0.15, observed_only: bool = True, **camera) -> SceneSpec:
    """Random well-separated single-primitive objects with distinct names.

    Footprints are kept at least ``clearance`` apart and away from the
    floor edge.
    """
    rng = np.random.default_rng(seed)
    half = floor_extent / 2
    objects, placed = [], []
    names = list(rng.permutation(OBJECT_NAMES))
    attempts = 0
    while len(objects) < num_objects:
        attempts += 1
        if attempts > 10000:
            raise ValueError("could not place objects; reduce count or clearance")
        shape = ["box", "sphere", "cylinder"][int(rng.integers(3))]
        if shape == "box":
            dims = tuple(rng.uniform([0.25, 0.25, 0.25], [0.6, 0.6, 0.7]).tolist())
        elif shape == "sphere":
            dims = (float(rng.uniform(0.15, 0.3)),)
        else:
            dims = (float(rng.uniform(0.12, 0.3)), float(rng.uniform(0.3, 0.8)))
        yaw = float(rng.uniform(0, 90)) if shape == "box" else 0.0
        lim = half - 0.7
        x, y = rng.uniform(-lim, lim, 2).tolist()
        prim = Primitive(shape, dims, x, y, 0.0, yaw)
        rad = prim.footprint_radius
        if any(math.hypot(x - px, y - py) < rad + pr + clearance for px, py, pr in placed):
            continue
        placed.append((x, y, rad))
        objects.append(SceneObject(str(names[len(objects)]), (prim,)))
    orbit = CameraOrbit(count=num_views, **camera)
    return SceneSpec(seed, floor_extent, tuple(objects), density, orbit, observed_only=observed_only)


def stool_scene_spec(seed: int = 0, num_views: int = 24) -> SceneSpec:
    """A four-legged stool on the floor: one instance built from five parts."""
    seat = Primitive("box", (0.5, 0.5, 0.06), 0.0, 0.0, 0.45)
    legs = tuple(Primitive("cylinder", (0.035, 0.45), sx * 0.2, sy * 0.2)
                 for sx in (-1, 1) for sy in (-1, 1))
    obj = SceneObject("stool", (seat,) + legs)
    return SceneSpec(seed, 4.0, (obj,), 1500.0, CameraOrbit(count=num_views))


# ---------------------------------------------------------------- file IO

def _fmt_part(p: Primitive) -> str:
    dims = ",".join(repr(d) for d in p.dims)
    return f"{p.shape} x={p.x!r} y={p.y!r} size={dims} elevation={p.elevation!r} yaw={p.yaw!r}"


def spec_to_keyvalue(spec: SceneSpec) -> dict:
    cam = spec.cameras
    kv = {
        "seed": spec.seed, "floor_extent": repr(spec.floor_extent), "density": repr(spec.density),
        "camera.count": cam.count, "camera.radius": repr(cam.radius), "camera.height": repr(cam.height),
        "camera.look_at": " ".join(repr(float(c)) for c in cam.look_at),
        "camera.width": cam.width, "camera.height_px": cam.height_px,
        "camera.fx": repr(cam.fx), "camera.fy": repr(cam.fy), "camera.phase": repr(cam.phase),
        "observed_only": str(spec.observed_only).lower(),
    }
    for k, obj in enumerate(spec.objects):
        kv[f"object.{k + 1}"] = f"{obj.name}: " + "; ".join(_fmt_part(p) for p in obj.parts)
    return kv


def _parse_part(text: str) -> Primitive:
    tokens = text.split()
    if not tokens:
        raise ValueError("empty primitive description")
    fields = dict(t.split("=", 1) for t in tokens[1:])
    dims = tuple(float(d) for d in fields.pop("size").split(","))
    kw = {k: float(v) for k, v in fields.items()}
    return Primitive(tokens[0], dims, **kw)


def spec_from_keyvalue(kv: dict) -> SceneSpec:
    cam = {}
    conv = {"count": int, "width": int, "height_px": int}
    for key, value in kv.items():
        if key.startswith("camera."):
            name = key.split(".", 1)[1]
            if name == "look_at":
                cam[name] = tuple(float(c) for c in value.split())
            else:
                cam[name] = conv.get(name, float)(value)
    objects = []
    keys = sorted((k for k in kv if k.startswith("object.")), key=lambda k: int(k.split(".")[1]))
    for key in keys:
        name, _, rest = kv[key].partition(":")
        parts = tuple(_parse_part(p) for p in rest.split(";") if p.strip())
        objects.append(SceneObject(name.strip(), parts))
    return SceneSpec(int(kv.get("seed", 0)), float(kv.get("floor_extent", 4.0)), tuple(objects),
                     float(kv.get("density", 1000.0)), CameraOrbit(**cam),
                     kv.get("observed_only", "false").lower() in ("1", "true", "yes"))


def load_scene_spec(path) -> SceneSpec:
    return spec_from_keyvalue(sio.read_keyvalue(path))


def write_scene_dir(scene: SyntheticScene, root) -> Path:
    """Write a scene directory in the layout the pipeline reads."""
    import json

    root = Path(root)
    for sub in ("poses", "depth", "masks", "semantic"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    sio.write_ply(root / "cloud.ply", scene.cloud)
    sio.write_intrinsics(root / "intrinsics.txt", scene.views[0].intrinsics)
    sio.write_ids(root / "gt_instances.txt", scene.gt_ids)
    sio.write_keyvalue(root / "scene.cfg", spec_to_keyvalue(scene.spec))
    for view, sem in zip(scene.views, scene.semantic_images()):
        fid = view.frame_id
        sio.write_pose(root / "poses" / f"{fid}.txt", view.pose)
        sio.write_depth(root / "depth" / f"{fid}.png", view.depth)
        sio.write_png16(root / "masks" / f"{fid}.png", view.masks.labels)
        sio.write_png16(root / "semantic" / f"{fid}.png", sem)
    with open(root / "labels.json", "w") as fh:
        json.dump({str(k): v for k, v in scene.semantic_table().items()}, fh, indent=1)
    return root


def backproject_depth(view: CameraView) -> np.ndarray:
    """World points for every valid depth pixel (pixel centres)."""
    rows, cols = np.nonzero(view.depth > 0)
    return backproject(cols + 0.5, rows + 0.5, view.depth[rows, cols], view.intrinsics, view.pose)
