"""Normal estimation, graph-based oversegmentation and superpoint adjacency."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .geometry import PointCloud

DEFAULT_KNN = 10
DEFAULT_THRESHOLD_SCALE = 0.1
DEFAULT_MIN_SIZE = 20
DEFAULT_ADJACENCY_RADIUS = 0.05


@dataclass(frozen=True, eq=False)
class SuperpointPartition:
    label: np.ndarray
    num_superpoints: int
    members: tuple
    sizes: np.ndarray

    @classmethod
    def from_labels(cls, labels) -> "SuperpointPartition":
        """Compact arbitrary integer ids to ``[0, N_Q)`` in ascending id order."""
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty 1D array")
        _, dense = np.unique(labels, return_inverse=True)
        dense = dense.astype(np.int64)
        n_q = int(dense.max()) + 1
        order = np.argsort(dense, kind="stable")
        sizes = np.bincount(dense, minlength=n_q)
        members = tuple(np.split(order, np.cumsum(sizes)[:-1]))
        return cls(dense, n_q, members, sizes)

    @classmethod
    def singletons(cls, n: int) -> "SuperpointPartition":
        """Every point its own superpoint (point-level mode)."""
        idx = np.arange(n, dtype=np.int64)
        return cls(idx, n, tuple(idx[i:i + 1] for i in range(n)), np.ones(n, dtype=np.int64))

    def __len__(self):
        return self.num_superpoints


@dataclass(frozen=True, eq=False)
class AdjacencyGraph:
    """Undirected graph over superpoint ids with sorted neighbour arrays."""

    num_nodes: int
    neighbors: tuple

    @classmethod
    def from_pairs(cls, num_nodes: int, pairs) -> "AdjacencyGraph":
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        both = np.concatenate([pairs, pairs[:, ::-1]])
        both = np.unique(both, axis=0)
        counts = np.bincount(both[:, 0], minlength=num_nodes)
        nbrs = np.split(both[:, 1], np.cumsum(counts)[:-1])
        return cls(num_nodes, tuple(nbrs))

    def edges(self) -> np.ndarray:
        """Unordered edges as (i, j) rows with i < j, lexicographically sorted."""
        rows = [
            np.column_stack([np.full(len(nb), i), nb])[nb > i]
            for i, nb in enumerate(self.neighbors)
        ]
        if not rows:
            return np.zeros((0, 2), dtype=np.int64)
        return np.concatenate(rows).astype(np.int64)

    def to_csr(self) -> sparse.csr_matrix:
        e = self.edges()
        data = np.ones(2 * len(e), dtype=np.int8)
        m = sparse.coo_matrix(
            (data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
            shape=(self.num_nodes, self.num_nodes),
        )
        return m.tocsr()


def pairs_within(graph: AdjacencyGraph, max_distance: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """All unordered node pairs at graph distance 1..max_distance.

    Returns ``(pairs, distance)`` with ``pairs[:, 0] < pairs[:, 1]`` sorted
    lexicographically.
    """
    if max_distance < 1:
        raise ValueError("max_distance must be >= 1")
    n = graph.num_nodes
    adj = graph.to_csr().astype(bool)
    reach = (adj + sparse.identity(n, dtype=bool, format="csr")).astype(bool)
    dist = adj.astype(np.int64)
    frontier = adj
    for d in range(2, max_distance + 1):
        frontier = (frontier.astype(np.int64) @ adj.astype(np.int64)).astype(bool)
        new = (frontier > reach).tocsr()
        new.eliminate_zeros()
        if new.nnz == 0:
            break
        dist = dist + d * new.astype(np.int64)
        reach = (reach + new).astype(bool)
        frontier = new
    upper = sparse.triu(dist, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    pairs = np.column_stack([upper.row[order], upper.col[order]]).astype(np.int64)
    return pairs, upper.data[order].astype(np.int64)


@dataclass
class NormalDiagnostics:
    degenerate: int = 0
    flipped: int = 0


def estimate_normals(
    cloud: PointCloud, k: int = DEFAULT_KNN, viewpoints: Optional[np.ndarray] = None
) -> tuple[PointCloud, NormalDiagnostics]:
    """PCA normals from k nearest neighbours (the point itself included).

    Normals are flipped toward the direction from the cloud centroid to the
    mean of ``viewpoints`` (camera centres) if given, else toward +z.
    Neighbourhoods with zero covariance get +z and are counted as degenerate.
    """
    n = len(cloud)
    if not 3 <= k <= n:
        raise ValueError(f"need N >= k >= 3, got N={n}, k={k}")
    pts = cloud.positions
    _, idx = cKDTree(pts).query(pts, k=k)
    nb = pts[idx]
    centered = nb - nb.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    evals, evecs = np.linalg.eigh(cov)
    normals = evecs[:, :, 0].copy()
    scale = np.maximum(np.abs(pts).max(), 1.0)
    degenerate = evals[:, 2] <= (1e-12 * scale) ** 2
    normals[degenerate] = (0.0, 0.0, 1.0)

    if viewpoints is not None and len(viewpoints):
        ref = np.asarray(viewpoints, dtype=np.float64).mean(axis=0) - pts.mean(axis=0)
        if np.linalg.norm(ref) < 1e-12:
            ref = np.array([0.0, 0.0, 1.0])
    else:
        ref = np.array([0.0, 0.0, 1.0])
    flip = normals @ ref < 0
    normals[flip] *= -1
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    diag = NormalDiagnostics(int(degenerate.sum()), int(flip.sum()))
    return cloud.with_normals(normals), diag


def knn_edges(points: np.ndarray, knn: int) -> np.ndarray:
    """Unique undirected k-NN edges (i < j), lexicographically sorted."""
    n = len(points)
    if knn > n - 1:
        raise ValueError(f"knn={knn} exceeds N-1={n - 1}")
    if knn < 1:
        raise ValueError("knn must be >= 1")
    _, idx = cKDTree(points).query(points, k=knn + 1)
    src = np.repeat(np.arange(n), knn)
    dst = idx[:, 1:].reshape(-1)
    e = np.column_stack([np.minimum(src, dst), np.maximum(src, dst)])
    e = e[e[:, 0] != e[:, 1]]
    return np.unique(e, axis=0)


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.internal = [0.0] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        """Join two roots; the lower index stays root."""
        if b < a:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        return a


def fh_components(n: int, edges: np.ndarray, weights: np.ndarray, threshold_scale: float):
    """Felzenszwalb-Huttenlocher merging pass over pre-sorted edges.

    Returns the disjoint set and a boolean array marking merged edges.
    """
    ds = _DisjointSet(n)
    find, size, internal = ds.find, ds.size, ds.internal
    merged = np.zeros(len(edges), dtype=bool)
    for e, ((a, b), w) in enumerate(zip(edges.tolist(), weights.tolist())):
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if w <= min(internal[ra] + threshold_scale / size[ra],
                    internal[rb] + threshold_scale / size[rb]):
            root = ds.union(ra, rb)
            # sorted order makes w the new maximum internal edge
            internal[root] = w
            merged[e] = True
    return ds, merged


def sorted_normal_edges(cloud: PointCloud, knn: int) -> tuple[np.ndarray, np.ndarray]:
    edges = knn_edges(cloud.positions, knn)
    n = cloud.normals
    w = np.maximum(0.0, 1.0 - np.einsum("ij,ij->i", n[edges[:, 0]], n[edges[:, 1]]))
    order = np.lexsort((edges[:, 1], edges[:, 0], w))
    return edges[order], w[order]


def felzenszwalb_segment(
    cloud: PointCloud,
    knn: int = DEFAULT_KNN,
    threshold_scale: float = DEFAULT_THRESHOLD_SCALE,
    min_size: int = DEFAULT_MIN_SIZE,
) -> SuperpointPartition:
    """Oversegment a cloud with normals into superpoints.

    Edge weight between k-NN points is ``1 - n_p . n_q`` clamped at zero.
    Components under ``min_size`` points are afterwards merged along the
    lowest-weight edge that touches them.
    """
    if cloud.normals is None:
        raise ValueError("cloud has no normals; call estimate_normals first")
    n = len(cloud)
    edges, weights = sorted_normal_edges(cloud, knn)
    ds, _ = fh_components(n, edges, weights, threshold_scale)
    if min_size > 1:
        find, size = ds.find, ds.size
        for a, b in edges.tolist():
            ra, rb = find(a), find(b)
            if ra != rb and (size[ra] < min_size or size[rb] < min_size):
                ds.union(ra, rb)
    roots = np.fromiter((ds.find(i) for i in range(n)), dtype=np.int64, count=n)
    return SuperpointPartition.from_labels(roots)


def superpoint_adjacency(
    cloud: PointCloud, partition: SuperpointPartition, radius: float = DEFAULT_ADJACENCY_RADIUS
) -> AdjacencyGraph:
    """Superpoints are adjacent when any two of their points lie within ``radius``."""
    close = cKDTree(cloud.positions).query_pairs(radius, output_type="ndarray")
    lab = partition.label
    if len(close) == 0:
        return AdjacencyGraph.from_pairs(partition.num_superpoints, np.zeros((0, 2)))
    a, b = lab[close[:, 0]], lab[close[:, 1]]
    keep = a != b
    pairs = np.column_stack([np.minimum(a[keep], b[keep]), np.maximum(a[keep], b[keep])])
    return AdjacencyGraph.from_pairs(partition.num_superpoints, np.unique(pairs, axis=0))


def point_graph(cloud: PointCloud, knn: int = DEFAULT_KNN) -> AdjacencyGraph:
    """k-NN graph over individual points, for point-level growing."""
    return AdjacencyGraph.from_pairs(len(cloud), knn_edges(cloud.positions, knn))
