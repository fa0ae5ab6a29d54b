"""Region growing over the superpoint graph.

Two admission tests are supported. ``"multilevel"`` compares the candidate
against the whole current region: a weighted mean of its affinities to
region members within two hops, each weighted by ``gamma**d * size``.
``"pairwise"`` is the classic test against the popped node only.

Progressive growing runs several stages with descending thresholds. After
each stage the regions are collapsed into nodes of a smaller graph and
growing restarts on that graph.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .affinity import AffinityMatrix
from .oversegment import AdjacencyGraph, SuperpointPartition, pairs_within

MULTILEVEL = "multilevel"
PAIRWISE = "pairwise"
SCHEDULE_FINE = (0.9, 0.8, 0.7)
SCHEDULE_CLUTTERED = (0.9, 0.8, 0.7, 0.6, 0.5)


@dataclass(frozen=True)
class GrowthConfig:
    thresholds: tuple = SCHEDULE_FINE
    gamma: float = 0.5
    max_distance: int = 2
    criterion: str = MULTILEVEL

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        if not th:
            raise ValueError("at least one threshold is required")
        if any(not 0.0 < t <= 1.0 for t in th):
            raise ValueError("thresholds must lie in (0, 1]")
        if any(a <= b for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be strictly descending")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.criterion not in (MULTILEVEL, PAIRWISE):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.max_distance < 1:
            raise ValueError("max_distance must be >= 1")
        object.__setattr__(self, "thresholds", th)


@dataclass(eq=False)
class CollapsedGraph:
    """Nodes with point sizes, adjacency, and affinities for evidence pairs."""

    sizes: np.ndarray
    adjacency: AdjacencyGraph
    affinity: dict
    max_distance: int = 2
    _near: Optional[list] = field(default=None, repr=False)

    @property
    def num_nodes(self) -> int:
        return len(self.sizes)

    @classmethod
    def from_superpoints(cls, sizes, adjacency: AdjacencyGraph, matrix: AffinityMatrix,
                         max_distance: int = 2) -> "CollapsedGraph":
        return cls(np.asarray(sizes, dtype=np.float64), adjacency, matrix.evidence_dict(), max_distance)

    def near(self, gamma: float) -> list:
        """Per node: list of (other, gamma**d * size_other, affinity) within max_distance."""
        if self._near is None or self._near[0] != gamma:
            pairs, dist = pairs_within(self.adjacency, self.max_distance)
            near = [[] for _ in range(self.num_nodes)]
            size = self.sizes
            aff = self.affinity
            for (i, j), d in zip(pairs.tolist(), dist.tolist()):
                a = aff.get((i, j))
                if a is None:
                    continue
                g = gamma ** d
                near[i].append((j, g * size[j], a))
                near[j].append((i, g * size[i], a))
            self._near = (gamma, near)
        return self._near[1]

    def pair(self, i: int, j: int) -> Optional[float]:
        return self.affinity.get((i, j) if i < j else (j, i))


def graph_distances(adjacency: AdjacencyGraph, source: int, limit: int) -> dict:
    """BFS hop counts from ``source`` up to ``limit`` (source excluded)."""
    dist = {source: 0}
    frontier = [source]
    for d in range(1, limit + 1):
        nxt = []
        for v in frontier:
            for u in adjacency.neighbors[v].tolist():
                if u not in dist:
                    dist[u] = d
                    nxt.append(u)
        frontier = nxt
    del dist[source]
    return dist


def region_node_affinity(region: Sequence[int], node: int, graph: CollapsedGraph,
                         gamma: float = 0.5) -> Optional[float]:
    """Size- and distance-weighted affinity of ``node`` to a region.

    Only members within ``graph.max_distance`` hops contribute; members
    without evidence are skipped. None when nothing contributes.
    """
    region = set(int(r) for r in region)
    if node in region:
        raise ValueError("node already belongs to the region")
    num = den = 0.0
    lo, hi = 1.0, 0.0
    for k, d in graph_distances(graph.adjacency, node, graph.max_distance).items():
        if k not in region:
            continue
        a = graph.pair(node, k)
        if a is None:
            continue
        beta = gamma ** d * graph.sizes[k]
        num += beta * a
        den += beta
        lo, hi = min(lo, a), max(hi, a)
    if den <= 0.0:
        return None
    return weighted_mean(num, den, lo, hi)


def weighted_mean(num: float, den: float, lo: float, hi: float) -> float:
    """``num / den`` clamped into the range of the averaged values.

    Without the clamp a single value ``a`` can come back as ``a`` plus one
    ulp, which flips a strict threshold test.
    """
    return min(hi, max(lo, num / den))


def grow_stage(graph: CollapsedGraph, tau: float, gamma: float = 0.5,
               criterion: str = MULTILEVEL) -> np.ndarray:
    """One pass of seeded BFS region growing; returns labels in ``1..R``.

    Seeds and neighbours are visited in ascending id order and a candidate
    joins when its affinity is strictly above ``tau``.
    """
    n = graph.num_nodes
    nbrs = [nb.tolist() for nb in graph.adjacency.neighbors]
    labels = [0] * n
    near = graph.near(gamma) if criterion == MULTILEVEL else None
    pair = graph.pair
    rid = 0
    for seed in range(n):
        if labels[seed]:
            continue
        rid += 1
        labels[seed] = rid
        queue = deque([seed])
        while queue:
            v = queue.popleft()
            for j in nbrs[v]:
                if labels[j]:
                    continue
                if near is not None:
                    num = den = 0.0
                    lo, hi = 1.0, 0.0
                    for k, beta, a in near[j]:
                        if labels[k] == rid:
                            num += beta * a
                            den += beta
                            if a < lo:
                                lo = a
                            if a > hi:
                                hi = a
                    admit = den > 0.0 and weighted_mean(num, den, lo, hi) > tau
                else:
                    a = pair(v, j)
                    admit = a is not None and a > tau
                if admit:
                    labels[j] = rid
                    queue.append(j)
    return np.asarray(labels, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class SuperpointPairs:
    """Pairs within two hops of the superpoint graph with their affinities."""

    pairs: np.ndarray
    distance: np.ndarray
    affinity: np.ndarray

    @classmethod
    def build(cls, adjacency: AdjacencyGraph, matrix: AffinityMatrix, max_distance: int = 2):
        pairs, dist = pairs_within(adjacency, max_distance)
        if (matrix.distance is not None and len(matrix.pairs) == len(pairs)
                and np.array_equal(matrix.pairs, pairs)):
            aff = matrix.affinity
        else:
            lookup = {(int(i), int(j)): a for (i, j), a in zip(matrix.pairs.tolist(), matrix.affinity.tolist())}
            aff = np.array([lookup.get((i, j), np.nan) for i, j in pairs.tolist()], dtype=np.float64)
        return cls(pairs, dist, aff)


def collapse(sp: SuperpointPairs, sizes, node_of, num_nodes: int, gamma: float = 0.5,
             criterion: str = MULTILEVEL, max_distance: int = 2) -> CollapsedGraph:
    """Merge regions into nodes of a new graph.

    ``node_of`` maps each superpoint to its node in ``0..num_nodes-1``.
    Node-pair affinity is the mean of member cross-pair affinities weighted
    by ``gamma**d * N_i * N_k``; the pairwise criterion uses direct
    neighbours only, weighted by ``N_i * N_k``.
    """
    sizes = np.asarray(sizes, dtype=np.float64)
    node_of = np.asarray(node_of, dtype=np.int64)
    node_sizes = np.bincount(node_of, weights=sizes, minlength=num_nodes)
    x, y = node_of[sp.pairs[:, 0]], node_of[sp.pairs[:, 1]]
    cross = x != y
    direct = cross & (sp.distance == 1)
    adjacency = AdjacencyGraph.from_pairs(num_nodes, np.column_stack([x[direct], y[direct]]))

    use = cross & ~np.isnan(sp.affinity)
    if criterion == PAIRWISE:
        use &= sp.distance == 1
        w = np.ones(len(sp.pairs))
    else:
        use &= sp.distance <= 2
        w = gamma ** sp.distance.astype(np.float64)
    w = w * sizes[sp.pairs[:, 0]] * sizes[sp.pairs[:, 1]]
    lo, hi = np.minimum(x, y)[use], np.maximum(x, y)[use]
    affinity = {}
    if use.any():
        keys, inv = np.unique(lo * num_nodes + hi, return_inverse=True)
        vals = sp.affinity[use]
        num = np.bincount(inv, weights=w[use] * vals)
        den = np.bincount(inv, weights=w[use])
        # a weighted mean lies within its inputs; clamping keeps a lone pair exact
        lo_val = np.full(len(keys), np.inf)
        hi_val = np.full(len(keys), -np.inf)
        np.minimum.at(lo_val, inv, vals)
        np.maximum.at(hi_val, inv, vals)
        for key, a_num, a_den, a_lo, a_hi in zip(keys.tolist(), num.tolist(), den.tolist(),
                                                 lo_val.tolist(), hi_val.tolist()):
            if a_den > 0:
                affinity[divmod(key, num_nodes)] = min(a_hi, max(a_lo, a_num / a_den))
    return CollapsedGraph(node_sizes, adjacency, affinity, max_distance)


@dataclass(frozen=True, eq=False)
class RegionLabeling:
    """Instance id per superpoint (``1..R``) plus per-stage history."""

    instance_id: np.ndarray
    sizes: np.ndarray
    stages: tuple = ()

    @property
    def num_regions(self) -> int:
        return int(self.instance_id.max()) if self.instance_id.size else 0

    @property
    def members(self) -> list:
        order = np.argsort(self.instance_id, kind="stable")
        counts = np.bincount(self.instance_id, minlength=self.num_regions + 1)[1:]
        return np.split(order, np.cumsum(counts)[:-1])

    def point_ids(self, partition: SuperpointPartition) -> np.ndarray:
        return self.instance_id[partition.label]


def progressive_grow(partition: SuperpointPartition, adjacency: AdjacencyGraph,
                     matrix: AffinityMatrix, config: GrowthConfig = GrowthConfig()) -> RegionLabeling:
    sizes = partition.sizes.astype(np.float64)
    md = config.max_distance if config.criterion == MULTILEVEL else 1
    graph = CollapsedGraph.from_superpoints(sizes, adjacency, matrix, md)
    node_of = np.arange(partition.num_superpoints)
    sp = None
    stages = []
    for t, tau in enumerate(config.thresholds):
        if t > 0:
            if sp is None:
                sp = SuperpointPairs.build(adjacency, matrix, md)
            graph = collapse(sp, sizes, node_of, int(node_of.max()) + 1,
                             config.gamma, config.criterion, md)
        lab = grow_stage(graph, tau, config.gamma, config.criterion)
        node_of = lab[node_of] - 1
        stages.append(node_of + 1)
    ids = node_of + 1
    region_sizes = np.bincount(ids, weights=sizes)[1:]
    return RegionLabeling(ids, region_sizes, tuple(stages))


def region_confidence(instance_id: np.ndarray, matrix: AffinityMatrix) -> dict:
    """Mean finalized affinity over evidence pairs inside each region (1.0 if none)."""
    instance_id = np.asarray(instance_id)
    n_regions = int(instance_id.max()) if instance_id.size else 0
    out = {r: 1.0 for r in range(1, n_regions + 1)}
    ok = matrix.has_evidence
    a, b = instance_id[matrix.pairs[ok, 0]], instance_id[matrix.pairs[ok, 1]]
    inside = a == b
    if inside.any():
        num = np.bincount(a[inside], weights=matrix.affinity[ok][inside], minlength=n_regions + 1)
        cnt = np.bincount(a[inside], minlength=n_regions + 1)
        for r in np.nonzero(cnt)[0].tolist():
            out[r] = float(num[r] / cnt[r])
    return out


def drop_small_regions(point_ids: np.ndarray, min_points: int) -> np.ndarray:
    """Set ids of regions with fewer than ``min_points`` points to 0."""
    if min_points <= 0:
        return np.asarray(point_ids).copy()
    ids = np.asarray(point_ids).copy()
    counts = np.bincount(ids)
    ids[counts[ids] < min_points] = 0
    return ids
