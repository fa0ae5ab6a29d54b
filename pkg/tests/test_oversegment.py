import numpy as np
import pytest
from hypothesis import given, strategies as st

from superseg3d import synth
from superseg3d.geometry import PointCloud
from superseg3d.oversegment import (
    AdjacencyGraph, SuperpointPartition, estimate_normals, felzenszwalb_segment, fh_components,
    knn_edges, pairs_within, sorted_normal_edges, superpoint_adjacency,
)
from oracles import brute_adjacency, hop_distances, same_partition


def plane(rng, n, z=0.0, offset=(0.0, 0.0)):
    xy = rng.uniform(0, 1, (n, 2)) + offset
    return np.c_[xy, np.full(n, z)]


def test_plane_normals(rng):
    cloud, diag = estimate_normals(PointCloud(plane(rng, 500)), 10)
    np.testing.assert_allclose(np.abs(cloud.normals[:, 2]), 1.0, atol=1e-6)
    assert np.all(cloud.normals[:, 2] > 0)  # oriented toward +z without cameras
    assert diag.degenerate == 0


def test_sphere_normals_within_five_degrees(rng):
    p = rng.normal(size=(10000, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    cloud, _ = estimate_normals(PointCloud(p), 10)
    cos = np.abs(np.einsum("ij,ij->i", cloud.normals, p))
    assert np.degrees(np.arccos(np.clip(cos, -1, 1))).max() < 5.0


def test_normals_face_cameras(rng):
    pts = plane(rng, 300)
    cloud, diag = estimate_normals(PointCloud(pts), 10, viewpoints=np.array([[0.5, 0.5, -3.0]]))
    assert np.all(cloud.normals[:, 2] < 0)
    assert diag.flipped == 300


def test_degenerate_neighbourhood():
    cloud, diag = estimate_normals(PointCloud(np.ones((10, 3))), 10)
    assert diag.degenerate == 10
    np.testing.assert_array_equal(cloud.normals, np.tile([0.0, 0.0, 1.0], (10, 1)))


def test_normals_need_enough_points():
    with pytest.raises(ValueError):
        estimate_normals(PointCloud(np.zeros((2, 3))), 3)


def test_knn_larger_than_cloud():
    with pytest.raises(ValueError):
        knn_edges(np.zeros((5, 3)), 5)


def test_two_separated_planes(rng):
    pts = np.r_[plane(rng, 300), plane(rng, 300, z=5.0)]
    cloud, _ = estimate_normals(PointCloud(pts), 10)
    part = felzenszwalb_segment(cloud, 10, 0.1, 20)
    assert part.num_superpoints == 2
    assert len(set(part.label[:300])) == 1 and len(set(part.label[300:])) == 1


def test_cube_faces_are_pure():
    pts, nrm = synth.Primitive("box", (1.0, 1.0, 1.0)).sample(1000, np.random.default_rng(1))
    cloud = PointCloud(pts, nrm)
    part = felzenszwalb_segment(cloud, 10, 0.1, 20)
    face = np.argmax(np.abs(cloud.normals), axis=1) * 2 + (cloud.normals.sum(axis=1) > 0)
    assert part.num_superpoints >= 6
    for members in part.members:
        counts = np.bincount(face[members])
        assert counts.max() / len(members) >= 0.95


def test_partition_invariants_on_scene(small_scene):
    part = felzenszwalb_segment(small_scene.cloud)
    assert part.sizes.sum() == len(small_scene.cloud)
    assert np.all(part.sizes > 0)
    assert set(np.unique(part.label)) == set(range(part.num_superpoints))
    for k, members in enumerate(part.members):
        assert np.all(part.label[members] == k)


def naive_fh(n, edges, weights, scale):
    """Component labels kept explicitly; relabel on every merge."""
    comp = list(range(n))
    size = {i: 1 for i in range(n)}
    internal = {i: 0.0 for i in range(n)}
    rejected = []
    for (a, b), w in zip(edges, weights):
        ca, cb = comp[a], comp[b]
        if ca == cb:
            continue
        if w <= min(internal[ca] + scale / size[ca], internal[cb] + scale / size[cb]):
            keep, gone = min(ca, cb), max(ca, cb)
            comp = [keep if c == gone else c for c in comp]
            size[keep] += size.pop(gone)
            internal[keep] = max(internal[ca], internal[cb], w)
        else:
            rejected.append((a, b))
    return comp, rejected


@pytest.mark.parametrize("seed", range(5))
def test_fh_matches_naive_replay(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(20, 120)
    pts = rng.normal(size=(n, 3))
    nrm = rng.normal(size=(n, 3))
    cloud = PointCloud(pts, nrm / np.linalg.norm(nrm, axis=1, keepdims=True))
    edges, weights = sorted_normal_edges(cloud, 6)
    ds, merged = fh_components(n, edges, weights, 0.3)
    labels = [ds.find(i) for i in range(n)]
    comp, rejected = naive_fh(n, edges.tolist(), weights.tolist(), 0.3)
    assert same_partition(labels, comp)
    assert labels == comp  # lower index is the root
    # every surviving boundary edge was rejected by the predicate when processed
    boundary = {(a, b) for a, b in edges.tolist() if comp[a] != comp[b]}
    assert boundary <= set(rejected)
    assert merged.sum() == n - len(set(comp))


@pytest.mark.parametrize("seed", range(5))
def test_adjacency_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 0.5, (300, 3))
    lab = rng.integers(0, 8, 300)
    part = SuperpointPartition.from_labels(lab)
    graph = superpoint_adjacency(PointCloud(pts), part, 0.05)
    expect = brute_adjacency(pts, part.label, 0.05)
    assert {tuple(e) for e in graph.edges().tolist()} == expect


def test_touching_cubes_are_adjacent():
    rng = np.random.default_rng(2)
    a = synth.Primitive("box", (0.5, 0.5, 0.5)).sample(400, rng)
    b = synth.Primitive("box", (0.5, 0.5, 0.5), x=0.52).sample(400, rng)
    cloud = PointCloud(np.r_[a[0], b[0]], np.r_[a[1], b[1]])
    gt = np.r_[np.zeros(len(a[0]), int), np.ones(len(b[0]), int)]
    part = felzenszwalb_segment(cloud)
    graph = superpoint_adjacency(cloud, part, 0.05)
    expect = brute_adjacency(cloud.positions, part.label, 0.05)
    assert {tuple(e) for e in graph.edges().tolist()} == expect
    cross = [(i, j) for i, j in expect
             if gt[part.members[i][0]] != gt[part.members[j][0]]]
    assert cross


def test_far_clouds_have_no_cross_edges(rng):
    pts = np.r_[rng.uniform(0, 0.3, (100, 3)), rng.uniform(0, 0.3, (100, 3)) + [1.3, 0, 0]]
    part = SuperpointPartition.from_labels(np.r_[np.zeros(100, int), np.ones(100, int)])
    assert len(superpoint_adjacency(PointCloud(pts), part, 0.05).edges()) == 0


@given(st.integers(2, 12), st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), max_size=30))
def test_pairs_within_matches_floyd(n, raw):
    edges = [(a % n, b % n) for a, b in raw if a % n != b % n]
    graph = AdjacencyGraph.from_pairs(n, np.array(edges).reshape(-1, 2))
    for md in (1, 2, 3):
        pairs, dist = pairs_within(graph, md)
        d = hop_distances(n, graph.edges().tolist())
        expect = {(i, j): int(d[i, j]) for i in range(n) for j in range(i + 1, n) if d[i, j] <= md}
        assert dict(zip(map(tuple, pairs.tolist()), dist.tolist())) == expect


@given(st.integers(1, 15), st.lists(st.tuples(st.integers(0, 14), st.integers(0, 14)), max_size=40))
def test_adjacency_symmetric_without_self_loops(n, raw):
    graph = AdjacencyGraph.from_pairs(n, np.array([(a % n, b % n) for a, b in raw]).reshape(-1, 2))
    for i, nb in enumerate(graph.neighbors):
        assert i not in nb.tolist()
        for j in nb.tolist():
            assert i in graph.neighbors[j].tolist()


def test_segmentation_is_deterministic(small_scene):
    a = felzenszwalb_segment(small_scene.cloud)
    b = felzenszwalb_segment(small_scene.cloud)
    assert np.array_equal(a.label, b.label)
