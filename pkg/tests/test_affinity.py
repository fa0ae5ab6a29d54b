import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from superseg3d.affinity import (
    AffinityMatrix, LabelHistogram, aggregate_affinity, build_affinity_matrix, compute_histogram,
    single_view_affinity,
)
from superseg3d.geometry import Projection, project_points
from superseg3d.masks2d import MaskImage
from superseg3d.oversegment import AdjacencyGraph, SuperpointPartition
from superseg3d import synth
from microscene import micro_scene
from oracles import naive_affinity


def hist(d):
    return LabelHistogram(d)


def test_histogram_counts_visible_labelled_points():
    labels = np.zeros((4, 4), int)
    labels[0, :] = 1
    labels[1, :] = 2
    pix = np.array([[0.5, 0.5]] * 6 + [[1.5, 1.5]] * 4 + [[2.5, 0.5]] * 5)
    vis = np.r_[np.ones(10, bool), np.zeros(5, bool)]
    proj = Projection(pix, np.ones(15), vis)
    h = compute_histogram(np.arange(15), proj, MaskImage.from_labels(labels))
    assert h.counts == {1: 6, 2: 4}


def test_background_and_invisible_give_empty_histogram():
    proj = Projection(np.array([[0.5, 0.5], [1.5, 0.5]]), np.ones(2), np.array([True, False]))
    masks = MaskImage.from_labels(np.array([[0, 1], [0, 0]]))
    assert not compute_histogram([0, 1], proj, masks)


def test_histogram_rejects_background_label():
    with pytest.raises(ValueError):
        hist({0: 3})


@pytest.mark.parametrize("a, b, expected", [
    ({1: 2, 4: 1}, {1: 2, 4: 1}, 1.0),
    ({1: 5}, {2: 5}, 0.0),
    ({1: 3, 2: 4}, {2: 4, 3: 3}, 16 / 25),
])
def test_single_view_affinity(a, b, expected):
    assert single_view_affinity(hist(a), hist(b)) == pytest.approx(expected, abs=1e-15)


def test_single_view_no_evidence():
    assert single_view_affinity(hist({}), hist({1: 2})) is None


def test_aggregate_examples():
    assert aggregate_affinity([(1.0, 1, 1), (0.0, 1, 1)]) == (0.5, 2.0)
    a, w = aggregate_affinity([(1.0, 1, 1), (0.0, 0.1, 0.1)])
    assert a == pytest.approx(1.0 / 1.01, abs=1e-15) and w == pytest.approx(1.01)
    assert aggregate_affinity([(0.7, 0.0, 1.0)]) == (None, 0.0)
    assert aggregate_affinity([(None, 1.0, 1.0)]) == (None, 0.0)


@pytest.mark.parametrize("seed", range(20))
def test_matrix_matches_triple_loop(seed):
    cloud, part, graph, views = micro_scene(seed)
    mat = build_affinity_matrix(cloud, part, graph, views, tolerance=0.05)
    expect = naive_affinity(cloud.positions, part.label, part.num_superpoints,
                            graph.edges().tolist(), views, 0.05)
    got = {tuple(p): (a, w) for p, a, w in zip(mat.pairs.tolist(), mat.affinity, mat.weight_total)}
    assert set(got) == set(expect)
    for key, (a, w) in expect.items():
        ga, gw = got[key]
        assert gw == pytest.approx(w, abs=1e-12)
        if a is None:
            assert math.isnan(ga)
        else:
            assert abs(ga - a) <= 1e-12
            assert 0.0 <= ga <= 1.0
    dense = mat.to_dense()
    assert np.array_equal(dense, dense.T, equal_nan=True)


def test_shared_mask_gives_full_affinity():
    cloud, part, graph, views = micro_scene(3)
    views = [replace(v, masks=MaskImage.from_labels(np.ones((12, 16), int))) for v in views]
    mat = build_affinity_matrix(cloud, part, graph, views)
    ok = mat.has_evidence
    assert ok.any() and np.all(mat.affinity[ok] == 1.0)


def test_never_co_visible_pair_has_no_evidence():
    cloud, part, graph, views = micro_scene(4)
    views = [replace(v, depth=np.zeros_like(v.depth)) for v in views]
    mat = build_affinity_matrix(cloud, part, graph, views)
    assert not mat.has_evidence.any()
    assert np.all(mat.weight_total == 0)


def test_w_min_demotes_weak_pairs():
    cloud, part, graph, views = micro_scene(5)
    full = build_affinity_matrix(cloud, part, graph, views)
    cut = np.nanmedian(np.where(full.has_evidence, full.weight_total, np.nan))
    demoted = build_affinity_matrix(cloud, part, graph, views, w_min=cut)
    weak = full.has_evidence & (full.weight_total < cut)
    assert np.all(np.isnan(demoted.affinity[weak]))
    strong = full.has_evidence & ~weak
    assert np.array_equal(demoted.affinity[strong], full.affinity[strong])


@pytest.mark.parametrize("seed", range(5))
def test_view_order_and_threads(seed):
    cloud, part, graph, views = micro_scene(seed)
    base = build_affinity_matrix(cloud, part, graph, views)
    perm = build_affinity_matrix(cloud, part, graph, views[::-1])
    np.testing.assert_allclose(base.affinity, perm.affinity, atol=1e-12, rtol=0)
    threaded = build_affinity_matrix(cloud, part, graph, views, threads=4)
    assert base.affinity.tobytes() == threaded.affinity.tobytes()


@pytest.mark.parametrize("seed", range(5))
def test_invisible_view_changes_nothing(seed):
    cloud, part, graph, views = micro_scene(seed)
    base = build_affinity_matrix(cloud, part, graph, views)
    blind = replace(views[0], depth=np.zeros_like(views[0].depth), frame_id="zzz")
    more = build_affinity_matrix(cloud, part, graph, views + [blind])
    assert base.affinity.tobytes() == more.affinity.tobytes()


def test_save_load_round_trip(tmp_path):
    cloud, part, graph, views = micro_scene(7)
    mat = build_affinity_matrix(cloud, part, graph, views)
    mat.save(tmp_path / "a.txt")
    back = AffinityMatrix.load(tmp_path / "a.txt")
    assert np.array_equal(back.pairs, mat.pairs)
    assert back.affinity.tobytes() == mat.affinity.tobytes()
    assert back.weight_total.tobytes() == mat.weight_total.tobytes()


def test_stool_legs_share_histogram():
    """Two legs under one correct mask get identical single-bin histograms.

    Leg shafts only: within the depth tolerance of the floor, floor pixels
    pass the visibility test too.
    """
    spec = synth.stool_scene_spec(seed=0, num_views=8)
    scene = synth.build_scene(spec)
    stool = [k for k, v in scene.names.items() if v == "stool"][0]
    legs = [p for p in spec.objects[0].parts if p.shape == "cylinder"]
    pos = scene.cloud.positions
    found = 0
    for view in scene.views:
        proj = project_points(scene.cloud, view)
        leg_hists = []
        for leg in legs[:2]:
            near = np.hypot(pos[:, 0] - leg.x, pos[:, 1] - leg.y) <= leg.dims[0] + 1e-6
            idx = np.nonzero(near & (scene.gt_ids == stool) & (pos[:, 2] > 0.1) & (pos[:, 2] < leg.top - 0.05))[0]
            leg_hists.append(compute_histogram(idx, proj, view.masks))
        if all(leg_hists):
            found += 1
            assert len(leg_hists[0].counts) == 1
            assert leg_hists[0].counts.keys() == leg_hists[1].counts.keys()
    assert found > 0


@given(st.dictionaries(st.integers(1, 6), st.integers(1, 50), min_size=1),
       st.dictionaries(st.integers(1, 6), st.integers(1, 50), min_size=1), st.integers(1, 9))
def test_cosine_scale_invariance_and_range(a, b, k):
    base = single_view_affinity(hist(a), hist(b))
    scaled = single_view_affinity(hist({l: c * k for l, c in a.items()}), hist({l: c * k for l, c in b.items()}))
    assert 0.0 <= base <= 1.0
    assert scaled == pytest.approx(base, abs=1e-12)
    assert single_view_affinity(hist(a), hist(b)) == single_view_affinity(hist(b), hist(a))
