import numpy as np
import pytest
from hypothesis import given, strategies as st

from superseg3d.masks2d import (
    MaskImage, RawMaskSet, densify, load_binary_masks, load_frame_masks, load_mask_image,
    resolve_overlaps, save_mask_image,
)
from superseg3d import io as sio
from oracles import pixel_scan_overlaps


def rect(shape, r0, r1, c0, c1):
    m = np.zeros(shape, bool)
    m[r0:r1, c0:c1] = True
    return m


def test_disjoint_masks_survive():
    out = resolve_overlaps(RawMaskSet([rect((10, 10), 0, 3, 0, 3), rect((10, 10), 5, 9, 5, 9)], [0.5, 0.7]))
    assert out.num_masks == 2
    # renumbered by descending score
    assert out.labels[6, 6] == 1 and out.labels[1, 1] == 2


def test_contained_mask_keeps_ring():
    inner, outer = rect((10, 10), 3, 6, 3, 6), rect((10, 10), 1, 9, 1, 9)
    out = resolve_overlaps(RawMaskSet([inner, outer], [0.9, 0.8]))
    assert np.all(out.labels[inner] == 1)
    assert np.all(out.labels[outer & ~inner] == 2)


def test_score_ties_prefer_lower_index():
    a = rect((5, 5), 0, 5, 0, 3)
    b = rect((5, 5), 0, 5, 2, 5)
    out = resolve_overlaps(RawMaskSet([a, b], [0.5, 0.5]))
    assert np.all(out.labels[:, 2] == 1)


def test_missing_scores_rank_by_area():
    small, big = rect((8, 8), 0, 2, 0, 2), rect((8, 8), 0, 6, 0, 6)
    out = resolve_overlaps(RawMaskSet([small, big]))
    assert out.num_masks == 1 and out.labels[0, 0] == 1


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        RawMaskSet([np.zeros((4, 4), bool), np.zeros((4, 5), bool)], [0.1, 0.2])


def test_empty_mask_set():
    out = resolve_overlaps(RawMaskSet([]), shape=(3, 4))
    assert out.num_masks == 0 and out.labels.shape == (3, 4)


def test_random_rectangles_match_pixel_scan(rng):
    for _ in range(5):
        shape = (24, 32)
        masks = []
        for _ in range(20):
            r0, c0 = rng.integers(0, 20), rng.integers(0, 28)
            masks.append(rect(shape, r0, r0 + rng.integers(1, 10), c0, c0 + rng.integers(1, 12)))
        scores = rng.random(20).round(2)  # rounding creates ties
        out = resolve_overlaps(RawMaskSet(masks, scores))
        owner = pixel_scan_overlaps(masks, scores)
        covered = owner >= 0
        assert np.array_equal(out.labels > 0, covered)
        assert np.sum([np.sum(out.labels == k) for k in range(1, out.num_masks + 1)]) == covered.sum()
        # same pixel grouping as the per-pixel scan, and labels follow score order
        for k in np.unique(owner[covered]):
            labels = np.unique(out.labels[owner == k])
            assert len(labels) == 1
        ranks = {int(out.labels[owner == k][0]): (-scores[k], k) for k in np.unique(owner[covered])}
        assert [ranks[k] for k in sorted(ranks)] == sorted(ranks.values())


def test_load_mask_image_densifies(tmp_path):
    lab = np.zeros((6, 6), np.uint16)
    lab[0:2] = 5
    lab[4:] = 9
    sio.write_png16(tmp_path / "f.png", lab)
    img = load_mask_image(tmp_path / "f.png")
    assert img.num_masks == 2
    assert set(np.unique(img.labels)) == {0, 1, 2}
    assert np.array_equal(img.labels == 0, lab == 0)
    with pytest.raises(ValueError):
        load_mask_image(tmp_path / "f.png", expected_shape=(5, 6))


def test_all_zero_and_round_trip(tmp_path):
    save_mask_image(tmp_path / "z.png", MaskImage.from_labels(np.zeros((3, 3), int)))
    assert load_mask_image(tmp_path / "z.png").num_masks == 0
    img = MaskImage.from_labels(np.array([[0, 1], [2, 2]]))
    save_mask_image(tmp_path / "r.png", img)
    assert np.array_equal(load_mask_image(tmp_path / "r.png").labels, img.labels)


def test_binary_mask_directory(tmp_path):
    d = tmp_path / "frame0"
    d.mkdir()
    from PIL import Image
    Image.fromarray((rect((6, 6), 0, 4, 0, 4) * 255).astype(np.uint8)).save(d / "mask_0.png")
    Image.fromarray((rect((6, 6), 2, 6, 2, 6) * 255).astype(np.uint8)).save(d / "mask_1.png")
    (d / "scores.txt").write_text("0.3\n0.8\n")
    raw = load_binary_masks(d)
    assert len(raw.masks) == 2
    img = load_frame_masks(tmp_path, "frame0", (6, 6))
    assert img.labels[3, 3] == 1 and img.labels[0, 0] == 2


@given(st.lists(st.integers(0, 30), min_size=1, max_size=60))
def test_densify_preserves_partition(values):
    arr = np.array(values)
    dense, _ = densify(arr)
    assert set(np.unique(dense[dense > 0])) == set(range(1, len(np.unique(arr[arr > 0])) + 1))
    assert np.array_equal(dense == 0, arr == 0)
    same_before = arr[:, None] == arr[None, :]
    same_after = dense[:, None] == dense[None, :]
    assert np.array_equal(same_before, same_after)
