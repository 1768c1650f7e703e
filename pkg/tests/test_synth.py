import numpy as np
import pytest

from ridgetree.grid import GridGeometry
from ridgetree.synth import (
    sample_skeleton_points,
    straight_tube_tree,
    synth_tree_volume,
    y_fixture,
    y_junction_tree,
)


def test_straight_segment_ridge_hits_peak_exactly():
    geom = GridGeometry((12, 5, 5))
    tree = straight_tube_tree((1, 2, 2), (10, 2, 2))
    field = synth_tree_volume(tree, geom, tube_sigma=1.0, peak=100.0)
    vol = field.volume()
    for i in range(1, 11):
        assert vol[i, 2, 2] == np.float32(100.0)
    assert vol[0, 0, 0] < 100.0


def test_peak_zero_gives_pure_noise(rng):
    geom = GridGeometry((6, 6, 6))
    tree = straight_tube_tree((1, 1, 1), (4, 4, 4))
    field = synth_tree_volume(tree, geom, peak=0.0, noise_sigma=5.0, seed=3)
    ref = np.maximum(np.random.default_rng(3).normal(0, 5.0, 216), 0.0)
    assert np.allclose(field.values, ref.astype(np.float32))


def test_deterministic_by_seed():
    geom = GridGeometry((10, 10, 10))
    tree = straight_tube_tree((2, 2, 2), (7, 7, 7))
    a = synth_tree_volume(tree, geom, noise_sigma=3.0, seed=11)
    b = synth_tree_volume(tree, geom, noise_sigma=3.0, seed=11)
    c = synth_tree_volume(tree, geom, noise_sigma=3.0, seed=12)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_out_of_bounds_skeleton_rejected():
    geom = GridGeometry((5, 5, 5))
    tree = straight_tube_tree((1, 1, 1), (9, 1, 1))
    with pytest.raises(ValueError, match="outside the grid"):
        synth_tree_volume(tree, geom)


def test_gap_removes_samples():
    tree = straight_tube_tree((0, 0, 0), (10, 0, 0))
    full = sample_skeleton_points(tree, 0.5)
    gapped = sample_skeleton_points(tree, 0.5, gaps=[(1, 0.4, 0.2)])
    assert len(gapped) < len(full)
    xs = gapped[:, 0]
    assert not np.any((xs >= 4.0) & (xs < 6.0))


def test_gapped_y_matches_bruteforce_distance_oracle():
    # per-voxel intensity equals peak * exp(-d^2 / 2 sigma^2) with d the
    # distance to the sampled (gapped) skeleton, scanned exhaustively here
    geom = GridGeometry((16, 16, 8))
    tree = y_junction_tree((8, 2, 4), (8, 8, 4), (3, 14, 4), (13, 14, 4))
    gaps = [(2, 0.4, 0.3)]
    sigma, peak = 1.3, 50.0
    field = synth_tree_volume(
        tree, geom, tube_sigma=sigma, peak=peak, gaps=gaps, sample_step=0.5
    )
    pts = sample_skeleton_points(tree, 0.5, gaps)
    lin = np.arange(geom.num_voxels)
    i, j, k = geom.voxel_of(lin)
    coords = geom.position(i, j, k)
    for t in range(0, geom.num_voxels, 37):
        d2 = ((coords[t] - pts) ** 2).sum(axis=1).min()
        expect = peak * np.exp(-d2 / (2 * sigma * sigma))
        assert field.values[t] == pytest.approx(expect, rel=1e-6)


def test_y_fixture_gap_blanks_signal():
    clean, tree = y_fixture(4, dims=(48, 48, 48), noise_frac=0.0)
    gapped, _ = y_fixture(4, dims=(48, 48, 48), noise_frac=0.0, gap_voxels=4)
    assert clean.values.sum() > gapped.values.sum()
    mid = (tree.positions[1] + tree.positions[2]) / 2
    mid_idx = tuple(np.round(mid).astype(int))
    assert gapped.volume()[mid_idx] < clean.volume()[mid_idx]
