import numpy as np
import pytest

from ridgetree.grid import DensityField, GridGeometry
from ridgetree.regions import RegionLabelVolume, region_report
from ridgetree.tree import SkeletonTree


def two_region_labels():
    geom = GridGeometry((10, 4, 4))
    labels = np.zeros(geom.num_voxels, dtype=np.int32)
    i, _, _ = geom.voxel_of(np.arange(geom.num_voxels))
    labels[(i >= 1) & (i < 5)] = 1
    labels[(i >= 5) & (i < 9)] = 2
    return RegionLabelVolume(
        geom, labels, {0: "background", 1: "left", 2: "right"},
        {1: "ipsi", 2: "contra"},
    )


def weighted_tree(positions, weights):
    pts = np.asarray(positions, dtype=float)
    tree = SkeletonTree(pts, np.arange(-1, len(pts) - 1), root=0)
    tree.weight = np.asarray(weights, dtype=float)
    return tree


def test_all_weight_in_one_region():
    labels = two_region_labels()
    tree = weighted_tree([[2, 1, 1], [3, 1, 1]], [4.0, 6.0])
    rep = region_report(tree, labels)
    assert rep.rows[0].label == 1
    assert rep.rows[0].percent == 100.0
    assert rep.rows[0].rank == 1 and rep.rows[0].covered
    assert not rep.rows[1].covered


def test_seventy_thirty_split_exact():
    labels = two_region_labels()
    tree = weighted_tree([[2, 1, 1], [7, 1, 1]], [70.0, 30.0])
    rep = region_report(tree, labels)
    by_label = {r.label: r for r in rep.rows}
    assert by_label[1].percent == pytest.approx(70.0)
    assert by_label[2].percent == pytest.approx(30.0)
    assert by_label[1].rank == 1 and by_label[2].rank == 2
    assert rep.total_weight == pytest.approx(100.0)


def test_density_field_source_and_conservation(rng):
    labels = two_region_labels()
    geom = labels.geometry
    vals = (rng.random(geom.num_voxels) * 5).astype(np.float32)
    field = DensityField(geom, vals)
    rep = region_report(field, labels)
    total = rep.total_weight + rep.background_weight
    assert total == pytest.approx(float(vals.sum(dtype=np.float64)), rel=1e-12)


def test_shape_mismatch_is_structural_error(rng):
    labels = two_region_labels()
    other = DensityField(GridGeometry((5, 5, 5)), np.ones(125))
    with pytest.raises(ValueError, match="does not match"):
        region_report(other, labels)


def test_node_outside_grid_counts_as_background():
    labels = two_region_labels()
    tree = weighted_tree([[2, 1, 1], [500, 1, 1]], [10.0, 99.0])
    rep = region_report(tree, labels)
    assert rep.background_weight == pytest.approx(99.0)
    assert rep.total_weight == pytest.approx(10.0)


def test_coverage_against_reference():
    labels = two_region_labels()
    geom = labels.geometry
    # reference has weight 30 in region 1 and 70 in region 2
    ref_vals = np.zeros(geom.num_voxels, dtype=np.float32)
    ref_vals[int(geom.linear_index(2, 1, 1))] = 30.0
    ref_vals[int(geom.linear_index(7, 1, 1))] = 70.0
    reference = DensityField(geom, ref_vals)
    # the skeleton only touches region 1
    tree = weighted_tree([[2, 2, 2]], [5.0])
    rep = region_report(tree, labels, reference)
    assert rep.coverage["all"] == pytest.approx(0.3)
    assert rep.coverage["ipsi"] == pytest.approx(1.0)
    assert rep.coverage["contra"] == pytest.approx(0.0)


def test_self_coverage_is_one_when_any_region_touched():
    labels = two_region_labels()
    tree = weighted_tree([[2, 1, 1]], [5.0])
    rep = region_report(tree, labels)
    assert rep.coverage["all"] == 1.0


def test_label_volume_round_trip(tmp_path):
    labels = two_region_labels()
    path = tmp_path / "labels.bin"
    labels.write(path)
    back = RegionLabelVolume.read(path)
    assert back.geometry.dims == labels.geometry.dims
    assert np.array_equal(back.labels, labels.labels)
    assert back.names == labels.names
    assert back.hemispheres == labels.hemispheres


def test_report_files(tmp_path):
    labels = two_region_labels()
    tree = weighted_tree([[2, 1, 1], [7, 1, 1]], [70.0, 30.0])
    rep = region_report(tree, labels)
    rep.write(tmp_path / "report.txt")
    rep.write_tsv(tmp_path / "report.tsv")
    text = (tmp_path / "report.txt").read_text()
    assert "left" in text and "coverage[all]" in text
    tsv = (tmp_path / "report.tsv").read_text().splitlines()
    assert tsv[0].startswith("rank\tlabel")
    assert len(tsv) == 3


def test_negative_labels_rejected():
    geom = GridGeometry((2, 2, 2))
    with pytest.raises(ValueError, match="non-negative"):
        RegionLabelVolume(geom, np.full(8, -1, dtype=np.int32), {})


def test_tree_without_weights_rejected(rng):
    labels = two_region_labels()
    tree = SkeletonTree(np.array([[2.0, 1, 1]]), np.array([-1]), root=0)
    with pytest.raises(ValueError, match="no summary weights"):
        region_report(tree, labels)
