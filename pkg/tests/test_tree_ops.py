import numpy as np
import pytest

from conftest import random_scored_tree, random_tree
from oracles import brute_nearest
from ridgetree._nn import voxel_centers
from ridgetree.grid import DensityField, GridGeometry
from ridgetree.tree import (
    SkeletonTree,
    assign_thickness,
    assign_weights,
    combine_scores,
    density_scores,
    leaf_burner,
    relative_threshold,
    root_grower,
    smooth_scores,
    top_k_branches,
)


def chain_tree(n, step=1.0):
    pos = np.zeros((n, 3))
    pos[:, 0] = np.arange(n) * step
    parent = np.arange(-1, n - 1)
    return SkeletonTree(pos, parent, root=0)


class TestSkeletonTree:
    def test_invariants(self):
        with pytest.raises(ValueError, match="parent -1"):
            SkeletonTree(np.zeros((2, 3)), np.array([0, 0]), root=0)
        with pytest.raises(ValueError, match="exactly one"):
            SkeletonTree(np.zeros((2, 3)), np.array([-1, -1]), root=0)

    def test_topo_order_parents_first(self, rng):
        tree = random_tree(rng, 40)
        order = tree.topo_order()
        seen = set()
        for v in order:
            p = tree.parent[v]
            assert p == -1 or p in seen
            seen.add(int(v))

    def test_subtree_must_keep_root_and_parents(self, rng):
        tree = random_tree(rng, 10)
        bad = np.ones(10, dtype=bool)
        bad[tree.root] = False
        with pytest.raises(ValueError, match="root"):
            tree.subtree(bad)


class TestDensityScores:
    def test_single_node_gets_total_mass(self, rng):
        geom = GridGeometry((6, 6, 6))
        vals = (rng.random(216) * 9).astype(np.float32)
        field = DensityField(geom, vals)
        tree = SkeletonTree(np.array([[2.0, 2.0, 2.0]]), np.array([-1]), root=0)
        s = density_scores(tree, field, beta=100.0)
        assert s[0] == pytest.approx(vals.sum(dtype=np.float64), rel=1e-12)

    def test_equidistant_voxel_goes_to_smaller_id(self):
        geom = GridGeometry((3, 1, 1))
        field = DensityField(geom, np.array([0, 7, 0], dtype=np.float32))
        # nodes at x=0 and x=2; the voxel at x=1 is exactly between them
        tree = SkeletonTree(
            np.array([[0.0, 0, 0], [2.0, 0, 0]]), np.array([-1, 0]), root=0
        )
        s = density_scores(tree, field, beta=10.0)
        assert s[0] == 7.0 and s[1] == 0.0

    def test_matches_bruteforce_scan(self, rng):
        geom = GridGeometry((8, 7, 6), spacing=(1.0, 1.3, 0.8))
        vals = (rng.random(geom.num_voxels) * 5).astype(np.float32)
        field = DensityField(geom, vals)
        tree = random_tree(rng, 10, span=6.0)
        beta = 2.5
        s = density_scores(tree, field, beta)
        idx, d2 = brute_nearest(voxel_centers(geom), tree.positions)
        expect = np.zeros(10)
        for t in range(geom.num_voxels):
            if d2[t] <= beta * beta:
                expect[idx[t]] += float(vals[t])
        assert np.allclose(s, expect, rtol=1e-12)

    def test_beta_cap_excludes_far_voxels(self):
        geom = GridGeometry((10, 1, 1))
        field = DensityField(geom, np.full(10, 2.0, dtype=np.float32))
        tree = SkeletonTree(np.array([[0.0, 0, 0]]), np.array([-1]), root=0)
        s = density_scores(tree, field, beta=3.0)
        assert s[0] == 2.0 * 4  # voxels at x = 0..3 inclusive


class TestSmoothScores:
    def test_k_zero_identity(self, rng):
        tree = random_tree(rng, 20)
        raw = rng.random(20)
        assert np.array_equal(smooth_scores(tree, raw, 0), raw)

    def test_chain_center_full_window(self):
        tree = chain_tree(7)
        raw = np.array([1.0, 2, 3, 4, 5, 6, 7])
        s = smooth_scores(tree, raw, 3)
        assert s[3] == pytest.approx(raw.mean())

    def test_sibling_branches_excluded(self):
        #     0 - 1 - 2   (branch a)
        #          \- 3   (branch b)
        pos = np.zeros((4, 3))
        tree = SkeletonTree(pos, np.array([-1, 0, 1, 1]), root=0)
        raw = np.array([10.0, 20.0, 40.0, 80.0])
        s = smooth_scores(tree, raw, 1)
        # window of 2: itself, its parent 1 (hop 1); sibling 3 excluded
        assert s[2] == pytest.approx((40 + 20) / 2)
        assert s[3] == pytest.approx((80 + 20) / 2)
        # window of 1: parent 0 and both children
        assert s[1] == pytest.approx((20 + 10 + 40 + 80) / 4)

    def test_matches_explicit_window_enumeration(self, rng):
        tree = random_tree(rng, 60)
        raw = rng.random(60) * 10
        k = 3
        s = smooth_scores(tree, raw, k)
        kids = tree.children_lists()
        for v in range(60):
            window = {v}
            up, d = v, 0
            while d < k and tree.parent[up] >= 0:
                up = int(tree.parent[up])
                window.add(up)
                d += 1
            frontier = [v]
            for _ in range(k):
                frontier = [int(c) for f in frontier for c in kids[f]]
                window.update(frontier)
            assert s[v] == pytest.approx(np.mean(raw[sorted(window)]))

    def test_not_idempotent_for_positive_k(self, rng):
        tree = random_tree(rng, 30)
        raw = rng.random(30) * 5
        once = smooth_scores(tree, raw, 4)
        twice = smooth_scores(tree, once, 4)
        assert not np.allclose(once, twice)


class TestSimplification:
    def test_leaf_burner_identity_when_all_above(self):
        tree = chain_tree(6)
        out = leaf_burner(tree, 1.0, scores=np.full(6, 5.0))
        assert len(out) == 6

    def test_leaf_burner_removes_low_tail(self):
        tree = chain_tree(5)
        scores = np.array([9.0, 9.0, 9.0, 1.0, 1.0])
        out = leaf_burner(tree, 2.0, scores=scores)
        assert len(out) == 3
        assert out.positions[:, 0].max() == 2.0

    def test_leaf_burner_stuck_at_high_score_island(self):
        # low-score neck before a high-score leaf: the island survives
        tree = chain_tree(6)
        scores = np.array([9.0, 9.0, 1.0, 1.0, 1.0, 9.0])
        out = leaf_burner(tree, 2.0, scores=scores)
        assert len(out) == 6  # burning never reaches past the bright leaf

    def test_root_grower_identity_when_all_above(self):
        tree = chain_tree(6)
        out = root_grower(tree, 1.0, scores=np.full(6, 5.0))
        assert len(out) == 6

    def test_root_grower_breaks_at_gap(self):
        tree = chain_tree(6)
        scores = np.array([9.0, 9.0, 1.0, 9.0, 9.0, 9.0])
        out = root_grower(tree, 2.0, scores=scores)
        assert len(out) == 2  # everything distal to the gap is dropped

    def test_root_never_removed(self):
        tree = chain_tree(3)
        scores = np.array([0.0, 0.0, 0.0])
        assert len(leaf_burner(tree, 5.0, scores=scores)) == 1
        assert len(root_grower(tree, 5.0, scores=scores)) == 1

    def test_nestedness_in_tau_for_both_strategies(self, rng):
        for _ in range(25):
            tree = random_scored_tree(rng, int(rng.integers(2, 80)))
            taus = np.sort(rng.random(4) * 12)
            for op in (leaf_burner, root_grower):
                prev = None
                for tau in taus:
                    kept = op(tree, float(tau))
                    ids = set(
                        map(tuple, np.round(kept.positions, 9).tolist())
                    )
                    if prev is not None:
                        assert ids <= prev
                    prev = ids

    def test_matches_naive_iterative_burning(self, rng):
        # reference: literally remove qualifying leaves until a fixed point
        tree = random_scored_tree(rng, 40)
        tau = float(np.median(tree.smoothed_score))
        out = leaf_burner(tree, tau)
        alive = set(range(40))
        while True:
            kids = {v: [] for v in alive}
            for v in alive:
                p = int(tree.parent[v])
                if p >= 0 and p in alive:
                    kids[p].append(v)
            removable = [
                v for v in alive
                if not kids[v] and v != tree.root and tree.smoothed_score[v] <= tau
            ]
            if not removable:
                break
            alive -= set(removable)
        expect = tree.positions[sorted(alive)]
        assert np.array_equal(np.sort(out.positions, axis=0), np.sort(expect, axis=0))

    def test_relative_threshold(self):
        tree = chain_tree(4)
        s = np.array([1.0, 2.0, 3.0, 6.0])
        assert relative_threshold(tree, 0.2, s) == pytest.approx(0.2 * 3.0)


class TestCombineScores:
    def test_weighted_sum(self):
        tree = chain_tree(3)
        tree.density_score = np.array([1.0, 2.0, 3.0])
        tree.vector_score = np.array([0.5, 0.5, 1.0])
        s = combine_scores(tree, alpha=0.8)
        assert np.allclose(s, 0.8 * tree.density_score + 0.2 * tree.vector_score)

    def test_missing_vector_score_counts_as_zero(self):
        tree = chain_tree(3)
        tree.density_score = np.array([1.0, 2.0, 3.0])
        assert np.allclose(combine_scores(tree, 0.9), 0.9 * tree.density_score)

    def test_alpha_range_checked(self):
        tree = chain_tree(2)
        tree.density_score = np.ones(2)
        with pytest.raises(ValueError):
            combine_scores(tree, 1.5)


class TestWeights:
    def test_single_node_conserves_total_mass(self, rng):
        geom = GridGeometry((5, 5, 5))
        vals = (rng.random(125) * 7).astype(np.float32)
        field = DensityField(geom, vals)
        tree = SkeletonTree(np.array([[2.0, 2, 2]]), np.array([-1]), root=0)
        assign_weights(tree, field, beta_w=100.0)
        assert tree.weight[0] == pytest.approx(vals.sum(dtype=np.float64), rel=1e-12)

    def test_two_node_split_matches_bruteforce(self, rng):
        geom = GridGeometry((8, 6, 6))
        vals = (rng.random(geom.num_voxels) * 4).astype(np.float32)
        field = DensityField(geom, vals)
        tree = SkeletonTree(
            np.array([[1.5, 2.5, 2.5], [6.0, 3.0, 2.0]]), np.array([-1, 0]), root=0
        )
        beta_w = 4.0
        assign_weights(tree, field, beta_w)
        idx, d2 = brute_nearest(voxel_centers(geom), tree.positions)
        expect = np.zeros(2)
        for t in range(geom.num_voxels):
            if d2[t] < beta_w * beta_w:
                expect[idx[t]] += float(vals[t])
        assert np.allclose(tree.weight, expect, rtol=1e-12)

    def test_cap_is_strict(self):
        geom = GridGeometry((5, 1, 1))
        field = DensityField(geom, np.full(5, 3.0, dtype=np.float32))
        tree = SkeletonTree(np.array([[0.0, 0, 0]]), np.array([-1]), root=0)
        assign_weights(tree, field, beta_w=2.0)
        assert tree.weight[0] == 3.0 * 2  # x=0,1; x=2 is at exactly beta_w

    def test_conservation_after_simplification(self, rng):
        geom = GridGeometry((10, 10, 10))
        vals = (rng.random(1000) * 6).astype(np.float32)
        field = DensityField(geom, vals)
        tree = random_scored_tree(rng, 30)
        tree.positions = rng.uniform(0, 9, size=(30, 3))
        simplified = leaf_burner(tree, float(np.median(tree.smoothed_score)))
        beta_w = 300.0
        assign_weights(simplified, field, beta_w)
        idx, d2 = brute_nearest(voxel_centers(geom), simplified.positions)
        covered = d2 < beta_w * beta_w
        total = float(vals[covered].sum(dtype=np.float64))
        assert simplified.weight.sum() == pytest.approx(total, rel=1e-9)


class TestThickness:
    def test_formula(self):
        geom = GridGeometry((3, 3, 1))
        field = DensityField(geom, np.full(9, 5.0, dtype=np.float32))
        tree = SkeletonTree(np.array([[1.0, 1, 0]]), np.array([-1]), root=0)
        assign_thickness(tree, field, zeta=10.0, c=1.0)
        assert tree.radius[0] == pytest.approx(3.0)  # N = 9 voxels

    def test_zero_count_gets_minimum_radius(self):
        geom = GridGeometry((4, 1, 1))
        field = DensityField(geom, np.zeros(4, dtype=np.float32))
        tree = SkeletonTree(np.array([[0.0, 0, 0]]), np.array([-1]), root=0)
        assign_thickness(tree, field, zeta=2.0, c=1.5)
        assert tree.radius[0] == 1.5

    def test_matches_bruteforce_count(self, rng):
        geom = GridGeometry((7, 7, 7))
        vals = np.where(rng.random(343) < 0.4, rng.random(343) * 5, 0.0)
        field = DensityField(geom, vals.astype(np.float32))
        tree = random_tree(rng, 6, span=6.0)
        zeta, c = 2.0, 1.0
        assign_thickness(tree, field, zeta, c)
        idx, d2 = brute_nearest(voxel_centers(geom), tree.positions)
        counts = np.zeros(6, dtype=int)
        for t in range(343):
            if d2[t] <= zeta * zeta and field.values[t] > 0:
                counts[idx[t]] += 1
        expect = np.where(counts == 0, c, c * np.sqrt(counts))
        assert np.allclose(tree.radius, expect)


class TestTopK:
    def test_k_at_least_leaf_count_is_identity(self, rng):
        tree = random_tree(rng, 25)
        out = top_k_branches(tree, 25)
        assert len(out) == len(tree)

    def test_three_branch_star(self):
        # root with branches of length 5, 3, 1
        pos = np.array([
            [0.0, 0, 0],
            [5.0, 0, 0],
            [0.0, 3, 0],
            [0.0, 0, 1],
        ])
        tree = SkeletonTree(pos, np.array([-1, 0, 0, 0]), root=0)
        out = top_k_branches(tree, 2)
        assert len(out) == 3
        kept_x = set(np.round(out.positions[:, 1], 6).tolist())
        assert 3.0 in kept_x  # length-3 branch kept, length-1 dropped

    def test_matches_exhaustive_ranking(self, rng):
        tree = random_tree(rng, 50)
        elen = tree.edge_lengths()
        plen = np.zeros(50)
        for v in tree.topo_order():
            if tree.parent[v] >= 0:
                plen[v] = plen[tree.parent[v]] + elen[v]
        leaves = tree.leaves()
        k = 4
        ranked = sorted(leaves, key=lambda l: (-plen[l], l))[:k]
        keep = set()
        for leaf in ranked:
            v = int(leaf)
            while v >= 0:
                keep.add(v)
                v = int(tree.parent[v])
        out = top_k_branches(tree, k)
        assert len(out) == len(keep)
        got = {tuple(p) for p in np.round(out.positions, 9).tolist()}
        want = {tuple(p) for p in np.round(tree.positions[sorted(keep)], 9).tolist()}
        assert got == want

    def test_k_below_one_rejected(self, rng):
        with pytest.raises(ValueError):
            top_k_branches(random_tree(rng, 5), 0)
