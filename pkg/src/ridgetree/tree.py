"""Rooted skeleton trees: scoring, smoothing, simplification, summarization.

Trees carry per-node positions in physical units and a parent link (root
parent is -1). Scores drive the two simplification strategies:

* ``leaf_burner`` repeatedly deletes leaves whose score is at or below the
  threshold (the root is never deleted).
* ``root_grower`` keeps the maximal connected subtree of the root in which
  every non-root node scores at or above the threshold.

Summary weights assign each voxel's density to its nearest surviving node
(within a cap), so the tree conserves the total signal it covers.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ._nn import assign_voxels
from .grid import DensityField

__all__ = [
    "SkeletonTree",
    "density_scores",
    "combine_scores",
    "smooth_scores",
    "relative_threshold",
    "leaf_burner",
    "root_grower",
    "assign_weights",
    "assign_thickness",
    "top_k_branches",
]


@dataclass
class SkeletonTree:
    """A rooted tree embedded in physical space.

    Parameters
    ----------
    positions : (n, 3) float64
        Node coordinates in physical units (µm).
    parent : (n,) int64
        Index of each node's parent; the root has parent -1.
    root : int
        Index of the root node.
    source_vertex : (n,) int64, optional
        Linear grid index each node came from (-1 when synthetic).

    Score and summary attributes are filled by the pipeline stages and
    subset consistently whenever the tree is pruned.
    """

    positions: np.ndarray
    parent: np.ndarray
    root: int = 0
    source_vertex: np.ndarray | None = None
    density_score: np.ndarray | None = None
    vector_score: np.ndarray | None = None
    combined_score: np.ndarray | None = None
    smoothed_score: np.ndarray | None = None
    weight: np.ndarray | None = None
    radius: np.ndarray | None = None
    _order: np.ndarray | None = dc_field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.parent = np.ascontiguousarray(self.parent, dtype=np.int64)
        n = len(self.positions)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must have shape (n, 3)")
        if self.parent.shape != (n,):
            raise ValueError("parent must have shape (n,)")
        if not (0 <= self.root < n):
            raise ValueError(f"root index {self.root} out of range")
        if self.parent[self.root] != -1:
            raise ValueError("root must have parent -1")
        if np.count_nonzero(self.parent == -1) != 1:
            raise ValueError("exactly one node may have parent -1")
        if self.source_vertex is not None:
            self.source_vertex = np.ascontiguousarray(self.source_vertex, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.positions)

    # -- structure -------------------------------------------------------

    def children_lists(self) -> list[np.ndarray]:
        """Per-node arrays of child indices."""
        n = len(self)
        kids: list[list[int]] = [[] for _ in range(n)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append(v)
        return [np.array(c, dtype=np.int64) for c in kids]

    def topo_order(self) -> np.ndarray:
        """Node indices with every parent before its children (BFS from root)."""
        if self._order is not None and len(self._order) == len(self):
            return self._order
        n = len(self)
        kids = self.children_lists()
        order = np.empty(n, dtype=np.int64)
        order[0] = self.root
        head, tail = 0, 1
        while head < tail:
            v = order[head]
            head += 1
            for c in kids[v]:
                order[tail] = c
                tail += 1
        if tail != n:
            raise ValueError("tree is not connected to the root")
        self._order = order
        return order

    def leaves(self) -> np.ndarray:
        has_child = np.zeros(len(self), dtype=bool)
        has_child[self.parent[self.parent >= 0]] = True
        return np.flatnonzero(~has_child)

    def edge_lengths(self) -> np.ndarray:
        """Physical length of each node's parent edge (0 at the root)."""
        out = np.zeros(len(self), dtype=np.float64)
        v = np.flatnonzero(self.parent >= 0)
        d = self.positions[v] - self.positions[self.parent[v]]
        out[v] = np.sqrt((d * d).sum(axis=1))
        return out

    def subtree(self, keep: np.ndarray) -> "SkeletonTree":
        """Restriction to a node mask; the mask must be closed under parents
        and contain the root."""
        keep = np.asarray(keep, dtype=bool)
        if not keep[self.root]:
            raise ValueError("cannot drop the root")
        v = np.flatnonzero(keep)
        bad = (self.parent[v] >= 0) & ~keep[self.parent[v]]
        if bad.any():
            raise ValueError("keep mask is not closed under parent links")
        remap = -np.ones(len(self), dtype=np.int64)
        remap[v] = np.arange(len(v))
        new_parent = np.where(self.parent[v] >= 0, remap[self.parent[v]], -1)

        def _sub(a):
            return None if a is None else a[v].copy()

        return SkeletonTree(
            positions=self.positions[v].copy(),
            parent=new_parent,
            root=int(remap[self.root]),
            source_vertex=_sub(self.source_vertex),
            density_score=_sub(self.density_score),
            vector_score=_sub(self.vector_score),
            combined_score=_sub(self.combined_score),
            smoothed_score=_sub(self.smoothed_score),
            weight=_sub(self.weight),
            radius=_sub(self.radius),
        )


# -- scoring ---------------------------------------------------------------


def density_scores(tree: SkeletonTree, field: DensityField, beta: float) -> np.ndarray:
    """Per-node sum of densities of voxels whose nearest node is that node.

    Voxels farther than ``beta`` (inclusive) from every node contribute
    nowhere; nearest-node ties go to the smaller node id.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    assign, _ = assign_voxels(field.geometry, tree.positions, beta, inclusive=True)
    ok = assign >= 0
    return np.bincount(
        assign[ok], weights=field.values[ok].astype(np.float64), minlength=len(tree)
    )


def combine_scores(
    tree: SkeletonTree, alpha: float = 0.9
) -> np.ndarray:
    """Weighted sum alpha*density + (1-alpha)*vector of the stored raw scores.

    A missing vector score counts as zero, which for the relative threshold
    mode is equivalent to alpha = 1.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if tree.density_score is None:
        raise ValueError("density scores not assigned")
    sv = tree.vector_score if tree.vector_score is not None else 0.0
    return alpha * tree.density_score + (1.0 - alpha) * sv


def smooth_scores(tree: SkeletonTree, raw: np.ndarray, k: int) -> np.ndarray:
    """Average ``raw`` over each node's ancestors and descendants within k hops.

    The window of node v is v itself, its <=k nearest ancestors, and every
    descendant reachable in <=k child steps; sibling branches are excluded.
    k = 0 returns a copy.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    raw = np.asarray(raw, dtype=np.float64)
    n = len(tree)
    if raw.shape != (n,):
        raise ValueError("score array has wrong length")
    if k == 0:
        return raw.copy()

    parent = tree.parent
    total = raw.copy()
    count = np.ones(n, dtype=np.float64)

    # ancestors: follow parent chains up to k hops
    cur = parent.copy()
    for _ in range(k):
        valid = cur >= 0
        if not valid.any():
            break
        total[valid] += raw[cur[valid]]
        count[valid] += 1.0
        cur = np.where(valid, parent[np.maximum(cur, 0)], -1)

    # descendants: level-by-level scatter-add into parents
    has_parent = parent >= 0
    p = parent[has_parent]
    g = raw.copy()
    c = np.ones(n, dtype=np.float64)
    for _ in range(k):
        g_next = np.zeros(n, dtype=np.float64)
        c_next = np.zeros(n, dtype=np.float64)
        np.add.at(g_next, p, g[has_parent])
        np.add.at(c_next, p, c[has_parent])
        total += g_next
        count += c_next
        if not c_next.any():
            break
        g, c = g_next, c_next
    return total / count


def relative_threshold(tree: SkeletonTree, tau: float, scores: np.ndarray) -> float:
    """Absolute threshold tau * mean(score) over the tree's nodes."""
    return float(tau) * float(np.mean(scores))


# -- simplification ----------------------------------------------------------


def _resolve_scores(tree: SkeletonTree, scores: np.ndarray | None) -> np.ndarray:
    if scores is None:
        scores = tree.smoothed_score
    if scores is None:
        raise ValueError("no scores available; run scoring first")
    return np.asarray(scores, dtype=np.float64)


def leaf_burner(
    tree: SkeletonTree, threshold: float, scores: np.ndarray | None = None
) -> SkeletonTree:
    """Iteratively remove leaves with score <= threshold; fixed point.

    A node survives iff its subtree contains a score above the threshold
    (high-score islands beyond a weak neck are kept); the root always
    survives.
    """
    s = _resolve_scores(tree, scores)
    order = tree.topo_order()
    best = s.copy()
    parent = tree.parent
    for v in order[::-1]:
        p = parent[v]
        if p >= 0 and best[v] > best[p]:
            best[p] = best[v]
    keep = best > threshold
    keep[tree.root] = True
    return tree.subtree(keep)


def root_grower(
    tree: SkeletonTree, threshold: float, scores: np.ndarray | None = None
) -> SkeletonTree:
    """Grow from the root, keeping children with score >= threshold.

    Children of excluded nodes are never considered, so a low-score gap
    drops everything distal to it.
    """
    s = _resolve_scores(tree, scores)
    order = tree.topo_order()
    parent = tree.parent
    keep = np.zeros(len(tree), dtype=bool)
    keep[tree.root] = True
    for v in order:
        p = parent[v]
        if p >= 0:
            keep[v] = keep[p] and s[v] >= threshold
    return tree.subtree(keep)


# -- summarization -----------------------------------------------------------


def assign_weights(
    tree: SkeletonTree, field: DensityField, beta_w: float = 300.0
) -> SkeletonTree:
    """Store per-node summary weights: density of voxels whose nearest node
    is that node and strictly closer than ``beta_w``.

    The node weights sum exactly to the density within ``beta_w`` of the
    node set (weight preservation).
    """
    if beta_w <= 0:
        raise ValueError("beta_w must be positive")
    assign, _ = assign_voxels(field.geometry, tree.positions, beta_w, inclusive=False)
    ok = assign >= 0
    tree.weight = np.bincount(
        assign[ok], weights=field.values[ok].astype(np.float64), minlength=len(tree)
    )
    return tree


def assign_thickness(
    tree: SkeletonTree,
    field: DensityField,
    zeta: float = 20.0,
    c: float = 1.0,
    foreground_threshold: float = 0.0,
) -> SkeletonTree:
    """Store per-node radii c * sqrt(N), N = foreground voxels within zeta.

    Foreground means density > foreground_threshold. Nodes with no
    associated voxel get the minimum non-zero radius c.
    """
    if zeta <= 0 or c <= 0:
        raise ValueError("zeta and c must be positive")
    assign, _ = assign_voxels(field.geometry, tree.positions, zeta, inclusive=True)
    ok = (assign >= 0) & (field.values > foreground_threshold)
    counts = np.bincount(assign[ok], minlength=len(tree))
    radius = float(c) * np.sqrt(counts.astype(np.float64))
    radius[counts == 0] = float(c)
    tree.radius = radius
    return tree


def top_k_branches(tree: SkeletonTree, k: int) -> SkeletonTree:
    """Union of the k longest root-to-leaf paths (by physical length).

    Ties rank by smaller leaf id; k at or above the leaf count returns the
    whole tree.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    order = tree.topo_order()
    parent = tree.parent
    elen = tree.edge_lengths()
    plen = np.zeros(len(tree), dtype=np.float64)
    for v in order:
        p = parent[v]
        if p >= 0:
            plen[v] = plen[p] + elen[v]
    leaves = tree.leaves()
    if k >= len(leaves):
        return tree.subtree(np.ones(len(tree), dtype=bool))
    ranked = leaves[np.lexsort((leaves, -plen[leaves]))][:k]
    keep = np.zeros(len(tree), dtype=bool)
    for leaf in ranked:
        v = int(leaf)
        while v >= 0 and not keep[v]:
            keep[v] = True
            v = int(parent[v])
    return tree.subtree(keep)
