"""SWC reading/writing for skeleton trees plus the weight sidecar table.

SWC lines are ``id type x y z radius parent`` with ids contiguous from 1,
root parent -1 and root type 1 (soma), all other nodes type 0. Coordinates
are physical micrometres. SWC has no weight column, so summary weights go
to a sidecar text table ``id weight`` with matching ids.
"""

from __future__ import annotations

import numpy as np

from .tree import SkeletonTree

__all__ = ["write_swc", "write_weights", "read_swc"]


def _tree_rows(tree: SkeletonTree, id_offset: int):
    order = tree.topo_order()
    swc_id = np.empty(len(tree), dtype=np.int64)
    swc_id[order] = np.arange(len(tree)) + id_offset + 1
    radius = tree.radius if tree.radius is not None else np.ones(len(tree))
    rows = []
    for v in order:
        p = tree.parent[v]
        rows.append(
            (
                int(swc_id[v]),
                1 if p < 0 else 0,
                tree.positions[v, 0],
                tree.positions[v, 1],
                tree.positions[v, 2],
                float(radius[v]),
                -1 if p < 0 else int(swc_id[p]),
            )
        )
    return rows


def write_swc(trees, path) -> None:
    """Write one tree or a list of trees (a forest) to a single SWC file."""
    if isinstance(trees, SkeletonTree):
        trees = [trees]
    with open(path, "w") as fh:
        fh.write("# id type x y z radius parent\n")
        offset = 0
        for tree in trees:
            for row in _tree_rows(tree, offset):
                fh.write(
                    f"{row[0]} {row[1]} {row[2]:.9g} {row[3]:.9g} {row[4]:.9g} "
                    f"{row[5]:.9g} {row[6]}\n"
                )
            offset += len(tree)


def write_weights(trees, path) -> None:
    """Sidecar ``id weight`` table aligned with write_swc's node ids."""
    if isinstance(trees, SkeletonTree):
        trees = [trees]
    with open(path, "w") as fh:
        fh.write("# id weight\n")
        offset = 0
        for tree in trees:
            order = tree.topo_order()
            w = tree.weight if tree.weight is not None else np.zeros(len(tree))
            for n, v in enumerate(order):
                fh.write(f"{offset + n + 1} {float(w[v]):.17g}\n")
            offset += len(tree)


def read_swc(path) -> list[SkeletonTree]:
    """Parse an SWC file into one SkeletonTree per root.

    Arbitrary (non-contiguous) ids are accepted; a parent id that never
    appears is an error.
    """
    ids, xyz, radius, parents = [], [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            toks = line.split()
            if len(toks) < 7:
                raise ValueError(f"{path}: line {lineno}: expected 7 columns")
            ids.append(int(toks[0]))
            xyz.append((float(toks[2]), float(toks[3]), float(toks[4])))
            radius.append(float(toks[5]))
            parents.append(int(toks[6]))
    if not ids:
        raise ValueError(f"{path}: no SWC records")
    index_of = {i: n for n, i in enumerate(ids)}
    if len(index_of) != len(ids):
        raise ValueError(f"{path}: duplicate SWC ids")
    n = len(ids)
    parent_idx = np.empty(n, dtype=np.int64)
    for t, p in enumerate(parents):
        if p == -1:
            parent_idx[t] = -1
        elif p in index_of:
            parent_idx[t] = index_of[p]
        else:
            raise ValueError(f"{path}: node {ids[t]} references unknown parent {p}")

    # split into trees by root
    root_of = np.empty(n, dtype=np.int64)
    for t in range(n):
        v = t
        seen = 0
        while parent_idx[v] != -1:
            v = parent_idx[v]
            seen += 1
            if seen > n:
                raise ValueError(f"{path}: parent links contain a cycle")
        root_of[t] = v

    positions = np.asarray(xyz, dtype=np.float64)
    radius_arr = np.asarray(radius, dtype=np.float64)
    trees = []
    for root in np.unique(root_of):
        members = np.flatnonzero(root_of == root)
        remap = {int(m): i for i, m in enumerate(members)}
        par = np.array(
            [-1 if parent_idx[m] == -1 else remap[int(parent_idx[m])] for m in members],
            dtype=np.int64,
        )
        tree = SkeletonTree(
            positions=positions[members],
            parent=par,
            root=remap[int(root)],
        )
        tree.radius = radius_arr[members]
        trees.append(tree)
    return trees
