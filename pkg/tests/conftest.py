"""Shared generators for randomized tests."""

from __future__ import annotations

import numpy as np
import pytest

from ridgetree.grid import DensityField, GridGeometry
from ridgetree.morse import MorseGraph
from ridgetree.tree import SkeletonTree


def random_field(rng: np.random.Generator, max_dim: int = 6, ties: bool = False) -> DensityField:
    dims = tuple(int(d) for d in rng.integers(1, max_dim + 1, size=3))
    n = dims[0] * dims[1] * dims[2]
    if ties:
        vals = rng.integers(0, 5, size=n).astype(np.float32)
    else:
        vals = (rng.random(n) * 10).astype(np.float32)
    return DensityField(GridGeometry(dims), vals)


def random_tree(rng: np.random.Generator, n: int, span: float = 50.0) -> SkeletonTree:
    """Random recursive tree with random positions; parents precede children."""
    parent = np.full(n, -1, dtype=np.int64)
    for v in range(1, n):
        parent[v] = int(rng.integers(0, v))
    positions = rng.uniform(0, span, size=(n, 3))
    return SkeletonTree(positions=positions, parent=parent, root=0)


def random_scored_tree(rng: np.random.Generator, n: int) -> SkeletonTree:
    tree = random_tree(rng, n)
    tree.smoothed_score = rng.random(n) * 10
    return tree


def random_morse_like_graph(
    rng: np.random.Generator, max_nodes: int = 200
) -> tuple[MorseGraph, DensityField]:
    """Random connected-ish graph over distinct grid vertices, plus a field.

    A spanning tree over a random vertex subset plus a few chords; edge
    endpoints are arbitrary grid vertices (positions and densities are all
    the forest construction consumes).
    """
    dims = (12, 12, 12)
    geom = GridGeometry(dims, spacing=tuple(rng.uniform(0.5, 2.0, size=3)))
    field = DensityField(geom, rng.random(geom.num_voxels).astype(np.float32) * 8)
    n = int(rng.integers(2, max_nodes + 1))
    verts = rng.choice(geom.num_voxels, size=n, replace=False).astype(np.int64)
    edges = [(verts[int(rng.integers(0, v))], verts[v]) for v in range(1, n)]
    n_extra = int(rng.integers(0, max(1, n // 3)))
    for _ in range(n_extra):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            edges.append((verts[a], verts[b]))
    graph = MorseGraph(geom, np.array(edges, dtype=np.int64))
    return graph, field


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
