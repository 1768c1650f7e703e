"""Synthetic tubular test volumes with known ground-truth skeletons.

A ground-truth tree is rasterized into a density field by taking, for each
voxel centre, the distance d to the nearest sampled skeleton point and
setting intensity peak * exp(-d^2 / (2 sigma^2)), optionally with signal
gaps along chosen arcs and additive Gaussian noise (field clamped at 0).
Everything is deterministic given the seed.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree

from ._nn import voxel_centers
from .grid import DensityField, GridGeometry
from .tree import SkeletonTree

__all__ = [
    "sample_skeleton_points",
    "synth_tree_volume",
    "straight_tube_tree",
    "y_junction_tree",
    "tube_fixture",
    "y_fixture",
]


def sample_skeleton_points(
    tree: SkeletonTree,
    step: float,
    gaps: list[tuple[int, float, float]] | None = None,
) -> np.ndarray:
    """Densify the tree's arcs into a point set with spacing <= ``step``.

    Each parent edge (arc id = child node index) is split into
    ceil(length/step) equal segments; samples whose arc-length fraction
    falls in a gap interval [start, start+length) are dropped. The root
    position enters through fraction 0 of its child arcs (or alone for a
    single-node tree).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    gap_by_arc: dict[int, list[tuple[float, float]]] = {}
    for arc_id, g0, glen in gaps or []:
        gap_by_arc.setdefault(int(arc_id), []).append((float(g0), float(g0) + float(glen)))

    pts = []
    child_nodes = np.flatnonzero(tree.parent >= 0)
    if len(child_nodes) == 0:
        return tree.positions[[tree.root]].copy()
    for v in child_nodes:
        a = tree.positions[tree.parent[v]]
        b = tree.positions[v]
        seg_len = float(np.linalg.norm(b - a))
        m = max(1, math.ceil(seg_len / step))
        t = np.arange(m + 1, dtype=np.float64) / m
        for lo, hi in gap_by_arc.get(int(v), []):
            t = t[(t < lo) | (t >= hi)]
        if t.size:
            pts.append(a[None, :] + t[:, None] * (b - a)[None, :])
    if not pts:
        raise ValueError("gaps removed the entire skeleton")
    return np.concatenate(pts, axis=0)


def synth_tree_volume(
    tree: SkeletonTree,
    geometry: GridGeometry,
    tube_sigma: float = 1.2,
    peak: float = 20000.0,
    noise_sigma: float = 0.0,
    gaps: list[tuple[int, float, float]] | None = None,
    seed: int = 0,
    sample_step: float | None = None,
    root_blob_sigma: float | None = None,
) -> DensityField:
    """Rasterize a skeleton tree into a density volume.

    ``tube_sigma`` is the Gaussian tube radius in physical units; ``gaps``
    blank out arc intervals (arc id, start fraction, length fraction)
    before rasterization. ``root_blob_sigma`` adds a wider soma-like
    Gaussian blob at the root (intensity combined by maximum). Noise is
    N(0, noise_sigma) added per voxel, the result clamped at zero.
    """
    lo = np.asarray(geometry.origin, dtype=np.float64)
    hi = lo + (np.asarray(geometry.dims) - 1) * np.asarray(geometry.spacing)
    if np.any(tree.positions < lo - 1e-9) or np.any(tree.positions > hi + 1e-9):
        raise ValueError("skeleton extends outside the grid's voxel centres")

    if sample_step is None:
        sample_step = 0.5 * min(geometry.spacing)
    coords = voxel_centers(geometry)
    if peak != 0.0:
        pts = sample_skeleton_points(tree, sample_step, gaps)
        d, _ = cKDTree(pts).query(coords, k=1, workers=-1)
        signal = peak * np.exp(-(d * d) / (2.0 * tube_sigma * tube_sigma))
        if root_blob_sigma is not None and root_blob_sigma > 0:
            dr = coords - tree.positions[tree.root]
            d2 = (dr * dr).sum(axis=1)
            blob = peak * np.exp(-d2 / (2.0 * root_blob_sigma * root_blob_sigma))
            signal = np.maximum(signal, blob)
    else:
        signal = np.zeros(len(coords), dtype=np.float64)

    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        signal = signal + rng.normal(0.0, noise_sigma, size=len(coords))
    return DensityField(geometry, np.maximum(signal, 0.0))


# -- standard fixtures -------------------------------------------------------


def _chain_tree(points: np.ndarray) -> SkeletonTree:
    n = len(points)
    parent = np.arange(-1, n - 1, dtype=np.int64)
    return SkeletonTree(points, parent, root=0)


def straight_tube_tree(
    start, end, n_nodes: int = 2
) -> SkeletonTree:
    """Chain tree from start to end with n_nodes evenly spaced nodes."""
    start = np.asarray(start, dtype=np.float64)
    end = np.asarray(end, dtype=np.float64)
    t = np.linspace(0.0, 1.0, max(2, n_nodes))[:, None]
    return _chain_tree(start[None, :] + t * (end - start)[None, :])


def y_junction_tree(root, junction, tip_a, tip_b) -> SkeletonTree:
    """Y-shaped tree: trunk root->junction, branches junction->tips."""
    pos = np.array([root, junction, tip_a, tip_b], dtype=np.float64)
    parent = np.array([-1, 0, 1, 1], dtype=np.int64)
    return SkeletonTree(pos, parent, root=0)


def _jitter(rng: np.random.Generator, point, amount: float) -> np.ndarray:
    return np.asarray(point, dtype=np.float64) + rng.uniform(-amount, amount, size=3)


def tube_fixture(
    seed: int,
    dims: tuple[int, int, int] = (64, 64, 64),
    peak: float = 20000.0,
    noise_frac: float = 0.002,
    tube_sigma: float = 1.2,
) -> tuple[DensityField, SkeletonTree]:
    """Bent-tube volume plus its ground-truth chain, randomized by seed."""
    geom = GridGeometry(dims)
    rng = np.random.default_rng(seed)
    n = np.asarray(dims, dtype=np.float64)
    pts = np.stack(
        [
            _jitter(rng, n * 0.12 + 2, 2.0),
            _jitter(rng, [n[0] * 0.55, n[1] * 0.35, n[2] * 0.5], 3.0),
            _jitter(rng, n * 0.85 - 2, 2.0),
        ]
    )
    tree = _chain_tree(pts)
    field = synth_tree_volume(
        tree, geom, tube_sigma=tube_sigma, peak=peak,
        noise_sigma=noise_frac * peak, seed=seed, root_blob_sigma=2.5,
    )
    return field, tree


def y_fixture(
    seed: int,
    dims: tuple[int, int, int] = (64, 64, 64),
    peak: float = 20000.0,
    noise_frac: float = 0.002,
    tube_sigma: float = 1.2,
    gap_voxels: float = 0.0,
) -> tuple[DensityField, SkeletonTree]:
    """Y-junction volume plus ground truth; optional gap on one branch.

    The gap, when requested, blanks ``gap_voxels`` of signal in the middle
    of the branch ending at node 2.
    """
    geom = GridGeometry(dims)
    rng = np.random.default_rng(seed)
    n = np.asarray(dims, dtype=np.float64)
    root = _jitter(rng, [n[0] * 0.5, n[1] * 0.12, n[2] * 0.5], 2.0)
    junc = _jitter(rng, [n[0] * 0.5, n[1] * 0.5, n[2] * 0.5], 3.0)
    tip_a = _jitter(rng, [n[0] * 0.15, n[1] * 0.85, n[2] * 0.35], 2.0)
    tip_b = _jitter(rng, [n[0] * 0.85, n[1] * 0.85, n[2] * 0.65], 2.0)
    tree = y_junction_tree(root, junc, tip_a, tip_b)

    gaps = None
    if gap_voxels > 0:
        brlen = float(np.linalg.norm(tree.positions[2] - tree.positions[1]))
        frac = min(1.0, gap_voxels * min(geom.spacing) / brlen)
        gaps = [(2, 0.5 - frac / 2, frac)]
    field = synth_tree_volume(
        tree, geom, tube_sigma=tube_sigma, peak=peak,
        noise_sigma=noise_frac * peak, seed=seed, gaps=gaps,
        root_blob_sigma=2.5,
    )
    return field, tree
