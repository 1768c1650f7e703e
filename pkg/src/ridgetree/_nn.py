"""Exact nearest-node queries for voxel-to-node association.

Contract: every voxel is assigned to its nearest node by physical Euclidean
distance, ties broken by smallest node id, optionally subject to a distance
cap. A KD-tree proposes candidates; distances are recomputed from the raw
coordinates so results (including ties) are bit-compatible with a direct
scan over all nodes.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .grid import GridGeometry

__all__ = ["voxel_centers", "nearest_node", "assign_voxels", "set_query_workers"]

_WORKERS = -1  # KD-tree query thread cap; results are thread-count independent


def set_query_workers(n: int) -> None:
    """Cap KD-tree query threads (-1 = all cores). Purely a resource knob."""
    global _WORKERS
    _WORKERS = int(n) if n else -1


def voxel_centers(geom: GridGeometry) -> np.ndarray:
    """(V, 3) float64 physical coordinates of all voxel centres, linear order."""
    nx, ny, nz = geom.dims
    lin = np.arange(geom.num_voxels, dtype=np.int64)
    i, j, k = geom.voxel_of(lin)
    return geom.position(i, j, k)


def _dist2(points: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    d = points - nodes
    return (d * d).sum(axis=-1)


def nearest_node(points: np.ndarray, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest node index and squared distance for each query point.

    Ties are resolved to the smallest node index; exactness matches a
    brute-force scan using float64 squared distances.
    """
    points = np.asarray(points, dtype=np.float64)
    nodes = np.asarray(nodes, dtype=np.float64)
    if nodes.ndim != 2 or nodes.shape[1] != 3:
        raise ValueError("nodes must have shape (n, 3)")
    n = len(nodes)
    if n == 0:
        raise ValueError("need at least one node")
    if n == 1:
        d2 = _dist2(points, nodes[0])
        return np.zeros(len(points), dtype=np.int64), d2

    k = min(4, n)
    tree = cKDTree(nodes)
    _, cand = tree.query(points, k=k, workers=_WORKERS)
    cand = np.atleast_2d(cand)
    cd2 = _dist2(points[:, None, :], nodes[cand])  # (m, k)

    best_d2 = cd2.min(axis=1)
    # among candidates at the minimum, take the smallest node id
    at_min = cd2 == best_d2[:, None]
    masked = np.where(at_min, cand, np.iinfo(np.int64).max)
    best_idx = masked.min(axis=1)

    # a tie with the k-th candidate may hide equal nodes beyond k
    suspect = np.flatnonzero(cd2[:, -1] == best_d2)
    for row in suspect:
        r = float(np.sqrt(best_d2[row]))
        around = tree.query_ball_point(points[row], r * (1 + 1e-12) + 1e-300)
        around = np.asarray(around, dtype=np.int64)
        exact = around[_dist2(points[row], nodes[around]) == best_d2[row]]
        if exact.size:
            best_idx[row] = exact.min()
    return best_idx, best_d2


def assign_voxels(
    geom: GridGeometry,
    nodes: np.ndarray,
    cap: float,
    inclusive: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Assign every voxel to its nearest node within ``cap`` (physical units).

    Returns (assignment, squared distance); assignment is -1 where the
    nearest node is beyond the cap (d <= cap when inclusive, d < cap
    otherwise).
    """
    idx, d2 = nearest_node(voxel_centers(geom), np.asarray(nodes, dtype=np.float64))
    cap2 = float(cap) * float(cap)
    keep = d2 <= cap2 if inclusive else d2 < cap2
    out = np.where(keep, idx, -1)
    return out, d2
