"""Pre-forest Morse graph cleanup: boundary arcs and flow-misaligned paths.

Boundary cleanup deletes arcs that run entirely through empty space (all
voxels farther than a distance threshold from any non-zero density voxel),
an artifact of degenerate gradients over constant background.

Flow pruning estimates a per-vertex flow direction with intensity-weighted
PCA over a cubic neighborhood, diffuses the directions along the skeleton,
scores each junction-to-junction path by how well it follows the flow, and
removes low-scoring paths while preserving the component count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import DensityField
from .morse import MorseGraph

__all__ = [
    "FlowField",
    "PathScore",
    "remove_boundary_arcs",
    "estimate_flow_vectors",
    "vector_score_along_path",
    "path_score",
    "prune_paths",
]


def remove_boundary_arcs(
    graph: MorseGraph, field: DensityField, min_distance: float = 2.0
) -> MorseGraph:
    """Drop arcs whose every voxel is farther than ``min_distance`` (in
    voxels) from any non-zero density voxel. Idempotent."""
    if len(graph.edges) == 0:
        return graph
    zero_mask = field.volume() == 0
    if not zero_mask.any():
        return MorseGraph(graph.geometry, graph.edges.copy())
    dist = ndimage.distance_transform_edt(zero_mask)
    flat = np.ascontiguousarray(dist.transpose(2, 1, 0)).ravel()
    drop = {
        idx
        for idx, chain in enumerate(graph.arcs)
        if float(flat[chain].min()) > min_distance
    }
    return graph.without_arcs(drop)


@dataclass
class FlowField:
    """Unit flow direction per skeleton vertex (sign-free).

    ``valid`` is False where the neighborhood had zero total weight; such
    vertices contribute a vector score of 0.
    """

    vertices: np.ndarray   # (n,) sorted linear indices
    vectors: np.ndarray    # (n, 3) float64, unit rows where valid
    valid: np.ndarray      # (n,) bool
    neighborhood_radius: int
    diffusion_sigma: float

    def lookup(self, lin: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectors and validity for the given vertex linear indices."""
        idx = np.searchsorted(self.vertices, lin)
        if np.any(idx >= len(self.vertices)) or np.any(self.vertices[idx] != lin):
            raise KeyError("vertex not in flow field")
        return self.vectors[idx], self.valid[idx]


def _weighted_principal_direction(coords, weights):
    """Top eigenvector of the weighted covariance; None for zero weight."""
    wsum = weights.sum()
    if wsum <= 0:
        return None
    mean = (coords * weights[:, None]).sum(axis=0) / wsum
    centered = coords - mean
    cov = (centered * weights[:, None]).T @ centered / wsum
    _, vecs = np.linalg.eigh(cov)
    v = vecs[:, -1]
    norm = np.linalg.norm(v)
    if norm == 0:
        return None
    return v / norm


def estimate_flow_vectors(
    graph: MorseGraph,
    field: DensityField,
    neighborhood_radius: int = 5,
    diffusion_sigma: float = 2.0,
) -> FlowField:
    """Intensity-weighted PCA direction per skeleton vertex, then Gaussian
    diffusion over graph hops (vectors sign-aligned before averaging)."""
    if neighborhood_radius < 1:
        raise ValueError("neighborhood_radius must be >= 1")
    geom = field.geometry
    nx, ny, nz = geom.dims
    vol = field.volume().astype(np.float64)
    sx, sy, sz = geom.spacing
    verts = graph.vertices()
    vi, vj, vk = geom.voxel_of(verts)

    r = neighborhood_radius
    vectors = np.zeros((len(verts), 3), dtype=np.float64)
    valid = np.zeros(len(verts), dtype=bool)
    for n in range(len(verts)):
        i0, i1 = max(0, vi[n] - r), min(nx, vi[n] + r + 1)
        j0, j1 = max(0, vj[n] - r), min(ny, vj[n] + r + 1)
        k0, k1 = max(0, vk[n] - r), min(nz, vk[n] + r + 1)
        w = vol[i0:i1, j0:j1, k0:k1].ravel()
        ii, jj, kk = np.meshgrid(
            np.arange(i0, i1), np.arange(j0, j1), np.arange(k0, k1), indexing="ij"
        )
        coords = np.stack(
            [ii.ravel() * sx, jj.ravel() * sy, kk.ravel() * sz], axis=1
        )
        v = _weighted_principal_direction(coords, w)
        if v is not None:
            vectors[n] = v
            valid[n] = True

    if diffusion_sigma > 0:
        vectors, valid = _diffuse_over_hops(
            verts, graph.edges, vectors, valid, diffusion_sigma
        )
    return FlowField(
        vertices=verts,
        vectors=vectors,
        valid=valid,
        neighborhood_radius=neighborhood_radius,
        diffusion_sigma=float(diffusion_sigma),
    )


def _diffuse_over_hops(verts, edges, vectors, valid, sigma):
    """Gaussian-weighted average of neighbor vectors within 3*sigma hops."""
    index_of = {int(v): n for n, v in enumerate(verts)}
    adj: dict[int, list[int]] = {n: [] for n in range(len(verts))}
    for u, v in edges:
        a, b = index_of[int(u)], index_of[int(v)]
        adj[a].append(b)
        adj[b].append(a)
    max_hops = max(1, int(np.ceil(3 * sigma)))
    weights = np.exp(-np.arange(max_hops + 1) ** 2 / (2 * sigma * sigma))

    out = vectors.copy()
    for n in range(len(verts)):
        if not valid[n]:
            continue
        base = vectors[n]
        acc = base.copy()  # hop 0, weight 1
        hop = {n: 0}
        frontier = [n]
        for d in range(1, max_hops + 1):
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if w not in hop:
                        hop[w] = d
                        nxt.append(w)
                        if valid[w]:
                            vec = vectors[w]
                            if np.dot(vec, base) < 0:
                                vec = -vec
                            acc = acc + weights[d] * vec
            frontier = nxt
            if not frontier:
                break
        norm = np.linalg.norm(acc)
        out[n] = acc / norm if norm > 0 else base
    return out, valid


def vector_score_along_path(
    path: np.ndarray, flow: FlowField, geometry, hop: int = 4
) -> np.ndarray:
    """|cosine| between each vertex's flow vector and the chord between its
    +-hop neighbors along the path (clamped at the ends); in [0, 1]."""
    path = np.asarray(path, dtype=np.int64)
    pos = geometry.position_of_linear(path)
    vecs, ok = flow.lookup(path)
    n = len(path)
    scores = np.zeros(n, dtype=np.float64)
    for t in range(n):
        a = max(0, t - hop)
        b = min(n - 1, t + hop)
        chord = pos[b] - pos[a]
        clen = np.linalg.norm(chord)
        if not ok[t] or clen == 0:
            continue
        scores[t] = abs(float(np.dot(chord, vecs[t]))) / clen
    return np.minimum(scores, 1.0)


@dataclass
class PathScore:
    """Score of one junction-to-junction path.

    ``value`` is the length-weighted average of c(x) * (alpha + v(x)) along
    the path (trapezoidal rule), where c is the intensity capped at
    ``intensity_cap`` and v the per-vertex alignment score.
    """

    path: np.ndarray
    vertex_scores: np.ndarray
    capped_intensity: np.ndarray
    value: float


def path_score(
    path: np.ndarray,
    flow: FlowField,
    field: DensityField,
    alpha: float = 0.0,
    intensity_cap: float = 1.0,
    hop: int = 4,
) -> PathScore:
    path = np.asarray(path, dtype=np.int64)
    v = vector_score_along_path(path, flow, field.geometry, hop=hop)
    c = np.minimum(field.values[path].astype(np.float64), intensity_cap)
    integrand = c * (alpha + v)
    pos = field.geometry.position_of_linear(path)
    seg = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    length = seg.sum()
    if length == 0:
        value = float(integrand.mean())
    else:
        value = float((seg * (integrand[:-1] + integrand[1:]) / 2).sum() / length)
    return PathScore(path=path, vertex_scores=v, capped_intensity=c, value=value)


def prune_paths(
    graph: MorseGraph,
    flow: FlowField,
    field: DensityField,
    threshold: float,
    alpha: float = 0.0,
    intensity_cap: float = 1.0,
    hop: int = 4,
) -> MorseGraph:
    """Remove low-score paths in increasing score order without changing the
    number of connected components; repeats until a fixed point."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    current = graph
    n_components = current.num_components()
    while True:
        scored = sorted(
            (
                (path_score(chain, flow, field, alpha, intensity_cap, hop).value, idx)
                for idx, chain in enumerate(current.arcs)
            ),
        )
        removed = False
        for value, idx in scored:
            if value >= threshold:
                break
            trial = current.without_arcs({idx})
            if trial.num_components() == n_components:
                current = trial
                removed = True
                break
        if not removed:
            return current
