"""Morse graph skeleton: simplified discrete gradient and 1-unstable manifolds.

The gradient forest is the spanning forest of all negative edges with
persistence at or below the threshold; each tree flows to a single sink
(a density maximum surviving the threshold). A critical edge (persistence
above the threshold; essential edges count as infinite) contributes its
1-unstable manifold: the edge plus the parent paths from both endpoints to
their sinks. The union of these manifolds, decomposed into arcs between
non-degree-2 vertices, is the Morse graph skeleton.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ._kernels import collect_manifolds, orient_forest
from .grid import DensityField, GridGeometry
from .persistence import Cell, PersistencePairing, compute_persistence

__all__ = [
    "GradientForest",
    "MorseGraph",
    "build_gradient_forest",
    "critical_edge_ranks",
    "unstable_manifold",
    "extract_morse_graph",
]


@dataclass
class GradientForest:
    """Parent links of the negative-edge spanning forest (toward sinks)."""

    parent: np.ndarray   # (V,) linear indices; sinks point to themselves
    sinks: np.ndarray    # (m,) linear indices
    epsilon: float

    def path_to_sink(self, vertex: int) -> np.ndarray:
        """Vertices from ``vertex`` to its sink, inclusive."""
        path = [int(vertex)]
        v = int(vertex)
        while self.parent[v] != v:
            v = int(self.parent[v])
            path.append(v)
        return np.array(path, dtype=np.int64)


def build_gradient_forest(
    pairing: PersistencePairing, epsilon: float
) -> GradientForest:
    """Forest of negative edges with persistence <= epsilon."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    f = pairing.filtration
    n_vert = f.n_vertices
    included = pairing.zero.death_edge_rank[pairing.zero.persistence <= epsilon]
    killed = np.zeros(n_vert, dtype=bool)
    killed[pairing.zero.edge_birth[included]] = True
    sinks = np.flatnonzero(~killed).astype(np.int64)

    eu = f.edge_u[included]
    ev = f.edge_v[included]
    indptr, neighbors = _csr_undirected(eu, ev, n_vert)
    parent = orient_forest(indptr, neighbors, sinks, n_vert)
    return GradientForest(parent=parent, sinks=sinks, epsilon=float(epsilon))


def _csr_undirected(eu, ev, n_vert):
    src = np.concatenate([eu, ev])
    dst = np.concatenate([ev, eu])
    order = np.argsort(src, kind="stable")
    indptr = np.zeros(n_vert + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst[order]


def critical_edge_ranks(
    pairing: PersistencePairing, epsilon: float, include_positive: bool = True
) -> np.ndarray:
    """Ranks of edges with persistence > epsilon (ascending rank order).

    Negative edges are always eligible; positive edges (including essential
    ones, persistence +inf) are included unless disabled.
    """
    pers = pairing.edge_persistence
    crit = pers > epsilon
    if not include_positive:
        crit &= pairing.edge_is_negative
    return np.flatnonzero(crit).astype(np.int64)


def unstable_manifold(
    pairing: PersistencePairing, forest: GradientForest, edge
) -> np.ndarray:
    """Polyline of the edge's 1-unstable manifold, sink to sink.

    ``edge`` is a filtration rank or a dim-1 Cell; it must be critical at
    the forest's threshold.
    """
    f = pairing.filtration
    if isinstance(edge, Cell):
        if edge.dim != 1:
            raise ValueError("manifolds are defined for edges only")
        lin = int(f.field.geometry.linear_index(*edge.anchor))
        rank = int(f.edge_rank_of_canon[edge.orientation * f.n_vertices + lin])
        if rank < 0:
            raise ValueError(f"no edge at {edge.anchor} axis {edge.orientation}")
    else:
        rank = int(edge)
    if not 0 <= rank < f.n_edges:
        raise ValueError(f"edge rank {rank} out of range")
    if pairing.edge_persistence[rank] <= forest.epsilon:
        raise ValueError("edge is not critical at this threshold")
    left = forest.path_to_sink(int(f.edge_u[rank]))
    right = forest.path_to_sink(int(f.edge_v[rank]))
    return np.concatenate([left[::-1], right])


@dataclass
class MorseGraph:
    """Geometric graph on grid vertices: arcs between non-degree-2 nodes.

    ``edges`` is the canonical representation: unique (u, v) grid edges
    with u < v, lexicographically sorted. Arcs (polygonal chains of
    vertices) are derived from it deterministically.
    """

    geometry: GridGeometry
    edges: np.ndarray  # (M, 2) int64
    arcs: list[np.ndarray] = dc_field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self.edges = _canonical_edges(self.edges)
        if not self.arcs:
            self.arcs = _decompose_arcs(self.edges)

    def vertices(self) -> np.ndarray:
        """Sorted unique linear indices of all skeleton vertices."""
        return np.unique(self.edges)

    def degrees(self) -> dict[int, int]:
        verts, counts = np.unique(self.edges, return_counts=True)
        return dict(zip(verts.tolist(), counts.tolist()))

    def node_vertices(self) -> np.ndarray:
        """Arc endpoints (non-degree-2 vertices, plus cycle anchors)."""
        if not self.arcs:
            return np.empty(0, dtype=np.int64)
        ends = {int(a[0]) for a in self.arcs} | {int(a[-1]) for a in self.arcs}
        return np.array(sorted(ends), dtype=np.int64)

    def num_components(self) -> int:
        return len(components_of_edges(self.edges))

    def positions(self, lin) -> np.ndarray:
        return self.geometry.position_of_linear(lin)

    def without_arcs(self, drop: set[int]) -> "MorseGraph":
        """New graph with the listed arc indices removed (edge-set based)."""
        if not drop:
            return MorseGraph(self.geometry, self.edges.copy())
        keep_edges = []
        for idx, chain in enumerate(self.arcs):
            if idx in drop:
                continue
            keep_edges.append(np.stack([chain[:-1], chain[1:]], axis=1))
        if keep_edges:
            edges = np.concatenate(keep_edges, axis=0)
        else:
            edges = np.empty((0, 2), dtype=np.int64)
        return MorseGraph(self.geometry, edges)

    # -- exports ---------------------------------------------------------

    def write_text(self, nodes_path, edges_path) -> None:
        """Vertex table (id, i, j, k, x, y, z) and edge list (id pairs)."""
        verts = self.vertices()
        compact = {int(v): n for n, v in enumerate(verts)}
        i, j, k = self.geometry.voxel_of(verts)
        pos = self.geometry.position(i, j, k)
        with open(nodes_path, "w") as fh:
            fh.write("# id i j k x y z\n")
            for n in range(len(verts)):
                fh.write(
                    f"{n} {i[n]} {j[n]} {k[n]} "
                    f"{pos[n, 0]:.9g} {pos[n, 1]:.9g} {pos[n, 2]:.9g}\n"
                )
        with open(edges_path, "w") as fh:
            fh.write("# u v\n")
            for u, v in self.edges:
                fh.write(f"{compact[int(u)]} {compact[int(v)]}\n")

    def write_polylines_swc(self, path) -> None:
        """SWC-like polyline dump for viewers: one chain per arc."""
        with open(path, "w") as fh:
            fh.write("# polyline export: id type x y z radius parent\n")
            next_id = 1
            for chain in self.arcs:
                pos = self.positions(chain)
                prev = -1
                for p in pos:
                    fh.write(
                        f"{next_id} 0 {p[0]:.9g} {p[1]:.9g} {p[2]:.9g} 1 {prev}\n"
                    )
                    prev = next_id
                    next_id += 1


def _canonical_edges(edges: np.ndarray) -> np.ndarray:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size == 0:
        return edges
    lo = edges.min(axis=1)
    hi = edges.max(axis=1)
    span = int(hi.max()) + 1
    uniq = np.unique(lo * span + hi)
    return np.stack([uniq // span, uniq % span], axis=1)


def components_of_edges(edges: np.ndarray) -> list[np.ndarray]:
    """Connected components (vertex arrays) of an undirected edge list."""
    if len(edges) == 0:
        return []
    verts = np.unique(edges)
    comp = {int(v): int(v) for v in verts}

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for u, v in edges:
        ru, rv = find(int(u)), find(int(v))
        if ru != rv:
            comp[max(ru, rv)] = min(ru, rv)
    groups: dict[int, list[int]] = {}
    for v in verts:
        groups.setdefault(find(int(v)), []).append(int(v))
    return [np.array(groups[r], dtype=np.int64) for r in sorted(groups)]


def _decompose_arcs(edges: np.ndarray) -> list[np.ndarray]:
    """Split the edge set into maximal chains between non-degree-2 vertices.

    Pure degree-2 cycles are emitted as closed chains anchored at their
    smallest vertex. Deterministic: vertices and neighbors are visited in
    ascending order.
    """
    if len(edges) == 0:
        return []
    adj: dict[int, list[int]] = {}
    for u, v in edges:
        adj.setdefault(int(u), []).append(int(v))
        adj.setdefault(int(v), []).append(int(u))
    for v in adj:
        adj[v].sort()
    nodes = [v for v in sorted(adj) if len(adj[v]) != 2]
    node_set = set(nodes)
    seen: set[tuple[int, int]] = set()

    def ekey(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    arcs: list[np.ndarray] = []
    for a in nodes:
        for b in adj[a]:
            if ekey(a, b) in seen:
                continue
            seen.add(ekey(a, b))
            chain = [a, b]
            while chain[-1] not in node_set:
                u = chain[-1]
                n1, n2 = adj[u]
                nxt = n2 if n1 == chain[-2] else n1
                seen.add(ekey(u, nxt))
                chain.append(nxt)
            arcs.append(np.array(chain, dtype=np.int64))
    # leftover pure cycles
    for v in sorted(adj):
        for w in adj[v]:
            if ekey(v, w) in seen:
                continue
            chain = [v, w]
            seen.add(ekey(v, w))
            while chain[-1] != v:
                u = chain[-1]
                n1, n2 = adj[u]
                nxt = n2 if n1 == chain[-2] else n1
                seen.add(ekey(u, nxt))
                chain.append(nxt)
            arcs.append(np.array(chain, dtype=np.int64))
    return arcs


def extract_morse_graph(
    source,
    epsilon: float,
    include_positive: bool = True,
) -> MorseGraph:
    """Union of 1-unstable manifolds of all critical edges, as a MorseGraph.

    ``source`` is a DensityField or a precomputed PersistencePairing.
    Raising epsilon shrinks the critical edge set, so arcs never multiply.
    """
    if isinstance(source, PersistencePairing):
        pairing = source
    elif isinstance(source, DensityField):
        pairing = compute_persistence(source)
    else:
        raise TypeError("source must be a DensityField or PersistencePairing")
    forest = build_gradient_forest(pairing, epsilon)
    crit = critical_edge_ranks(pairing, epsilon, include_positive)
    f = pairing.filtration
    out_u, out_v = collect_manifolds(f.edge_u[crit], f.edge_v[crit], forest.parent)
    edges = np.stack([out_u, out_v], axis=1)
    return MorseGraph(pairing.filtration.field.geometry, edges)
