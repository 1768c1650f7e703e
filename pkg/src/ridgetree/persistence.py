"""Persistence pairings of a density field on the grid's 2-skeleton.

Cells (vertices, axis-aligned edges, axis-aligned squares) enter by
descending density: each cell's filtration value is the minimum density
over its vertices, and the order sorts by value descending with ties
broken by (dimension, anchor linear index, orientation). This realizes the
lower-star filtration of the negated field, so components are born at
density maxima and die where ridges merge.

Vertex-edge pairs come from a union-find sweep (elder rule: the component
whose creating vertex has lower density dies). Edge-square pairs come from
boundary-matrix reduction in anti-transposed (coboundary) order, which is
result-identical to the naive reduction but has far less fill-in on grid
data; columns of negative edges are skipped up front (clearing) since they
are already paired with vertices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._kernels import reduce_columns4, zero_dim_sweep
from .grid import DensityField

__all__ = [
    "Cell",
    "Filtration",
    "VertexEdgePairs",
    "EdgeSquarePairs",
    "PersistencePairing",
    "build_filtration",
    "zero_dim_pairs",
    "one_dim_pairs",
    "compute_persistence",
    "persistence_of",
]

# squares span the axis pairs below, indexed by orientation
_SQUARE_AXES = ((0, 1), (0, 2), (1, 2))


@dataclass(frozen=True)
class Cell:
    """A cell of the 2-skeleton: dim 0, 1 or 2, anchored at its lowest-index
    voxel; orientation is the edge axis (dim 1) or the spanned axis pair
    index (dim 2: 0 = xy, 1 = xz, 2 = yz)."""

    dim: int
    anchor: tuple[int, int, int]
    orientation: int = 0

    def key(self, geom) -> tuple[int, int, int]:
        return (self.dim, int(geom.linear_index(*self.anchor)), self.orientation)


@dataclass
class Filtration:
    """All cells of the 2-skeleton in filtration order (arrays per dim)."""

    field: DensityField
    vert_rank: np.ndarray        # (V,) rank of each vertex among vertices
    rank_to_vertex: np.ndarray   # (V,) inverse permutation
    edge_u: np.ndarray           # (E,) anchor linear index, filtration order
    edge_v: np.ndarray           # (E,) other endpoint
    edge_axis: np.ndarray        # (E,) int8
    edge_value: np.ndarray       # (E,) float32, min of endpoint densities
    edge_rank_of_canon: np.ndarray  # (3V,) canonical id -> rank, -1 if absent
    square_anchor: np.ndarray    # (S,) anchor linear index, filtration order
    square_orient: np.ndarray    # (S,) int8
    square_value: np.ndarray     # (S,) float32
    square_edge_ranks: np.ndarray  # (S, 4) boundary edge ranks, ascending

    @property
    def n_vertices(self) -> int:
        return self.vert_rank.size

    @property
    def n_edges(self) -> int:
        return self.edge_u.size

    @property
    def n_squares(self) -> int:
        return self.square_anchor.size

    def edge_cell(self, rank: int) -> Cell:
        i, j, k = self.field.geometry.voxel_of(int(self.edge_u[rank]))
        return Cell(1, (int(i), int(j), int(k)), int(self.edge_axis[rank]))

    def square_cell(self, rank: int) -> Cell:
        i, j, k = self.field.geometry.voxel_of(int(self.square_anchor[rank]))
        return Cell(2, (int(i), int(j), int(k)), int(self.square_orient[rank]))

    def vertex_cell(self, lin: int) -> Cell:
        i, j, k = self.field.geometry.voxel_of(int(lin))
        return Cell(0, (int(i), int(j), int(k)), 0)

    def cell_order(self) -> list[tuple[Cell, float]]:
        """Every cell with its filtration value, in global filtration order.

        Materializes one record per cell; intended for small grids
        (diagnostics and tests), not the reduction path.
        """
        vals = self.field.values
        value = np.concatenate(
            [vals, self.edge_value, self.square_value]
        ).astype(np.float32)
        dim = np.concatenate(
            [
                np.zeros(self.n_vertices, dtype=np.int8),
                np.ones(self.n_edges, dtype=np.int8),
                np.full(self.n_squares, 2, dtype=np.int8),
            ]
        )
        anchor = np.concatenate(
            [np.arange(self.n_vertices, dtype=np.int64), self.edge_u, self.square_anchor]
        )
        orient = np.concatenate(
            [
                np.zeros(self.n_vertices, dtype=np.int8),
                self.edge_axis,
                self.square_orient,
            ]
        )
        order = np.lexsort((orient, anchor, dim, -value))
        geom = self.field.geometry
        out = []
        for t in order:
            i, j, k = geom.voxel_of(int(anchor[t]))
            out.append(
                (
                    Cell(int(dim[t]), (int(i), int(j), int(k)), int(orient[t])),
                    float(value[t]),
                )
            )
        return out


def build_filtration(field: DensityField) -> Filtration:
    """Enumerate vertices, edges and squares in filtration order."""
    geom = field.geometry
    nx, ny, nz = geom.dims
    n_vert = geom.num_voxels
    vals = field.values
    lin = np.arange(n_vert, dtype=np.int64)

    order = np.lexsort((lin, -vals))
    vert_rank = np.empty(n_vert, dtype=np.int64)
    vert_rank[order] = np.arange(n_vert)

    i = lin % nx
    j = (lin // nx) % ny
    k = lin // (nx * ny)
    steps = (1, nx, nx * ny)
    sels = (i < nx - 1, j < ny - 1, k < nz - 1)

    eu_parts, ev_parts, ax_parts = [], [], []
    for axis in range(3):
        u = lin[sels[axis]]
        eu_parts.append(u)
        ev_parts.append(u + steps[axis])
        ax_parts.append(np.full(u.size, axis, dtype=np.int8))
    eu = np.concatenate(eu_parts) if eu_parts else np.empty(0, dtype=np.int64)
    ev = np.concatenate(ev_parts) if ev_parts else np.empty(0, dtype=np.int64)
    eax = np.concatenate(ax_parts) if ax_parts else np.empty(0, dtype=np.int8)
    evalue = np.minimum(vals[eu], vals[ev])

    eorder = np.lexsort((eax, eu, -evalue))
    eu, ev, eax, evalue = eu[eorder], ev[eorder], eax[eorder], evalue[eorder]
    edge_rank_of_canon = np.full(3 * n_vert, -1, dtype=np.int64)
    edge_rank_of_canon[eax.astype(np.int64) * n_vert + eu] = np.arange(eu.size)

    sa_parts, so_parts, sv_parts, se_parts = [], [], [], []
    for orient, (p, q) in enumerate(_SQUARE_AXES):
        sel = sels[p] & sels[q]
        a = lin[sel]
        if a.size == 0:
            continue
        sp, sq = steps[p], steps[q]
        corners = np.stack([vals[a], vals[a + sp], vals[a + sq], vals[a + sp + sq]])
        sv_parts.append(corners.min(axis=0))
        sa_parts.append(a)
        so_parts.append(np.full(a.size, orient, dtype=np.int8))
        canon = np.stack(
            [
                p * n_vert + a,
                p * n_vert + a + sq,
                q * n_vert + a,
                q * n_vert + a + sp,
            ],
            axis=1,
        )
        se_parts.append(canon)
    if sa_parts:
        sanchor = np.concatenate(sa_parts)
        sorient = np.concatenate(so_parts)
        svalue = np.concatenate(sv_parts)
        scanon = np.concatenate(se_parts, axis=0)
    else:
        sanchor = np.empty(0, dtype=np.int64)
        sorient = np.empty(0, dtype=np.int8)
        svalue = np.empty(0, dtype=np.float32)
        scanon = np.empty((0, 4), dtype=np.int64)

    sorder = np.lexsort((sorient, sanchor, -svalue))
    sanchor, sorient, svalue = sanchor[sorder], sorient[sorder], svalue[sorder]
    sq_edge_ranks = np.sort(edge_rank_of_canon[scanon[sorder]], axis=1)

    return Filtration(
        field=field,
        vert_rank=vert_rank,
        rank_to_vertex=order,
        edge_u=eu,
        edge_v=ev,
        edge_axis=eax,
        edge_value=evalue,
        edge_rank_of_canon=edge_rank_of_canon,
        square_anchor=sanchor,
        square_orient=sorient,
        square_value=svalue,
        square_edge_ranks=np.ascontiguousarray(sq_edge_ranks),
    )


@dataclass
class VertexEdgePairs:
    """0-dimensional pairs: components born at vertices die at edges."""

    birth_vertex: np.ndarray      # (n0,) linear vertex index
    death_edge_rank: np.ndarray   # (n0,) filtration rank of the killing edge
    persistence: np.ndarray       # (n0,) float64, density difference
    essential_vertices: np.ndarray  # (c,) linear indices, one per component
    edge_birth: np.ndarray        # (E,) birth vertex per edge rank, -1 if positive


@dataclass
class EdgeSquarePairs:
    """1-dimensional pairs: cycles born at positive edges die at squares."""

    birth_edge_rank: np.ndarray
    death_square_rank: np.ndarray
    persistence: np.ndarray
    essential_edge_ranks: np.ndarray    # unpaired positive edges (rare)
    essential_square_ranks: np.ndarray  # squares with zero reduced boundary


def zero_dim_pairs(filtration: Filtration) -> VertexEdgePairs:
    """Vertex-edge pairs by union-find sweep in filtration order."""
    edge_birth = zero_dim_sweep(
        filtration.edge_u,
        filtration.edge_v,
        filtration.vert_rank,
        filtration.rank_to_vertex,
    )
    neg = np.flatnonzero(edge_birth >= 0)
    birth_vertex = edge_birth[neg]
    vals = filtration.field.values
    persistence = vals[birth_vertex].astype(np.float64) - filtration.edge_value[
        neg
    ].astype(np.float64)
    paired = np.zeros(filtration.n_vertices, dtype=bool)
    paired[birth_vertex] = True
    return VertexEdgePairs(
        birth_vertex=birth_vertex,
        death_edge_rank=neg,
        persistence=persistence,
        essential_vertices=np.flatnonzero(~paired).astype(np.int64),
        edge_birth=edge_birth,
    )


def one_dim_pairs(
    filtration: Filtration, zero: VertexEdgePairs | None = None
) -> EdgeSquarePairs:
    """Edge-square pairs by coboundary-order (anti-transposed) reduction.

    Columns are the positive edges in reverse filtration order, each
    holding its coface squares keyed by reverse square rank; the pivot of a
    stabilized column is the square the edge pairs with. This yields the
    identical pairing to reducing the square boundary columns directly.
    """
    if zero is None:
        zero = zero_dim_pairs(filtration)
    n_edges = filtration.n_edges
    n_squares = filtration.n_squares
    negative = zero.edge_birth >= 0
    pos_edges = np.flatnonzero(~negative)[::-1].astype(np.int64)

    if n_squares == 0 or pos_edges.size == 0:
        return EdgeSquarePairs(
            birth_edge_rank=np.empty(0, dtype=np.int64),
            death_square_rank=np.empty(0, dtype=np.int64),
            persistence=np.empty(0, dtype=np.float64),
            essential_edge_ranks=pos_edges[::-1].copy(),
            essential_square_ranks=np.arange(n_squares, dtype=np.int64),
        )

    # invert the square->edges incidence into per-edge coface key rows
    flat_e = filtration.square_edge_ranks.ravel()
    flat_key = np.repeat(
        n_squares - 1 - np.arange(n_squares, dtype=np.int64), 4
    )
    cols_all = np.full((n_edges, 4), -1, dtype=np.int64)
    order = np.argsort(flat_e, kind="stable")
    fe = flat_e[order]
    block_start = np.zeros(n_edges + 1, dtype=np.int64)
    np.add.at(block_start, flat_e + 1, 1)
    np.cumsum(block_start, out=block_start)
    slot = np.arange(fe.size, dtype=np.int64) - block_start[fe]
    cols_all[fe, slot] = flat_key[order]
    cols = np.ascontiguousarray(np.sort(cols_all[pos_edges], axis=1))

    pair_row = reduce_columns4(cols, n_squares)

    got = pair_row >= 0
    birth_edge = pos_edges[got]
    death_square = n_squares - 1 - pair_row[got]
    persistence = filtration.edge_value[birth_edge].astype(
        np.float64
    ) - filtration.square_value[death_square].astype(np.float64)

    square_paired = np.zeros(n_squares, dtype=bool)
    square_paired[death_square] = True
    essential_edges = np.sort(pos_edges[~got]).astype(np.int64)
    essential_squares = np.flatnonzero(~square_paired).astype(np.int64)
    # report in square filtration order for determinism
    sq_order = np.argsort(death_square, kind="stable")
    return EdgeSquarePairs(
        birth_edge_rank=birth_edge[sq_order],
        death_square_rank=death_square[sq_order],
        persistence=persistence[sq_order],
        essential_edge_ranks=essential_edges,
        essential_square_ranks=essential_squares,
    )


@dataclass
class PersistencePairing:
    """Full pairing of the 2-skeleton plus per-edge persistence lookups."""

    filtration: Filtration
    zero: VertexEdgePairs
    one: EdgeSquarePairs

    @cached_property
    def edge_persistence(self) -> np.ndarray:
        """Persistence per edge rank; +inf for essential (unpaired) edges."""
        pers = np.full(self.filtration.n_edges, np.inf, dtype=np.float64)
        pers[self.zero.death_edge_rank] = self.zero.persistence
        pers[self.one.birth_edge_rank] = self.one.persistence
        return pers

    @cached_property
    def edge_is_negative(self) -> np.ndarray:
        return self.zero.edge_birth >= 0

    # -- reporting -----------------------------------------------------------

    def vertex_edge_pairs(self) -> list[tuple[Cell, Cell, float]]:
        f = self.filtration
        return [
            (f.vertex_cell(v), f.edge_cell(e), float(p))
            for v, e, p in zip(
                self.zero.birth_vertex, self.zero.death_edge_rank, self.zero.persistence
            )
        ]

    def edge_square_pairs(self) -> list[tuple[Cell, Cell, float]]:
        f = self.filtration
        return [
            (f.edge_cell(e), f.square_cell(s), float(p))
            for e, s, p in zip(
                self.one.birth_edge_rank,
                self.one.death_square_rank,
                self.one.persistence,
            )
        ]

    def essential_cells(self) -> list[Cell]:
        f = self.filtration
        cells = [f.vertex_cell(v) for v in self.zero.essential_vertices]
        cells += [f.edge_cell(e) for e in self.one.essential_edge_ranks]
        cells += [f.square_cell(s) for s in self.one.essential_square_ranks]
        return cells

    def diagram_rows(self) -> list[tuple[float, float, int]]:
        """(birth density, death density, dim) per finite pair, plus
        essential rows with death = inf; sorted for stable output."""
        vals = self.filtration.field.values
        rows = []
        for v, e in zip(self.zero.birth_vertex, self.zero.death_edge_rank):
            rows.append((float(vals[v]), float(self.filtration.edge_value[e]), 0))
        for e, s in zip(self.one.birth_edge_rank, self.one.death_square_rank):
            rows.append(
                (
                    float(self.filtration.edge_value[e]),
                    float(self.filtration.square_value[s]),
                    1,
                )
            )
        for v in self.zero.essential_vertices:
            rows.append((float(vals[v]), float("inf"), 0))
        for e in self.one.essential_edge_ranks:
            rows.append((float(self.filtration.edge_value[e]), float("inf"), 1))
        rows.sort(key=lambda r: (r[2], -r[0], -r[1]))
        return rows

    def write_diagram(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("# birth death dim\n")
            for b, d, dim in self.diagram_rows():
                fh.write(f"{b:.9g} {'inf' if np.isinf(d) else format(d, '.9g')} {dim}\n")


def compute_persistence(field_or_filtration) -> PersistencePairing:
    """Build the filtration (if needed) and compute both pairing dimensions."""
    if isinstance(field_or_filtration, Filtration):
        filtration = field_or_filtration
    else:
        filtration = build_filtration(field_or_filtration)
    zero = zero_dim_pairs(filtration)
    one = one_dim_pairs(filtration, zero)
    return PersistencePairing(filtration=filtration, zero=zero, one=one)


def persistence_of(pairing: PersistencePairing, cell: Cell) -> float:
    """Persistence of the pair containing ``cell`` (+inf when essential).

    Raises KeyError for cells outside the complex.
    """
    f = pairing.filtration
    geom = f.field.geometry
    if not geom.contains(*cell.anchor):
        raise KeyError(f"cell anchor {cell.anchor} outside the grid")
    lin = int(geom.linear_index(*cell.anchor))
    if cell.dim == 0:
        mask = pairing.zero.birth_vertex == lin
        if mask.any():
            return float(pairing.zero.persistence[np.argmax(mask)])
        if lin in pairing.zero.essential_vertices:
            return float("inf")
        raise KeyError(f"vertex {cell.anchor} not found in pairing")
    if cell.dim == 1:
        rank = f.edge_rank_of_canon[cell.orientation * f.n_vertices + lin]
        if rank < 0:
            raise KeyError(f"no edge at {cell.anchor} along axis {cell.orientation}")
        return float(pairing.edge_persistence[rank])
    if cell.dim == 2:
        mask = (f.square_anchor == lin) & (f.square_orient == cell.orientation)
        ranks = np.flatnonzero(mask)
        if ranks.size == 0:
            raise KeyError(f"no square at {cell.anchor} orientation {cell.orientation}")
        rank = ranks[0]
        pmask = pairing.one.death_square_rank == rank
        if pmask.any():
            return float(pairing.one.persistence[np.argmax(pmask)])
        return float("inf")
    raise KeyError(f"bad cell dimension {cell.dim}")
