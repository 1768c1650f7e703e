"""Numba kernels for the hot loops: union-find persistence sweep, square
column reduction, manifold collection, forest orientation and Dijkstra.

All kernels are single-threaded and fully deterministic; callers own the
ordering of their inputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = [
    "zero_dim_sweep",
    "reduce_columns4",
    "collect_manifolds",
    "orient_forest",
    "multi_source_dijkstra",
]


@njit(cache=True, inline="always")
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def zero_dim_sweep(edge_u, edge_v, vert_rank, rank_to_vertex):
    """Union-find over edges in filtration order.

    Returns per-edge birth vertex (linear index) for negative edges, -1 for
    positive edges. The component whose creating vertex has the larger rank
    (smaller density after tie-break) dies at the merge.
    """
    n_vert = vert_rank.size
    n_edge = edge_u.size
    parent = np.arange(n_vert, dtype=np.int64)
    size = np.ones(n_vert, dtype=np.int64)
    birth = vert_rank.copy()  # per root: min vertex rank in the component
    pair_birth = np.full(n_edge, -1, dtype=np.int64)

    for t in range(n_edge):
        ru = _find(parent, edge_u[t])
        rv = _find(parent, edge_v[t])
        if ru == rv:
            continue
        bu = birth[ru]
        bv = birth[rv]
        if bu < bv:
            young = bv
        else:
            young = bu
        pair_birth[t] = rank_to_vertex[young]
        if size[ru] < size[rv]:
            ru, rv = rv, ru
        parent[rv] = ru
        size[ru] += size[rv]
        if bu < bv:
            birth[ru] = bu
        else:
            birth[ru] = bv
    return pair_birth


@njit(cache=True)
def reduce_columns4(columns, n_rows):
    """Left-to-right Z/2 column reduction for columns of <= 4 initial entries.

    ``columns`` is (C, 4) int64: row keys ascending, padded with -1 on the
    left. Columns must already be in processing order. Returns the pivot
    row per column, -1 when a column reduces to zero.
    """
    n_sq = columns.shape[0]
    pivot_owner = np.full(n_rows, -1, dtype=np.int64)
    pair_edge = np.full(n_sq, -1, dtype=np.int64)

    col_start = np.zeros(n_sq, dtype=np.int64)
    col_len = np.zeros(n_sq, dtype=np.int64)
    data = np.empty(8 * n_sq + 16, dtype=np.int64)
    used = 0

    work = np.empty(1024, dtype=np.int64)
    scratch = np.empty(1024, dtype=np.int64)

    for s in range(n_sq):
        ln = 0
        for q in range(4):
            r = columns[s, q]
            if r >= 0:
                work[ln] = r
                ln += 1
        while ln > 0:
            low = work[ln - 1]
            owner = pivot_owner[low]
            if owner == -1:
                pivot_owner[low] = s
                pair_edge[s] = low
                if used + ln > data.size:
                    grown = np.empty(max(2 * data.size, used + ln), dtype=np.int64)
                    grown[:used] = data[:used]
                    data = grown
                col_start[s] = used
                for q in range(ln):
                    data[used + q] = work[q]
                col_len[s] = ln
                used += ln
                break
            # symmetric difference with the owner's stored column
            o0 = col_start[owner]
            olen = col_len[owner]
            need = ln + olen
            if need > scratch.size:
                scratch = np.empty(2 * need, dtype=np.int64)
            a = 0
            b = 0
            m = 0
            while a < ln and b < olen:
                x = work[a]
                y = data[o0 + b]
                if x == y:
                    a += 1
                    b += 1
                elif x < y:
                    scratch[m] = x
                    m += 1
                    a += 1
                else:
                    scratch[m] = y
                    m += 1
                    b += 1
            while a < ln:
                scratch[m] = work[a]
                m += 1
                a += 1
            while b < olen:
                scratch[m] = data[o0 + b]
                m += 1
                b += 1
            if m > work.size:
                work = np.empty(2 * m, dtype=np.int64)
            for q in range(m):
                work[q] = scratch[q]
            ln = m
    return pair_edge


@njit(cache=True)
def collect_manifolds(crit_u, crit_v, parent):
    """Union of 1-unstable manifolds: each critical edge plus the parent
    paths of its endpoints, with shared sub-paths emitted once.

    Returns (u, v) arrays of grid edges (vertex linear indices).
    """
    n_vert = parent.size
    cap = n_vert + crit_u.size + 1
    out_u = np.empty(cap, dtype=np.int64)
    out_v = np.empty(cap, dtype=np.int64)
    visited = np.zeros(n_vert, dtype=np.bool_)
    n = 0
    for t in range(crit_u.size):
        out_u[n] = crit_u[t]
        out_v[n] = crit_v[t]
        n += 1
        for side in range(2):
            w = crit_u[t] if side == 0 else crit_v[t]
            while not visited[w]:
                visited[w] = True
                p = parent[w]
                if p == w:
                    break
                out_u[n] = w
                out_v[n] = p
                n += 1
                w = p
    return out_u[:n], out_v[:n]


@njit(cache=True)
def orient_forest(indptr, neighbors, sinks, n_vert):
    """Parent links pointing toward each tree's sink (BFS from the sinks)."""
    parent = np.full(n_vert, -1, dtype=np.int64)
    queue = np.empty(n_vert, dtype=np.int64)
    tail = 0
    for i in range(sinks.size):
        s = sinks[i]
        parent[s] = s
        queue[tail] = s
        tail += 1
    head = 0
    while head < tail:
        v = queue[head]
        head += 1
        for idx in range(indptr[v], indptr[v + 1]):
            u = neighbors[idx]
            if parent[u] == -1:
                parent[u] = v
                queue[tail] = u
                tail += 1
    return parent


@njit(cache=True, inline="always")
def _heap_less(hd, hr, hn, a, b):
    if hd[a] != hd[b]:
        return hd[a] < hd[b]
    if hr[a] != hr[b]:
        return hr[a] < hr[b]
    return hn[a] < hn[b]


@njit(cache=True)
def multi_source_dijkstra(indptr, neighbors, weights, sources, n_vert):
    """Multi-source shortest paths with (distance, source index) tie-breaks.

    Each vertex is assigned to the source of minimal distance; among equal
    distances the smallest source index wins. Returns (dist, root, parent)
    with parent -1 at sources and unreachable vertices.
    """
    INF = np.inf
    dist = np.full(n_vert, INF, dtype=np.float64)
    root = np.full(n_vert, np.int64(2**62), dtype=np.int64)
    parent = np.full(n_vert, -1, dtype=np.int64)
    settled = np.zeros(n_vert, dtype=np.bool_)

    cap = weights.size + sources.size + 1
    hd = np.empty(cap, dtype=np.float64)
    hr = np.empty(cap, dtype=np.int64)
    hn = np.empty(cap, dtype=np.int64)
    hsz = 0

    for i in range(sources.size):
        s = sources[i]
        if dist[s] == 0.0 and root[s] <= i:
            continue
        dist[s] = 0.0
        root[s] = i
        hd[hsz] = 0.0
        hr[hsz] = i
        hn[hsz] = s
        # sift up
        c = hsz
        hsz += 1
        while c > 0:
            p = (c - 1) // 2
            if _heap_less(hd, hr, hn, c, p):
                hd[c], hd[p] = hd[p], hd[c]
                hr[c], hr[p] = hr[p], hr[c]
                hn[c], hn[p] = hn[p], hn[c]
                c = p
            else:
                break

    while hsz > 0:
        d0 = hd[0]
        r0 = hr[0]
        v0 = hn[0]
        hsz -= 1
        hd[0] = hd[hsz]
        hr[0] = hr[hsz]
        hn[0] = hn[hsz]
        c = 0
        while True:
            l = 2 * c + 1
            if l >= hsz:
                break
            m = l
            r_ = l + 1
            if r_ < hsz and _heap_less(hd, hr, hn, r_, l):
                m = r_
            if _heap_less(hd, hr, hn, m, c):
                hd[c], hd[m] = hd[m], hd[c]
                hr[c], hr[m] = hr[m], hr[c]
                hn[c], hn[m] = hn[m], hn[c]
                c = m
            else:
                break
        if settled[v0]:
            continue
        settled[v0] = True
        dist[v0] = d0
        root[v0] = r0
        for idx in range(indptr[v0], indptr[v0 + 1]):
            u = neighbors[idx]
            if settled[u]:
                continue
            w = weights[idx]
            if w == INF:
                continue
            nd = d0 + w
            if nd < dist[u] or (nd == dist[u] and r0 < root[u]):
                dist[u] = nd
                root[u] = r0
                parent[u] = v0
                hd[hsz] = nd
                hr[hsz] = r0
                hn[hsz] = u
                c = hsz
                hsz += 1
                while c > 0:
                    p = (c - 1) // 2
                    if _heap_less(hd, hr, hn, c, p):
                        hd[c], hd[p] = hd[p], hd[c]
                        hr[c], hr[p] = hr[p], hr[c]
                        hn[c], hn[p] = hn[p], hn[c]
                        c = p
                    else:
                        break

    unreachable = ~settled
    for v in range(n_vert):
        if unreachable[v]:
            dist[v] = INF
            root[v] = -1
            parent[v] = -1
    return dist, root, parent
