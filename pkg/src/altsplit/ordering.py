"""Fill-reducing ordering and symbolic factorization helpers.

The ordering is a greedy minimum-degree elimination on the (symmetrized)
pattern, with ties broken by lowest vertex index so the result is
deterministic.  Quality is desk-scale: fill under the returned ordering is
never worse than natural ordering on the grid problems this package
generates.
"""

from __future__ import annotations

import numpy as np

from .sparse_core import CsrMatrix

__all__ = ["amd_ordering", "cholesky_fill_count"]

_ORDER_CACHE: dict[bytes, np.ndarray] = {}
_ORDER_CACHE_MAX = 32


def _adjacency(pattern: CsrMatrix) -> list[set]:
    """Symmetrized adjacency sets, diagonal excluded."""
    n = pattern.nrows
    if pattern.ncols != n:
        raise ValueError("pattern must be square")
    adj = [set() for _ in range(n)]
    ro, ci = pattern.row_offsets, pattern.col_indices
    for i in range(n):
        for j in ci[ro[i]:ro[i + 1]]:
            j = int(j)
            if j != i:
                adj[i].add(j)
                adj[j].add(i)
    return adj


def amd_ordering(pattern: CsrMatrix) -> np.ndarray:
    """Return a fill-reducing permutation of 0..n-1 for a square pattern.

    Nonsymmetric patterns are symmetrized internally.  Always succeeds.
    """
    key = pattern.pattern_key()
    hit = _ORDER_CACHE.get(key)
    if hit is not None:
        return hit.copy()

    n = pattern.nrows
    adj = _adjacency(pattern)
    alive = np.ones(n, dtype=bool)
    degree = np.array([len(a) for a in adj], dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    for step in range(n):
        # min external degree, lowest index on ties
        best, best_deg = -1, n + 1
        for v in range(n):
            if alive[v] and degree[v] < best_deg:
                best, best_deg = v, degree[v]
        order[step] = best
        alive[best] = False
        nbrs = adj[best]
        # eliminate: neighbors become a clique
        for u in nbrs:
            au = adj[u]
            au.discard(best)
            au.update(nbrs - {u})
            degree[u] = len(au)
        adj[best] = set()
        degree[best] = 0

    if len(_ORDER_CACHE) >= _ORDER_CACHE_MAX:
        _ORDER_CACHE.clear()
    _ORDER_CACHE[key] = order.copy()
    return order


def cholesky_fill_count(pattern: CsrMatrix, perm=None) -> int:
    """Number of strictly-lower-triangular nonzeros of the Cholesky factor
    of the (symmetrized) pattern under the given elimination order.

    Computed by symbolic elimination; serves as the oracle for ordering
    quality tests.
    """
    n = pattern.nrows
    adj = _adjacency(pattern)
    if perm is None:
        perm = np.arange(n)
    fill = 0
    eliminated = np.zeros(n, dtype=bool)
    for v in map(int, perm):
        nbrs = {u for u in adj[v] if not eliminated[u]}
        fill += len(nbrs)
        for u in nbrs:
            adj[u].update(nbrs - {u})
        eliminated[v] = True
    return fill
