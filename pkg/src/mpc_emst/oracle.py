"""Exact quadratic-time references used for verification."""
from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidArgument
from .geometry import PointSet, ShiftVector
from .partitions import Partition, components_of

DEFAULT_CAP = 5000


def _guard(n: int, cap: Optional[int]):
    if cap is not None and n > cap:
        raise InvalidArgument(f"oracle capped at n={cap}, got n={n}")


def exact_mst(points: PointSet, cap: Optional[int] = DEFAULT_CAP) -> Tuple[list, float]:
    """Prim over the complete Euclidean graph; returns (edges, weight)."""
    n = points.n
    if n == 0:
        raise InvalidArgument("empty point set")
    _guard(n, cap)
    x = points.points
    best = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    in_tree = np.zeros(n, dtype=bool)
    cur = 0
    in_tree[0] = True
    edges, total = [], 0.0
    for _ in range(n - 1):
        d = np.sqrt(((x - x[cur]) ** 2).sum(axis=1))
        upd = ~in_tree & (d < best)
        best[upd] = d[upd]
        parent[upd] = cur
        cand = np.where(in_tree, np.inf, best)
        cur = int(np.argmin(cand))
        in_tree[cur] = True
        edges.append((int(min(cur, parent[cur])), int(max(cur, parent[cur]))))
        total += float(best[cur])
    return edges, total


class _DSU:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, a):
        while self.p[a] != a:
            self.p[a] = self.p[self.p[a]]
            a = self.p[a]
        return a

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:
            ra, rb = rb, ra
        self.p[rb] = ra
        return True


def graph_mst(weighted_edges, n: Optional[int] = None) -> float:
    """Kruskal over ``(u, v, w)`` triples or a ``{(u, v): w}`` map.

    Vertices are ``0..n-1`` (``n`` defaults to one past the largest id).
    Raises InvalidArgument when the graph is disconnected.
    """
    if isinstance(weighted_edges, dict):
        items = [(u, v, w) for (u, v), w in weighted_edges.items()]
    else:
        items = list(weighted_edges)
    if n is None:
        n = 1 + max((max(u, v) for u, v, _ in items), default=0)
    dsu = _DSU(n)
    total, used = 0.0, 0
    for u, v, w in sorted(items, key=lambda r: (r[2], r[0], r[1])):
        if dsu.union(u, v):
            total += float(w)
            used += 1
            if used == n - 1:
                break
    if used != n - 1:
        raise InvalidArgument(f"graph is disconnected: {n - used} components")
    return total


def mst_edges_kruskal(points: PointSet, cap: Optional[int] = DEFAULT_CAP) -> Tuple[list, float]:
    """Kruskal over all pairs; an independent check on :func:`exact_mst`."""
    n = points.n
    _guard(n, cap)
    iu, iv = np.triu_indices(n, 1)
    w = np.linalg.norm(points.points[iu] - points.points[iv], axis=1)
    order = np.lexsort((iv, iu, w))
    dsu = _DSU(n)
    edges, total = [], 0.0
    for k in order:
        if dsu.union(int(iu[k]), int(iv[k])):
            edges.append((int(iu[k]), int(iv[k])))
            total += float(w[k])
            if len(edges) == n - 1:
                break
    return edges, total


def threshold_components(points: PointSet, t: float) -> Partition:
    """Components of the graph joining pairs at distance <= t."""
    if t < 0:
        raise InvalidArgument("t must be nonnegative")
    if points.n < 2:
        return Partition.singletons(points.n)
    pairs = cKDTree(points.points).query_pairs(float(t), output_type="ndarray")
    return components_of(points.n, pairs)


def component_sum(points: PointSet) -> float:
    """S = sum_i 2^(i+1) (|P_(2^i)| - |P_(2^(i+1))|) over threshold components.

    Assumes distinct points are more than distance 1 apart.
    """
    n = points.n
    if n < 2:
        return 0.0
    total = 0.0
    i = 0
    prev = len(threshold_components(points, 1.0))
    while prev > 1:
        cur = len(threshold_components(points, 2.0 ** (i + 1)))
        total += 2.0 ** (i + 1) * (prev - cur)
        prev = cur
        i += 1
    return total


def quadtree_cell_sum(points: PointSet, shift: ShiftVector) -> Tuple[float, dict]:
    """sum_t t * n_t with n_t the nonempty cells of side t/sqrt(d).

    Runs from t = 1 up to the first level whose grid is a single cell.
    Returns the sum and the per-level counts.
    """
    d = points.d
    x = points.points + shift.a
    counts = {}
    t = 1
    while True:
        side = t / math.sqrt(d)
        cells = np.unique(np.floor(x / side).astype(np.int64), axis=0)
        counts[t] = len(cells)
        if len(cells) == 1:
            break
        t *= 2
    return float(sum(t * c for t, c in counts.items())), counts
