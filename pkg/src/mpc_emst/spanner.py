"""Leveled 2-hop Euclidean spanners confined to quadtree cells."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import InvalidArgument
from .geometry import AlgorithmConfig, PointSet, Quadtree, ShiftVector, stretch_bound

log = logging.getLogger(__name__)


def normalize_edges(pairs) -> np.ndarray:
    """(m, 2) int64 array with u < v, no loops, unique, lexicographically sorted."""
    e = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(e) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    e = np.sort(e, axis=1)
    e = e[e[:, 0] != e[:, 1]]
    if len(e) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    m = int(e.max()) + 1
    key = np.unique(e[:, 0] * m + e[:, 1])
    return np.column_stack([key // m, key % m])


@dataclass(frozen=True)
class EdgeSet:
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    fallback: bool = False

    def __post_init__(self):
        object.__setattr__(self, "edges", normalize_edges(self.edges))

    def __len__(self):
        return len(self.edges)

    def __iter__(self):
        return (tuple(map(int, r)) for r in self.edges)

    def as_set(self) -> set:
        return set(self)

    def union(self, other: "EdgeSet") -> "EdgeSet":
        return EdgeSet(np.vstack([self.edges, other.edges]))


@dataclass(frozen=True)
class LeveledSpanner:
    """Cumulative spanners keyed by level ``t`` (a power of two)."""

    levels: Dict[int, EdgeSet]
    stretch_bound: float = 1.0

    def at(self, t: int) -> EdgeSet:
        return self.levels[t]


def _groups(labels: np.ndarray):
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    return np.split(order, bounds)


def _threshold_pairs(pts: np.ndarray, radius: float) -> np.ndarray:
    if len(pts) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    return cKDTree(pts).query_pairs(radius, output_type="ndarray")


def _subcell_leaders(idx: np.ndarray, coords: np.ndarray, rng=None) -> np.ndarray:
    """One leader per distinct subcell; smallest id unless ``rng`` is given."""
    _, inv = np.unique(coords, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    leaders = np.full(inv.max() + 1, -1, dtype=np.int64)
    if rng is None:
        # idx is sorted ascending, so the first hit per subcell is the smallest id
        first = np.unique(inv, return_index=True)[1]
        leaders[inv[first]] = idx[first]
        return leaders, inv
    perm = rng.permutation(len(idx))
    first = np.unique(inv[perm], return_index=True)[1]
    leaders[inv[perm][first]] = idx[perm][first]
    return leaders, inv


def _cell_leader_edges(pts, idx, t, shift_a, d) -> np.ndarray:
    side = t / math.sqrt(d)
    coords = np.floor((pts + shift_a) / side).astype(np.int64)
    leaders, _ = _subcell_leaders(idx, coords)
    pos = {int(v): i for i, v in enumerate(idx)}
    tree = cKDTree(pts)
    out = []
    for r in leaders:
        near = tree.query_ball_point(pts[pos[int(r)]], 2.0 * t)
        if near:
            q = idx[np.asarray(near)]
            out.append(np.column_stack([np.full(len(q), r), q]))
    return np.vstack(out) if out else np.zeros((0, 2), dtype=np.int64)


def _sampled_leader_edges(pts, idx, t, shift_a, d, epsilon, rng) -> np.ndarray:
    # subcell diameter t/epsilon; a point joins a leader when it is within t of
    # the leader's subcell box, which keeps every pair within t two hops apart
    side = t / (epsilon * math.sqrt(d))
    coords = np.floor((pts + shift_a) / side).astype(np.int64)
    leaders, inv = _subcell_leaders(idx, coords, rng)
    pos = {int(v): i for i, v in enumerate(idx)}
    tree = cKDTree(pts)
    reach = t + side * math.sqrt(d)
    out = []
    for c, r in enumerate(leaders):
        lo = coords[pos[int(r)]] * side - shift_a
        hi = lo + side
        near = np.asarray(tree.query_ball_point(pts[pos[int(r)]], reach), dtype=np.int64)
        if len(near) == 0:
            continue
        p = pts[near]
        gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
        keep = near[np.sqrt((gap * gap).sum(axis=1)) <= t]
        out.append(np.column_stack([np.full(len(keep), r), idx[keep]]))
    return np.vstack(out) if out else np.zeros((0, 2), dtype=np.int64)


def two_hop_violations(points: np.ndarray, edges: np.ndarray, t: float,
                       groups=None) -> list:
    """Pairs within distance ``t`` (inside a common group) lacking a <=2-hop path."""
    n = len(points)
    e = normalize_edges(edges)
    adj = sparse.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                            shape=(n, n)).tocsr()
    reach = (adj + adj @ adj).tocsr()
    bad = []
    for grp in (groups if groups is not None else [np.arange(n)]):
        pairs = _threshold_pairs(points[grp], t)
        if len(pairs) == 0:
            continue
        u, v = grp[pairs[:, 0]], grp[pairs[:, 1]]
        miss = np.asarray(reach[u, v]).reshape(-1) == 0
        bad.extend(zip(u[miss].tolist(), v[miss].tolist()))
    return bad


def build_spanner_level(points: PointSet, t: int, shift: ShiftVector,
                        config: AlgorithmConfig, strategy: Optional[str] = None,
                        quadtree: Optional[Quadtree] = None) -> EdgeSet:
    """2-hop spanner of length ``t`` inside every confining quadtree cell."""
    strategy = strategy or config.strategy
    if strategy not in ("exact-threshold", "cell-leader", "sampled-leader"):
        raise InvalidArgument(f"unknown spanner strategy {strategy!r}")
    if t < 1 or t & (t - 1):
        raise InvalidArgument(f"level t must be a power of 2, got {t}")
    cfg = config.resolve(points.d)
    qt = quadtree or Quadtree(points, shift, cfg)
    e = int(t).bit_length() - 1
    labels = qt.big_cell_labels(e)
    pts_all = points.points
    rng = np.random.default_rng([cfg.seed, 0x5A4D, e])
    parts = []
    for grp in _groups(labels):
        if len(grp) < 2:
            continue
        grp = np.sort(grp)
        pts = pts_all[grp]
        if strategy == "exact-threshold":
            pairs = _threshold_pairs(pts, float(t))
            parts.append(grp[pairs])
        elif strategy == "cell-leader":
            parts.append(_cell_leader_edges(pts, grp, float(t), shift.a, points.d))
        else:
            parts.append(_sampled_leader_edges(pts, grp, float(t), shift.a, points.d,
                                               cfg.epsilon, rng))
    edges = EdgeSet(np.vstack(parts) if parts else np.zeros((0, 2), dtype=np.int64))

    if strategy == "sampled-leader":
        bad = two_hop_violations(pts_all, edges.edges, float(t), _groups(labels))
        if bad:
            log.warning("sampled-leader spanner at t=%d missed %d pairs; using cell-leader",
                        t, len(bad))
            fb = build_spanner_level(points, t, shift, config, "cell-leader", qt)
            return EdgeSet(fb.edges, fallback=True)

    budget = points.n ** (1.0 + cfg.epsilon)
    if len(edges) > budget:
        log.info("spanner level t=%d has %d edges, above the n^(1+eps)=%.0f budget",
                 t, len(edges), budget)
    return edges


def accumulate_levels(per_level: Dict[int, EdgeSet], stretch: float = 1.0) -> LeveledSpanner:
    """Running union so that the level-t set contains every lower level."""
    if not per_level:
        raise InvalidArgument("no levels given")
    keys = sorted(per_level)
    expected = [2 ** i for i in range(len(keys))]
    if keys != expected:
        raise InvalidArgument(f"levels must be 1, 2, 4, ..., got {keys}")
    out = {}
    acc = np.zeros((0, 2), dtype=np.int64)
    for t in keys:
        acc = normalize_edges(np.vstack([acc, per_level[t].edges]))
        out[t] = EdgeSet(acc, fallback=per_level[t].fallback)
    return LeveledSpanner(out, stretch)


def spanner_weight_graph(spanner: LeveledSpanner) -> Dict[tuple, int]:
    """Each pair weighted by the smallest level that contains it."""
    ts = sorted(spanner.levels)
    parts = [spanner.levels[t].edges for t in ts]
    if not sum(len(p) for p in parts):
        return {}
    e = np.vstack(parts)
    level = np.repeat(np.array(ts, dtype=np.int64), [len(p) for p in parts])
    m = int(e.max()) + 1
    # levels are stacked in increasing order, so the first hit is the smallest t
    _, first = np.unique(e[:, 0] * m + e[:, 1], return_index=True)
    return {(int(u), int(v)): int(t) for (u, v), t in zip(e[first].tolist(), level[first])}


def build_leveled_spanner(quadtree: Quadtree, strategy: Optional[str] = None) -> LeveledSpanner:
    pts = quadtree.points
    cfg = quadtree.config
    strategy = strategy or cfg.strategy
    per = {2 ** e: build_spanner_level(pts, 2 ** e, quadtree.shift, cfg, strategy, quadtree)
           for e in quadtree.level_exps()}
    return accumulate_levels(per, stretch_bound(strategy, cfg.epsilon))


def dump_spanner(spanner: LeveledSpanner, fh) -> None:
    """Write ``t u v`` lines sorted by (t, u, v)."""
    for t in sorted(spanner.levels):
        for u, v in spanner.levels[t]:
            fh.write(f"{t} {u} {v}\n")
