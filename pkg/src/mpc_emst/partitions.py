"""Leader compression and the consistent partition hierarchy.

Levels are addressed by the exponent ``e`` of ``t = 2**e`` internally; the
public hierarchy is keyed by ``t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import ConsistencyError, InvalidArgument
from .geometry import AlgorithmConfig, PointSet, Quadtree, ShiftVector
from .runtime import RoundLedger
from .spanner import EdgeSet, LeveledSpanner, build_spanner_level, accumulate_levels, normalize_edges

# RNG stream tags so the three parts never share coins
STAGE_PART1, STAGE_PART2, STAGE_PART3 = 1, 2, 3


class Partition:
    """Partition of ``0..n-1`` stored as a leader array."""

    __slots__ = ("leader",)

    def __init__(self, leader):
        lead = np.asarray(leader, dtype=np.int64).reshape(-1)
        if len(lead) and (lead.min() < 0 or lead.max() >= len(lead)):
            raise InvalidArgument("leader ids out of range")
        if not np.array_equal(lead[lead], lead):
            raise InvalidArgument("leaders must be fixed points of the leader map")
        self.leader = lead

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(np.arange(n, dtype=np.int64))

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Blocks are equal labels; each block is led by its smallest id."""
        labels = np.asarray(labels).reshape(-1)
        n = len(labels)
        if n == 0:
            return cls(np.zeros(0, dtype=np.int64))
        _, inv = np.unique(labels, return_inverse=True)
        inv = inv.reshape(-1)
        mins = np.full(inv.max() + 1, n, dtype=np.int64)
        np.minimum.at(mins, inv, np.arange(n))
        return cls(mins[inv])

    @classmethod
    def from_blocks(cls, blocks, n: int) -> "Partition":
        labels = np.full(n, -1, dtype=np.int64)
        for i, b in enumerate(blocks):
            labels[list(b)] = i
        if (labels < 0).any():
            raise InvalidArgument("blocks do not cover the ground set")
        return cls.from_labels(labels)

    @property
    def n(self) -> int:
        return len(self.leader)

    def leaders(self) -> np.ndarray:
        return np.unique(self.leader)

    def __len__(self):
        return len(self.leaders())

    def blocks(self) -> List[List[int]]:
        out: Dict[int, list] = {}
        for i, l in enumerate(self.leader.tolist()):
            out.setdefault(l, []).append(i)
        return sorted(out.values())

    def canonical(self) -> "Partition":
        """Same blocks, smallest-id leaders."""
        return Partition.from_labels(self.leader)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.canonical().leader, other.canonical().leader)

    def __repr__(self):
        return f"Partition(n={self.n}, blocks={len(self)})"


def _check_same(p: Partition, q: Partition):
    if p.n != q.n:
        raise InvalidArgument(f"partitions over different ground sets ({p.n} vs {q.n})")


def components_of(n: int, edges) -> Partition:
    """Connected components of a graph on ``0..n-1``."""
    e = normalize_edges(edges)
    if n == 0:
        return Partition(np.zeros(0, dtype=np.int64))
    g = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    return Partition.from_labels(labels)


def merge_partitions(p: Partition, q: Partition) -> Partition:
    """Finest common coarsening of ``p`` and ``q``."""
    _check_same(p, q)
    ids = np.arange(p.n)
    return components_of(p.n, np.vstack([np.column_stack([ids, p.leader]),
                                         np.column_stack([ids, q.leader])]))


def refines(p: Partition, q: Partition) -> bool:
    """True iff every block of ``p`` lies inside a block of ``q``."""
    _check_same(p, q)
    return bool(np.array_equal(q.leader, q.leader[p.leader]))


# --- leader compression -----------------------------------------------------

@dataclass
class CompressionOutcome:
    partition: Partition
    merge_edges: List[Tuple[int, int]] = field(default_factory=list)
    rounds_used: int = 1


def coin_flips(seed: int, stage: int, e: int, rnd: int, n: int) -> np.ndarray:
    """Fair bits indexed by vertex id, keyed by (seed, stage, level, round)."""
    return np.random.default_rng([seed, stage, e, rnd]).integers(0, 2, size=n, dtype=np.int8)


def leader_compression_round(p: Partition, graph, collect_edges: bool = False,
                             rng=None, coins=None) -> CompressionOutcome:
    """One round of leader compression of ``p`` along ``graph``.

    ``coins`` (indexed by vertex id, read at leaders only) overrides ``rng``.
    """
    n = p.n
    lead = p.leader
    if coins is None:
        rng = rng if rng is not None else np.random.default_rng()
        coins = rng.integers(0, 2, size=n, dtype=np.int8)
    coins = np.asarray(coins).reshape(-1)
    e = graph.edges if isinstance(graph, EdgeSet) else normalize_edges(graph)
    if n == 0 or len(e) == 0:
        return CompressionOutcome(Partition(lead.copy()), [], 1)
    b = coins[lead].astype(bool)
    eid = np.arange(len(e))
    src = np.r_[e[:, 0], e[:, 1]]
    dst = np.r_[e[:, 1], e[:, 0]]
    eid = np.r_[eid, eid]
    ok = b[src] & ~b[dst]
    src, dst, eid = src[ok], dst[ok], eid[ok]
    if len(src) == 0:
        return CompressionOutcome(Partition(lead.copy()), [], 1)
    # each bit-0 receiver keeps its smallest (sender, edge id) notifier
    order = np.lexsort((eid, src, dst))
    src, dst = src[order], dst[order]
    first = np.r_[True, dst[1:] != dst[:-1]]
    x, y = src[first], dst[first]
    # each bit-0 leader keeps the selection of its smallest descendant
    z = lead[y]
    order = np.lexsort((y, z))
    x, y, z = x[order], y[order], z[order]
    first = np.r_[True, z[1:] != z[:-1]]
    x, y, z = x[first], y[first], z[first]
    remap = np.arange(n, dtype=np.int64)
    remap[z] = lead[x]
    edges = [(int(a), int(c)) for a, c in zip(x, y)] if collect_edges else []
    return CompressionOutcome(Partition(remap[lead]), edges, 1)


def compress(p: Partition, graph, h: int, seed: int, stage: int, e: int,
             collect_edges: bool = False, ledger: Optional[RoundLedger] = None):
    """``h`` rounds of leader compression; returns (partition, [edges per round])."""
    per_round = []
    for i in range(1, h + 1):
        out = leader_compression_round(p, graph, collect_edges,
                                       coins=coin_flips(seed, stage, e, i, p.n))
        p = out.partition
        per_round.append(out.merge_edges)
        if ledger is not None:
            ledger.charge("leader_compression_round", p.n + 2 * len(graph), f"lc t=2^{e}")
    return p, per_round


def incomplete_leaders(p: Partition, graph) -> np.ndarray:
    """Leaders whose block has a graph edge with exactly one endpoint inside."""
    e = graph.edges if isinstance(graph, EdgeSet) else normalize_edges(graph)
    if len(e) == 0:
        return np.zeros(0, dtype=np.int64)
    lu, lv = p.leader[e[:, 0]], p.leader[e[:, 1]]
    cut = lu != lv
    return np.unique(np.r_[lu[cut], lv[cut]])


def star_merge(p: Partition, leaders: np.ndarray, keys: np.ndarray) -> Partition:
    """Merge the blocks led by ``leaders`` that share a key, onto the smallest leader."""
    if len(leaders) == 0:
        return Partition(p.leader.copy())
    _, inv = np.unique(keys, return_inverse=True)
    inv = inv.reshape(-1)
    mins = np.full(inv.max() + 1, p.n, dtype=np.int64)
    np.minimum.at(mins, inv, leaders)
    remap = np.arange(p.n, dtype=np.int64)
    remap[leaders] = mins[inv]
    return Partition(remap[p.leader])


# --- the three parts --------------------------------------------------------

def _is_alpha_power(t: int, cfg: AlgorithmConfig) -> bool:
    if t < 1 or t & (t - 1):
        return False
    return (int(t).bit_length() - 1) % cfg.alpha_exp == 0


def part1(points: PointSet, t: int, shift: ShiftVector, spanner_t: EdgeSet,
          config: AlgorithmConfig, quadtree: Optional[Quadtree] = None,
          ledger: Optional[RoundLedger] = None) -> Partition:
    """Checkpoint partition at ``t = alpha**k``."""
    cfg = config.resolve(points.d)
    if not _is_alpha_power(t, cfg):
        raise InvalidArgument(f"part1 needs t a power of alpha={cfg.alpha}, got {t}")
    qt = quadtree or Quadtree(points, shift, cfg)
    e = int(t).bit_length() - 1
    k = e // cfg.alpha_exp
    m = 2 * len(spanner_t)
    if ledger is not None:
        ledger.charge("sort", points.n, "part1 grouping", record_words=points.d)
    p = Partition.from_labels(qt.checkpoint_cell_labels(k))
    p, _ = compress(p, spanner_t, cfg.h, cfg.seed, STAGE_PART1, e, ledger=ledger)
    inc = incomplete_leaders(p, spanner_t)
    if ledger is not None:
        ledger.charge("pram", m, "part1 marking")
        ledger.charge("pram", points.n, "part1 marking")
        ledger.charge("sort", points.n, "part1 merge")
        ledger.charge("pram", points.n, "part1 merge")
    return star_merge(p, inc, qt.big_cell_labels(e)[inc])


def kappa_exp(e: int, alpha_exp: int) -> int:
    """log2 of kappa for level 2**e strictly between powers of alpha."""
    j = e % alpha_exp
    if j == 0:
        raise InvalidArgument("levels that are powers of alpha have no kappa")
    return 1 << ((j & -j).bit_length() - 1)


def part2(t: int, spanner_t: EdgeSet, p_lo: Partition, p_hi: Partition,
          config: AlgorithmConfig, ledger: Optional[RoundLedger] = None) -> Partition:
    """Intermediate level from the finer ``t/kappa`` and coarser ``t*kappa`` partitions."""
    if t < 1 or t & (t - 1):
        raise InvalidArgument(f"t must be a power of 2, got {t}")
    e = int(t).bit_length() - 1
    if e % config.alpha_exp == 0:
        raise InvalidArgument(f"t={t} is a power of alpha; use part1")
    _check_same(p_lo, p_hi)
    if not refines(p_lo, p_hi):
        raise ConsistencyError(f"P(t/kappa) does not refine P(t*kappa) at t={t}", "part2")
    m = 2 * len(spanner_t)
    p, _ = compress(p_lo, spanner_t, config.h, config.seed, STAGE_PART2, e, ledger=ledger)
    inc = incomplete_leaders(p, spanner_t)
    if ledger is not None:
        ledger.charge("pram", m, "part2 marking")
        ledger.charge("pram", p.n, "part2 marking")
        ledger.charge("pram", p.n, "part2 p_hi lookup")
        ledger.charge("sort", p.n, "part2 merge")
        ledger.charge("pram", p.n, "part2 merge")
    return star_merge(p, inc, p_hi.leader[inc])


def part3(t: int, spanner_t: EdgeSet, p_prev: Partition, p_target: Partition,
          config: AlgorithmConfig, ledger: Optional[RoundLedger] = None) -> list:
    """Edges joining ``p_prev`` (level t/2) into ``p_target`` (level t).

    Returns ``(u, v, tag)`` triples; ``tag`` is ``lc<i>`` for round ``i`` of
    compression or ``star`` for the final star.
    """
    _check_same(p_prev, p_target)
    if not refines(p_prev, p_target):
        raise ConsistencyError(f"P(t/2) does not refine P(t) at t={t}", "part3")
    e = int(t).bit_length() - 1
    p, per_round = compress(p_prev, spanner_t, config.h, config.seed, STAGE_PART3, e,
                            collect_edges=True, ledger=ledger)
    if not refines(p, p_target):
        raise ConsistencyError(f"compressed partition escapes P(t) at t={t}", "part3")
    out = []
    for i, es in enumerate(per_round, 1):
        out.extend((u, v, f"lc{i}") for u, v in es)
    subs = p.leaders()
    tops = p_target.leader[subs]
    order = np.lexsort((subs, tops))
    subs, tops = subs[order], tops[order]
    first = np.r_[True, tops[1:] != tops[:-1]] if len(tops) else np.zeros(0, bool)
    centre = subs[first][np.cumsum(first) - 1] if len(tops) else subs
    for c, s in zip(centre[~first], subs[~first]):
        out.append((int(c), int(s), "star"))
    if ledger is not None:
        ledger.charge("sort", p.n, "part3 star")
        ledger.charge("index_in_sets", p.n, "part3 star")
    if len(out) != len(p_prev) - len(p_target):
        raise ConsistencyError(f"edge count mismatch at t={t}", "part3")
    return out


# --- orchestration ----------------------------------------------------------

@dataclass
class PartitionHierarchy:
    """``levels[t]`` is the partition at level ``t``; ``edges[t]`` joins level t/2 into t.

    ``edges[1]`` joins the all-singletons partition into ``levels[1]``.
    """

    levels: Dict[int, Partition]
    edges: Dict[int, list]
    shift: Optional[ShiftVector] = None
    spanner: Optional[LeveledSpanner] = None

    @property
    def n(self) -> int:
        return next(iter(self.levels.values())).n

    def ts(self) -> list:
        return sorted(self.levels)

    def component_counts(self) -> Dict[int, int]:
        return {t: len(self.levels[t]) for t in self.ts()}

    def leader_maps(self) -> list:
        """Leader arrays ``l_0 .. l_L`` with ``l_0`` the singletons."""
        return [np.arange(self.n)] + [self.levels[t].leader for t in self.ts()]

    def edge_sets(self) -> list:
        return [[(u, v) for u, v, _ in self.edges[t]] for t in self.ts()]

    def dump(self, fh) -> None:
        """``t id leader`` lines."""
        for t in self.ts():
            for i, l in enumerate(self.levels[t].leader.tolist()):
                fh.write(f"{t} {i} {l}\n")


@dataclass
class SpanningTree:
    edges: List[Tuple[int, int]]
    weights: List[float]
    per_level: Dict[int, list]

    @property
    def cost(self) -> float:
        return float(sum(self.weights))

    def dump(self, fh) -> None:
        """``u v w t stage`` lines sorted by t then (u, v)."""
        for t in sorted(self.per_level):
            for u, v, w, tag in sorted(self.per_level[t]):
                fh.write(f"{u} {v} {w!r} {t} {tag}\n")


def build_spanner(qt: Quadtree, ledger: Optional[RoundLedger] = None) -> LeveledSpanner:
    cfg = qt.config
    n = qt.points.n
    if ledger is not None:
        ledger.charge("duplicate", n * (qt.top_exp + 1), "spanner input", record_words=qt.points.d)
    per, subs = {}, []
    for e in qt.level_exps():
        es = build_spanner_level(qt.points, 2 ** e, qt.shift, cfg, cfg.strategy, qt)
        per[2 ** e] = es
        if ledger is not None:
            sub = ledger.child()
            sub.charge("sort", n, f"spanner t=2^{e}", record_words=qt.points.d)
            sub.charge("predecessor", n, f"spanner t=2^{e}")
            sub.charge("twohop_spanner", n + 2 * len(es), f"spanner t=2^{e}")
            subs.append(sub)
    if ledger is not None:
        ledger.parallel_group(subs)
    spanner = accumulate_levels(per, cfg.stretch_bound())
    if ledger is not None:
        m = sum(len(s) for s in per.values())
        ledger.charge("duplicate", 2 * m, "spanner accumulate")
        ledger.charge("sort", 2 * m, "spanner accumulate")
    return spanner


def run_pipeline(points: PointSet, config: AlgorithmConfig, rng=None,
                 shift: Optional[ShiftVector] = None, ledger: Optional[RoundLedger] = None,
                 weight_points: Optional[PointSet] = None, spanner: Optional[LeveledSpanner] = None):
    """Spanner, Parts 1-3 and the spanning tree over normalized points.

    ``rng`` may be an int seed overriding ``config.seed``. Tree weights are
    measured on ``weight_points`` when given (original coordinates).
    Returns ``(PartitionHierarchy, SpanningTree, RoundLedger)``.
    """
    cfg = config.resolve(points.d)
    if isinstance(rng, (int, np.integer)):
        from dataclasses import replace
        cfg = replace(cfg, seed=int(rng))
    if points.delta is None:
        raise InvalidArgument("run_pipeline needs normalized points (delta set)")
    ledger = ledger if ledger is not None else RoundLedger(machine_memory_s=cfg.machine_memory_s)
    shift = shift if shift is not None else ShiftVector.draw(points.d, points.delta, cfg.seed)
    qt = Quadtree(points, shift, cfg)
    n = points.n
    A = cfg.alpha_exp
    top = qt.top_exp

    if spanner is None:
        spanner = build_spanner(qt, ledger)
    G = {e: spanner.levels[2 ** e] for e in qt.level_exps()}

    P: Dict[int, Partition] = {}
    subs = []
    for k in range(qt.H + 1):
        sub = ledger.child()
        P[k * A] = part1(points, 2 ** (k * A), shift, G[k * A], cfg, qt, sub)
        subs.append(sub)
    ledger.parallel_group(subs)

    for v in range(cfg.g - 1, -1, -1):
        step = 1 << v
        subs = []
        for e in range(top + 1):
            j = e % A
            if j == 0 or (j & -j) != step:
                continue
            lo, hi = e - step, e + step
            if lo not in P or hi not in P:
                raise ConsistencyError(f"level 2^{e} scheduled before its neighbours", "part2")
            sub = ledger.child()
            P[e] = part2(2 ** e, G[e], P[lo], P[hi], cfg, sub)
            subs.append(sub)
        ledger.parallel_group(subs)

    if sorted(P) != list(range(top + 1)):
        raise ConsistencyError("hierarchy has missing levels", "pipeline")

    edges: Dict[int, list] = {}
    subs = []
    prev = Partition.singletons(n)
    for e in range(top + 1):
        sub = ledger.child()
        edges[2 ** e] = part3(2 ** e, G[e], prev, P[e], cfg, sub)
        subs.append(sub)
        prev = P[e]
    ledger.parallel_group(subs)

    if len(P[top]) != 1 and n > 0:
        raise ConsistencyError(f"top level has {len(P[top])} components", "pipeline")

    wp = weight_points.points if weight_points is not None else points.points
    all_edges, weights, per_level = [], [], {}
    for e in range(top + 1):
        t = 2 ** e
        rows = []
        for u, v, tag in edges[t]:
            a, b = (u, v) if u < v else (v, u)
            w = float(np.linalg.norm(wp[a] - wp[b]))
            all_edges.append((a, b))
            weights.append(w)
            rows.append((a, b, w, tag))
        per_level[t] = rows
    if len(all_edges) != max(n - 1, 0):
        raise ConsistencyError(f"{len(all_edges)} tree edges for n={n}", "pipeline")
    hierarchy = PartitionHierarchy({2 ** e: P[e] for e in range(top + 1)}, edges, shift, spanner)
    return hierarchy, SpanningTree(all_edges, weights, per_level), ledger
