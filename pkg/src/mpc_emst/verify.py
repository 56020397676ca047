"""Invariant checks shared by the ``verify`` command and the test-suite."""
from __future__ import annotations

import math
from typing import Callable, Dict, List, Tuple

import numpy as np

from .euler import dfs_euler_tour, euler_tour_join, validate_tour
from .geometry import AlgorithmConfig, PointSet, Quadtree, ShiftVector, normalize_aspect
from .oracle import component_sum, exact_mst
from .partitions import Partition, components_of, leader_compression_round, refines
from .spanner import build_leveled_spanner


def hierarchy_problems(result) -> List[str]:
    """Nesting, cell confinement and spanner-coarsening of a finished run."""
    out = []
    hier = result.hierarchy
    pts = result.normalized
    shift = hier.shift or ShiftVector.draw(pts.d, pts.delta, result.config.seed)
    qt = Quadtree(pts, shift, result.config)
    spanner = hier.spanner or build_leveled_spanner(qt)
    ts = hier.ts()
    prev = Partition.singletons(pts.n)
    for t in ts:
        cur = hier.levels[t]
        if not refines(prev, cur):
            out.append(f"level {t} does not coarsen level {t // 2}")
        e = t.bit_length() - 1
        big = qt.big_cell_labels(e)
        if not np.array_equal(big, big[cur.leader]):
            out.append(f"level {t} has a component spanning two confining cells")
        bfs = components_of(pts.n, spanner.levels[t].edges)
        if not refines(bfs, cur):
            out.append(f"level {t} is finer than the spanner components")
        prev = cur
    if pts.n and len(hier.levels[ts[-1]]) != 1:
        out.append("top level is not a single component")
    total = sum(len(v) for v in hier.edges.values())
    if total != max(pts.n - 1, 0):
        out.append(f"{total} edges for n={pts.n}")
    return out


def tree_problems(n: int, edges) -> List[str]:
    if len(edges) != max(n - 1, 0):
        return [f"{len(edges)} edges for n={n}"]
    if n and len(components_of(n, edges)) != 1:
        return ["tree is disconnected"]
    return []


def random_join_instance(rng: np.random.Generator):
    """Random tree over 2-12 clusters of 1-20 points with tours and an edge map."""
    k = int(rng.integers(2, 13))
    sizes = rng.integers(1, 21, size=k)
    clusters, sub_edges, sub_tours = {}, {}, {}
    nxt = 0
    for c in range(k):
        mem = list(range(nxt, nxt + int(sizes[c])))
        nxt += int(sizes[c])
        clusters[c] = mem
        es = [(mem[i], mem[int(rng.integers(0, i))]) for i in range(1, len(mem))]
        sub_edges[c] = es
        root = mem[int(rng.integers(0, len(mem)))]
        sub_tours[c] = dfs_euler_tour(es, root, nodes=mem)
    tree = [(c, int(rng.integers(0, c))) for c in range(1, k)]
    g = {}
    for a, b in tree:
        g[(a, b)] = (clusters[a][int(rng.integers(0, len(clusters[a])))],
                     clusters[b][int(rng.integers(0, len(clusters[b])))])
    tour = dfs_euler_tour(tree, int(rng.integers(0, k)))
    return clusters, tree, tour, g, sub_edges, sub_tours


def suite_tour(seed: int = 0, n: int = 100, runs: int = 3, joins: int = 100) -> Tuple[int, int]:
    from .pipeline import solve
    ok = total = 0
    rng = np.random.default_rng([seed, 11])
    for r in range(runs):
        pts = PointSet(rng.random((n, 4)))
        res = solve(pts, AlgorithmConfig(seed=seed + r), oracle=False)
        ok += validate_tour(res.tour, res.tree.edges, range(n)).ok
        total += 1
    for _ in range(joins):
        clusters, tree, tour, g, se, st = random_join_instance(rng)
        edges, out = euler_tour_join(clusters, tree, tour, g, se, st)
        ok += validate_tour(out, edges, [x for m in clusters.values() for x in m]).ok
        total += 1
    return ok, total


def suite_hierarchy(seed: int = 0, n: int = 100, runs: int = 3) -> Tuple[int, int]:
    from .pipeline import solve
    ok = 0
    rng = np.random.default_rng([seed, 12])
    for r in range(runs):
        pts = PointSet(rng.random((n, 4)))
        res = solve(pts, AlgorithmConfig(seed=seed + r), oracle=False)
        ok += not hierarchy_problems(res) and not tree_problems(n, res.tree.edges)
    return ok, runs


def suite_sandwich(seed: int = 0, n: int = 100, runs: int = 3) -> Tuple[int, int]:
    ok = 0
    rng = np.random.default_rng([seed, 13])
    for _ in range(runs):
        pts, _ = normalize_aspect(PointSet(rng.random((n, 3))), AlgorithmConfig())
        mst = exact_mst(pts)[1]
        s = component_sum(pts)
        ok += mst <= s <= 2 * mst
    return ok, runs


def path_graph(k: int) -> list:
    return [(i, i + 1) for i in range(k - 1)]


def star_graph(k: int) -> list:
    return [(0, i) for i in range(1, k)]


def random_tree_graph(k: int, rng) -> list:
    return [(i, int(rng.integers(0, i))) for i in range(1, k)]


def compression_decay(edges: list, k: int, h: int, trials: int, seed: int,
                      batch: int = 1000) -> Tuple[float, float, int]:
    """Mean and standard error of |P^(h)| - |P (+) H| from singletons.

    Trials run as disjoint copies of the graph inside one round call.
    Returns ``(mean, stderr, initial_gap)``.
    """
    target = len(components_of(k, edges))
    gap0 = k - target
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rng = np.random.default_rng([seed, 14, k, h])
    vals = []
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        offs = (np.arange(b) * k)[:, None, None]
        big = (e[None, :, :] + offs).reshape(-1, 2)
        p = Partition.singletons(b * k)
        for _ in range(h):
            coins = rng.integers(0, 2, size=b * k, dtype=np.int8)
            p = leader_compression_round(p, big, coins=coins).partition
        per_copy = np.zeros(b, dtype=np.int64)
        leaders = p.leaders()
        np.add.at(per_copy, leaders // k, 1)
        vals.append(per_copy - target)
        done += b
    v = np.concatenate(vals).astype(float)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v))), gap0


def suite_compression(seed: int = 0, trials: int = 2000) -> Tuple[int, int]:
    ok = total = 0
    rng = np.random.default_rng([seed, 15])
    for edges, k in ((path_graph(10), 10), (star_graph(10), 10), (random_tree_graph(20, rng), 20)):
        for h in range(1, 7):
            mean, se, gap = compression_decay(edges, k, h, trials, seed)
            ok += mean <= 0.75 ** h * gap + 3 * se
            total += 1
    return ok, total


def cut_rate(w: float, level: float, d: int, shifts: int, seed: int) -> Tuple[float, float]:
    """Fraction of random shifts separating two points at distance ``w``."""
    rng = np.random.default_rng([seed, 16, d])
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    p = rng.random(d) * level
    q = p + w * direction
    a = rng.uniform(0.0, level * 4, size=(shifts, d))
    cp = np.floor((p + a) / level)
    cq = np.floor((q + a) / level)
    rate = float((cp != cq).any(axis=1).mean())
    return rate, math.sqrt(max(rate * (1 - rate), 1e-12) / shifts)


def suite_cut(seed: int = 0, shifts: int = 10000) -> Tuple[int, int]:
    ok = total = 0
    for d in (1, 2, 8):
        for level in (1.0, 4.0):
            for w in (0.05, 0.2, 0.5):
                rate, _ = cut_rate(w * level / math.sqrt(d), level, d, shifts, seed)
                bound = w
                p = min(bound, 1.0)
                ok += rate <= bound + 3 * math.sqrt(p * (1 - p) / shifts)
                total += 1
    return ok, total


SUITES: Dict[str, Callable[..., Tuple[int, int]]] = {
    "tour": suite_tour,
    "hierarchy": suite_hierarchy,
    "sandwich": suite_sandwich,
    "compression": suite_compression,
    "cut": suite_cut,
}
