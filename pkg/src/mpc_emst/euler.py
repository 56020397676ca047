"""Euler tours of trees, tour joins, and tours from a partition hierarchy.

Tours are sequences of directed edges ``(u, v)``. Positions are 0-based in
code; the 1-based positions of the closed-form formulas are exposed by
:func:`tour_from_child_order`.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidArgument
from .runtime import RoundLedger

Edge = Tuple[Hashable, Hashable]


@dataclass(frozen=True)
class EulerTour:
    """Cyclic sequence of directed tree edges.

    ``root`` names the single node of a one-node tree, whose tour is empty.
    """

    seq: Tuple[Edge, ...] = ()
    root: Optional[Hashable] = None

    def __post_init__(self):
        object.__setattr__(self, "seq", tuple(tuple(e) for e in self.seq))
        if self.seq and self.root is None:
            object.__setattr__(self, "root", self.seq[0][0])

    def __len__(self):
        return len(self.seq)

    def __iter__(self):
        return iter(self.seq)

    def nodes(self) -> list:
        if not self.seq:
            return [] if self.root is None else [self.root]
        seen, out = set(), []
        for u, _ in self.seq:
            if u not in seen:
                seen.add(u)
                out.append(u)
        return out

    def first(self) -> dict:
        """0-based index of the first edge leaving each node."""
        out = {}
        for i, (u, _) in enumerate(self.seq):
            out.setdefault(u, i)
        return out

    def last(self) -> dict:
        """0-based index of the last edge entering each node."""
        out = {}
        for i, (_, v) in enumerate(self.seq):
            out[v] = i
        return out

    def edges(self) -> list:
        """Undirected tree edges as sorted pairs."""
        return sorted({tuple(sorted(e)) for e in self.seq})

    def dump(self, fh) -> None:
        """``i u v`` lines with 1-based positions."""
        for i, (u, v) in enumerate(self.seq, 1):
            fh.write(f"{i} {u} {v}\n")


def read_tour(fh) -> EulerTour:
    rows = []
    for line in fh:
        parts = line.split()
        if parts:
            rows.append((int(parts[0]), int(parts[1]), int(parts[2])))
    rows.sort()
    return EulerTour(tuple((u, v) for _, u, v in rows))


@dataclass
class ClusterTree:
    """Rooted tree with ordered children and an optional edge map ``g``."""

    nodes: list
    par: dict
    child_order: dict = field(default_factory=dict)
    g: dict = field(default_factory=dict)

    def __post_init__(self):
        roots = [u for u in self.nodes if self.par.get(u) == u]
        if len(roots) != 1:
            raise InvalidArgument(f"tree needs exactly one root, found {len(roots)}")
        if not self.child_order:
            kids = defaultdict(list)
            for u in self.nodes:
                if self.par[u] != u:
                    kids[self.par[u]].append(u)
            self.child_order = {u: sorted(kids.get(u, [])) for u in self.nodes}

    @property
    def root(self):
        return next(u for u in self.nodes if self.par[u] == u)

    def children(self, u) -> list:
        return self.child_order.get(u, [])


@dataclass
class TourReport:
    ok: bool
    problems: List[str] = field(default_factory=list)

    def __bool__(self):
        return self.ok


def _adjacency(edges: Iterable[Edge], nodes=None) -> dict:
    adj = defaultdict(list)
    for u, v in edges:
        if u == v:
            raise InvalidArgument(f"self-loop at {u}")
        adj[u].append(v)
        adj[v].append(u)
    for u in nodes or ():
        adj.setdefault(u, [])
    return adj


def dfs_euler_tour(edges: Iterable[Edge], root, nodes=None, child_order=None) -> EulerTour:
    """Euler tour of a tree from ``root``; children in ``child_order`` or by id."""
    edges = list(edges)
    adj = _adjacency(edges, nodes)
    adj.setdefault(root, [])
    if len(edges) != len(adj) - 1:
        raise InvalidArgument(f"{len(edges)} edges cannot span {len(adj)} nodes as a tree")
    seq = []
    seen = {root}
    stack = [(root, iter(child_order[root] if child_order else sorted(adj[root])))]
    while stack:
        u, it = stack[-1]
        nxt = None
        for v in it:
            if v not in seen:
                nxt = v
                break
        if nxt is None:
            stack.pop()
            if stack:
                seq.append((u, stack[-1][0]))
            continue
        seen.add(nxt)
        seq.append((u, nxt))
        kids = child_order[nxt] if child_order else sorted(adj[nxt])
        stack.append((nxt, iter(kids)))
    if len(seen) != len(adj):
        raise InvalidArgument(f"tree is disconnected: reached {len(seen)} of {len(adj)} nodes")
    return EulerTour(tuple(seq), root)


def validate_tour(tour, tree_edges: Iterable[Edge], nodes=None) -> TourReport:
    """Chain property, length 2n-2 and exactly-once use of each direction."""
    seq = list(tour.seq if isinstance(tour, EulerTour) else tour)
    tree_edges = list(tree_edges)
    node_set = set(nodes) if nodes is not None else {x for e in tree_edges for x in e}
    if not node_set and isinstance(tour, EulerTour) and tour.root is not None:
        node_set = {tour.root}
    n = max(len(node_set), 1)
    problems = []
    if len(seq) != 2 * n - 2:
        problems.append(f"length {len(seq)} != 2n-2 = {2 * n - 2}")
    for i, (u, v) in enumerate(seq):
        nu = seq[(i + 1) % len(seq)][0]
        if v != nu:
            problems.append(f"break at position {i + 1}: ({u},{v}) then ({nu},...)")
            break
    want = set()
    for u, v in tree_edges:
        want.add((u, v))
        want.add((v, u))
    counts = defaultdict(int)
    for e in seq:
        counts[e] += 1
    for e, c in sorted(counts.items(), key=repr):
        if e not in want:
            problems.append(f"edge {e} is not a tree edge")
        elif c > 1:
            problems.append(f"directed edge {e} used {c} times")
    missing = want - set(counts)
    if missing:
        problems.append(f"{len(missing)} directed tree edges missing, e.g. {min(missing, key=repr)}")
    return TourReport(not problems, problems)


def change_root(tour: EulerTour, v) -> EulerTour:
    """Rotate the tour to start at the first appearance of ``v``."""
    if not tour.seq:
        if tour.root is not None and tour.root != v:
            raise InvalidArgument(f"node {v!r} not in tour")
        return EulerTour((), v)
    first = tour.first()
    if v not in first:
        raise InvalidArgument(f"node {v!r} not in tour")
    i = first[v]
    return EulerTour(tour.seq[i:] + tour.seq[:i], v)


def parents(tour: EulerTour) -> dict:
    """Parent map of the tour's tree rooted at its first node (root maps to itself)."""
    par = {tour.root: tour.root} if tour.root is not None else {}
    for u, v in tour.seq:
        if v not in par:
            par[v] = u
    return par


def subtree_sizes(tour: EulerTour) -> dict:
    """Subtree sizes with respect to the tour's starting node."""
    if not tour.seq:
        return {} if tour.root is None else {tour.root: 1}
    first, last = tour.first(), tour.last()
    out = {}
    for u in first:
        f = first[u]
        l = last[u]
        if u == tour.root:
            l = len(tour.seq) - 1
        elif l < f:  # leaf: the entering edge precedes the leaving one
            l = f - 1
        out[u] = (l - f + 1) // 2 + 1
    return out


def path_prefix_sum(tour: EulerTour, weights: dict) -> dict:
    """Root-to-node path weight for every node via signed prefix sums."""
    def w(u, v):
        key = (u, v) if (u, v) in weights else (v, u)
        if key not in weights:
            raise InvalidArgument(f"missing weight for edge {(u, v)}")
        return weights[key]

    out = {} if tour.root is None else {tour.root: 0.0}
    acc = 0.0
    for u, v in tour.seq:
        if v not in out:
            acc += w(u, v)
            out[v] = acc
        else:
            acc -= w(u, v)
    return out


def tour_from_child_order(tree: ClusterTree):
    """Tour whose sibling first-appearances follow ``child_order``.

    Returns ``(EulerTour, positions)`` where ``positions`` maps each directed
    edge to its 1-based position given by the closed form.
    """
    root = tree.root
    order = [root]
    for u in order:
        order.extend(tree.children(u))
    if len(order) != len(tree.nodes):
        raise InvalidArgument("child_order does not reach every node")
    size = {u: 1 for u in order}
    for u in reversed(order[1:]):
        size[tree.par[u]] += size[u]
    pos = {}
    p_of = {root: 0}
    for u in order:
        acc = 0
        for c in tree.children(u):
            p = p_of[u] + 1 + acc
            p_of[c] = p
            pos[(u, c)] = p
            pos[(c, u)] = p + 2 * size[c] - 1
            acc += 2 * size[c]
    seq = [None] * (2 * len(order) - 2)
    for e, p in pos.items():
        seq[p - 1] = e
    return EulerTour(tuple(seq), root), pos


def sequence_insert(base: Sequence, inserts: Dict[int, Sequence]) -> list:
    """Place ``inserts[k]`` after the first ``k`` items of ``base``."""
    out = []
    keys = sorted(inserts)
    if len(set(keys)) != len(keys):
        raise InvalidArgument("duplicate insertion index")
    for k in keys:
        if not 0 <= k <= len(base):
            raise InvalidArgument(f"insertion index {k} outside 0..{len(base)}")
    j = 0
    for k in keys:
        out.extend(base[j:k])
        out.extend(inserts[k])
        j = k
    out.extend(base[j:])
    return out


JOIN_COSTS = (
    ("sort", "broadcast"),                # change root of A and every A_i
    ("sort",),                            # parents from first appearances
    ("sort", "pram", "index_in_sets"),    # rank children
    ("sort", "pram", "pram", "prefix_sum", "pram"),  # tour from child order
    ("pram",),                            # map through g
    ("pram", "predecessor"),              # chop A_i into segments
    ("sort",),                            # last appearances f
    ("sequence_insert",),
)


def join_rounds(ledger_table=None) -> int:
    from .runtime import CostTable
    table = ledger_table or CostTable()
    return sum(table.cost(p) for step in JOIN_COSTS for p in step)


def euler_tour_join(clusters: Dict[Hashable, list], tree_edges: Iterable[Edge], tour: EulerTour,
                    g: Dict[Edge, Edge], subtrees: Dict[Hashable, list],
                    subtours: Dict[Hashable, EulerTour], ledger: Optional[RoundLedger] = None,
                    check: bool = True):
    """Join per-cluster tours along a cluster tree into one tour.

    ``g`` maps a directed cluster edge ``(Ci, Cj)`` to a point pair ``(x, y)``
    with ``x`` in ``Ci``; reverse directions are filled in when missing.
    Returns ``(edges, EulerTour)`` over the cluster members.
    """
    tree_edges = list(tree_edges)
    g = dict(g)
    for (a, b), (x, y) in list(g.items()):
        g.setdefault((b, a), (y, x))
    home = {}
    for c, mem in clusters.items():
        for x in mem:
            home[x] = c
    for a, b in tree_edges:
        if (a, b) not in g:
            raise InvalidArgument(f"edge map missing cluster edge {(a, b)}")
        x, y = g[(a, b)]
        if home.get(x) != a or home.get(y) != b:
            raise InvalidArgument(f"edge map sends {(a, b)} to {(x, y)} outside its clusters")
    if check:
        rep = validate_tour(tour, tree_edges, clusters.keys())
        if not rep.ok:
            raise InvalidArgument(f"cluster tour invalid: {rep.problems[0]}")
        for c, mem in clusters.items():
            st = subtours.get(c, EulerTour((), mem[0] if len(mem) == 1 else None))
            rep = validate_tour(st, subtrees.get(c, []), mem)
            if not rep.ok:
                raise InvalidArgument(f"subtour of cluster {c!r} invalid: {rep.problems[0]}")

    out_edges = [tuple(g[(a, b)]) for a, b in tree_edges]
    for c in clusters:
        out_edges.extend(tuple(e) for e in subtrees.get(c, []))

    if ledger is not None:
        words = 2 * sum(len(m) for m in clusters.values())
        for step in JOIN_COSTS:
            for p in step:
                ledger.charge(p, words, "euler join")

    if len(clusters) == 1:
        (c,) = clusters
        return out_edges, subtours.get(c, EulerTour((), clusters[c][0]))

    root = min(clusters)
    A = change_root(tour, root)
    par = parents(A)
    terminals = defaultdict(set)
    for (a, b), (x, y) in g.items():
        terminals[a].add(x)

    sub = {}
    for c, mem in clusters.items():
        st = subtours.get(c)
        if st is None or not st.seq:
            sub[c] = EulerTour((), mem[0])
            continue
        start = min(terminals[c]) if c == root else g[(c, par[c])][0]
        sub[c] = change_root(st, start)
    firsts = {c: (sub[c].first() if sub[c].seq else {sub[c].root: 0}) for c in clusters}

    kids = defaultdict(list)
    for c in clusters:
        if c != root:
            kids[par[c]].append(c)
    order = {c: sorted(kids[c], key=lambda j: (firsts[c][g[(c, j)][0]], j)) for c in clusters}
    abar, _ = tour_from_child_order(ClusterTree(list(clusters), par, order))
    ahat = [g[e] for e in abar.seq]

    segments = {}
    for c in clusters:
        if not sub[c].seq:
            continue
        fc = firsts[c]
        starts = sorted((fc[x], x) for x in terminals[c])
        seq = sub[c].seq
        for (s, x), nxt in zip(starts, starts[1:] + [(len(seq), None)]):
            segments[x] = seq[s:nxt[0]]

    f = {}
    for j, (_, v) in enumerate(ahat, 1):
        f[v] = j
    inserts = {f[x]: seg for x, seg in segments.items() if seg}
    joined = sequence_insert(ahat, inserts)
    return out_edges, EulerTour(tuple(joined), joined[0][0] if joined else None)


def naive_splice(clusters: Dict[Hashable, list], tour: EulerTour, g: Dict[Edge, Edge],
                 subtours: Dict[Hashable, EulerTour]) -> list:
    """Splice without re-ordering children; kept as a counterexample.

    Between consecutive cluster edges the walk inside a cluster follows
    that cluster's tour cyclically from the entry point to the exit point.
    """
    g = dict(g)
    for (a, b), (x, y) in list(g.items()):
        g.setdefault((b, a), (y, x))
    seq = tour.seq
    out = []
    for i, e in enumerate(seq):
        x, y = g[e]
        out.append((x, y))
        c = e[1]
        exit_pt = g[seq[(i + 1) % len(seq)]][0]
        st = subtours.get(c)
        if st is None or not st.seq or y == exit_pt:
            continue
        walk = list(st.seq)
        k = next(j for j, (u, _) in enumerate(walk) if u == y)
        j = k
        while True:
            out.append(walk[j])
            if walk[j][1] == exit_pt:
                break
            j = (j + 1) % len(walk)
    return out


# --- tours from a hierarchy ---------------------------------------------------

@dataclass
class HierarchyTourReport:
    levels: int
    padded_levels: int
    iterations: int
    max_cluster_tree_diameter: Dict[int, int] = field(default_factory=dict)


def _tree_diameter(edges: list) -> int:
    if not edges:
        return 0
    adj = _adjacency(edges)

    def far(s):
        dist = {s: 0}
        todo = [s]
        for u in todo:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    todo.append(v)
        far_node = max(dist, key=dist.get)
        return far_node, dist[far_node]

    a, _ = far(edges[0][0])
    return far(a)[1]


def low_diameter_rounds(h: int) -> int:
    """Base-tour rounds charged for cluster trees of diameter at most 2*5^h + 2."""
    return math.ceil(math.log2(2 * 5 ** h + 2))


def _groups(leader: np.ndarray) -> dict:
    order = np.argsort(leader, kind="stable")
    lab = leader[order]
    cuts = np.flatnonzero(np.diff(lab)) + 1
    if len(order) == 0:
        return {}
    return {int(lab[s]): order[s:e] for s, e in zip(np.r_[0, cuts], np.r_[cuts, len(order)])}


def euler_tour_via_hierarchy(levels: Sequence[np.ndarray], edge_sets: Sequence[list],
                             ledger: Optional[RoundLedger] = None, h: int = 1,
                             check: bool = False):
    """Euler tour of the tree ``union(E_1..E_L)`` by doubling over the hierarchy.

    ``levels`` are leader arrays ``l_0..l_L`` (``l_0`` all singletons, ``l_L``
    one block) and ``edge_sets[l-1]`` joins level ``l-1`` into level ``l``.
    Returns ``(EulerTour, HierarchyTourReport)``.
    """
    levels = [np.asarray(l, dtype=np.int64) for l in levels]
    edge_sets = [list(map(tuple, es)) for es in edge_sets]
    L = len(levels) - 1
    if L < 1 or len(edge_sets) != L:
        raise InvalidArgument("need leader maps l_0..l_L and edge sets E_1..E_L")
    n = len(levels[0])
    if not np.array_equal(levels[0], np.arange(n)):
        raise InvalidArgument("l_0 must be the all-singletons partition")
    if n and len(np.unique(levels[L])) != 1:
        raise InvalidArgument("l_L must be a single block")
    for l in range(1, L + 1):
        prev, cur = levels[l - 1], levels[l]
        if len(np.unique(prev)) - len(edge_sets[l - 1]) != len(np.unique(cur)):
            raise InvalidArgument(f"level {l}: edge count does not match the merge")
        for x, y in edge_sets[l - 1]:
            if prev[x] == prev[y] or cur[x] != cur[y]:
                raise InvalidArgument(f"level {l}: edge {(x, y)} is not a merge edge")

    Lp = 1 << max(L - 1, 0).bit_length()
    levels = levels + [levels[L]] * (Lp - L)
    edge_sets = edge_sets + [[] for _ in range(Lp - L)]
    R = Lp.bit_length() - 1
    report = HierarchyTourReport(L, Lp, R)
    groups = [_groups(l) for l in levels]

    # tours are stored as directed original edges, keyed by (level, cluster)
    tours: Dict[Tuple[int, int], list] = {}
    for l in range(1, Lp + 1):
        lo, hi = levels[l - 1], levels[l]
        by_cluster = defaultdict(list)
        for x, y in edge_sets[l - 1]:
            by_cluster[int(hi[x])].append((x, y))
        diam = 0
        for c, es in by_cluster.items():
            node_edges = [(int(lo[x]), int(lo[y])) for x, y in es]
            back = {}
            for (x, y), (a, b) in zip(es, node_edges):
                back[(a, b)] = (x, y)
                back[(b, a)] = (y, x)
            t = dfs_euler_tour(node_edges, min(min(e) for e in node_edges))
            tours[(l, c)] = [back[e] for e in t.seq]
            diam = max(diam, _tree_diameter(node_edges))
        if l <= L:
            report.max_cluster_tree_diameter[l] = diam
    if ledger is not None:
        ledger.charge("euler_tour_low_diameter", 2 * n, "euler base", times=low_diameter_rounds(h))

    for r in range(1, R + 1):
        half = 1 << (r - 1)
        if ledger is not None:
            ledger.charge("pram", 2 * n, f"euler g map r={r}")
        subs = []
        new = {}
        for l in range(1 << r, Lp + 1, 1 << r):
            m, b = l - half, l - 2 * half
            lm, lb = levels[m], levels[b]
            for c, members in groups[l].items():
                inner = np.unique(lm[members])
                if len(inner) == 1:
                    t = tours.get((m, int(inner[0])))
                    if t:
                        new[(l, c)] = t
                    continue
                top = tours[(l, c)]
                clusters = {int(ci): sorted(set(int(v) for v in lb[groups[m][int(ci)]]))
                            for ci in inner}
                A = EulerTour(tuple((int(lm[x]), int(lm[y])) for x, y in top))
                g = {(int(lm[x]), int(lm[y])): (int(lb[x]), int(lb[y])) for x, y in top}
                tree_edges = sorted({tuple(sorted(e)) for e in A.seq})
                back = {}
                for x, y in top:
                    back[(int(lb[x]), int(lb[y]))] = (x, y)
                subtours, subtrees = {}, {}
                for ci in clusters:
                    st = tours.get((m, ci), [])
                    proj = [(int(lb[x]), int(lb[y])) for x, y in st]
                    for (x, y), e in zip(st, proj):
                        back[e] = (x, y)
                    subtours[ci] = EulerTour(tuple(proj), None if proj else clusters[ci][0])
                    subtrees[ci] = sorted({tuple(sorted(e)) for e in proj})
                sub = ledger.child() if ledger is not None else None
                _, joined = euler_tour_join(clusters, tree_edges, A, g, subtrees, subtours,
                                            ledger=sub, check=check)
                if sub is not None:
                    subs.append(sub)
                new[(l, c)] = [back[e] for e in joined.seq]
        if ledger is not None:
            if not subs:
                # every block was a single cluster; the join is still one superstep
                sub = ledger.child()
                for step in JOIN_COSTS:
                    for p in step:
                        sub.charge(p, 2 * n, "euler join")
                subs.append(sub)
            ledger.parallel_group(subs)
        tours = new

    if n <= 1:
        return EulerTour((), 0 if n == 1 else None), report
    final = tours[(Lp, int(levels[Lp][0]))]
    return EulerTour(tuple(final)), report
