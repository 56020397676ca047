import io
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mpc_emst.errors import InvalidArgument
from mpc_emst.euler import (ClusterTree, EulerTour, change_root, dfs_euler_tour,
                            euler_tour_join, euler_tour_via_hierarchy, naive_splice, parents,
                            path_prefix_sum, read_tour, sequence_insert, subtree_sizes,
                            tour_from_child_order, validate_tour)
from mpc_emst.generators import uniform
from mpc_emst.geometry import AlgorithmConfig
from mpc_emst.pipeline import solve
from mpc_emst.verify import random_join_instance


@st.composite
def trees(draw, max_n=25):
    n = draw(st.integers(1, max_n))
    par = [draw(st.integers(0, i - 1)) for i in range(1, n)]
    return n, [(i, p) for i, p in zip(range(1, n), par)]


def tree_parent(n, edges, root):
    adj = {i: [] for i in range(n)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    par = {root: root}
    todo = [root]
    for u in todo:
        for v in adj[u]:
            if v not in par:
                par[v] = u
                todo.append(v)
    return par


# --- examples -----------------------------------------------------------------

def test_single_node_tour():
    t = dfs_euler_tour([], 7, nodes=[7])
    assert t.seq == () and t.root == 7
    assert validate_tour(t, [], [7]).ok


def test_edge_tour():
    assert dfs_euler_tour([("a", "b")], "a").seq == (("a", "b"), ("b", "a"))


def test_star_tour():
    t = dfs_euler_tour([("r", "c1"), ("r", "c2"), ("r", "c3")], "r")
    assert t.seq == (("r", "c1"), ("c1", "r"), ("r", "c2"), ("c2", "r"), ("r", "c3"), ("c3", "r"))


def test_disconnected_rejected():
    with pytest.raises(InvalidArgument):
        dfs_euler_tour([(0, 1), (2, 3)], 0)


def test_change_root_examples():
    t = EulerTour((("a", "b"), ("b", "a")))
    assert change_root(t, "a").seq == t.seq
    assert change_root(t, "b").seq == (("b", "a"), ("a", "b"))
    with pytest.raises(InvalidArgument):
        change_root(t, "z")


def test_subtree_size_examples():
    t = dfs_euler_tour([(0, 1), (1, 2), (0, 3)], 0)
    s = subtree_sizes(t)
    assert s[0] == 4 and s[2] == 1 and s[3] == 1 and s[1] == 2


def test_path_prefix_sum_chain():
    t = dfs_euler_tour([("a", "b"), ("b", "c")], "a")
    assert path_prefix_sum(t, {("a", "b"): 2, ("b", "c"): 5}) == {"a": 0, "b": 2, "c": 7}
    with pytest.raises(InvalidArgument):
        path_prefix_sum(t, {("a", "b"): 2})


def test_child_order_star_positions():
    tree = ClusterTree(["r", "c1", "c2", "c3"], {"r": "r", "c1": "r", "c2": "r", "c3": "r"},
                       {"r": ["c1", "c2", "c3"]})
    _, pos = tour_from_child_order(tree)
    assert [pos[("r", c)] for c in ("c1", "c2", "c3")] == [1, 3, 5]


def test_child_order_chain_positions():
    tree = ClusterTree(["a", "b", "c"], {"a": "a", "b": "a", "c": "b"})
    tour, pos = tour_from_child_order(tree)
    assert pos == {("a", "b"): 1, ("b", "c"): 2, ("c", "b"): 3, ("b", "a"): 4}
    assert tour.seq == (("a", "b"), ("b", "c"), ("c", "b"), ("b", "a"))


def test_sequence_insert_examples():
    assert sequence_insert([1, 2], {}) == [1, 2]
    assert sequence_insert([1, 2], {0: [9]}) == [9, 1, 2]
    assert sequence_insert([1, 2], {2: [9], 1: [7, 8]}) == [1, 7, 8, 2, 9]
    with pytest.raises(InvalidArgument):
        sequence_insert([1], {3: [0]})


def test_validate_examples():
    good = EulerTour(((0, 1), (1, 0)))
    assert validate_tour(good, [(0, 1)]).ok
    bad = EulerTour(((0, 1), (1, 2), (2, 1), (1, 2), (2, 1), (1, 0)))
    rep = validate_tour(bad, [(0, 1), (1, 2)])
    assert not rep.ok
    assert any("(1, 2)" in p for p in rep.problems)


def test_tour_dump_round_trip():
    t = dfs_euler_tour([(0, 1), (1, 2), (0, 3)], 0)
    buf = io.StringIO()
    t.dump(buf)
    assert buf.getvalue().splitlines()[0] == "1 0 1"
    buf.seek(0)
    back = read_tour(buf)
    assert back.seq == t.seq
    assert validate_tour(back, [(0, 1), (1, 2), (0, 3)]).ok


# --- property tests -------------------------------------------------------------

@given(trees(), st.data())
def test_dfs_tour_valid_and_parents(tr, data):
    n, edges = tr
    root = data.draw(st.integers(0, n - 1))
    t = dfs_euler_tour(edges, root, nodes=range(n))
    assert validate_tour(t, edges, range(n)).ok
    assert len(t) == 2 * n - 2
    assert parents(t) == tree_parent(n, edges, root)


@given(trees(), st.data())
def test_change_root_preserves(tr, data):
    n, edges = tr
    t = dfs_euler_tour(edges, 0, nodes=range(n))
    v = data.draw(st.integers(0, n - 1))
    r = change_root(t, v)
    assert validate_tour(r, edges, range(n)).ok
    assert Counter(r.seq) == Counter(t.seq)
    if r.seq:
        assert r.seq[0][0] == v


@given(trees())
def test_subtree_sizes_match_recursion(tr):
    n, edges = tr
    t = dfs_euler_tour(edges, 0, nodes=range(n))
    par = tree_parent(n, edges, 0)
    size = {i: 1 for i in range(n)}
    for v in sorted(range(1, n), key=lambda v: -depth(par, v)):
        size[par[v]] += size[v]
    assert subtree_sizes(t) == size


def depth(par, v):
    d = 0
    while par[v] != v:
        v = par[v]
        d += 1
    return d


@given(trees(), st.data())
def test_path_prefix_sum_matches_dfs(tr, data):
    n, edges = tr
    w = {e: data.draw(st.integers(1, 100)) for e in edges}
    t = dfs_euler_tour(edges, 0, nodes=range(n))
    par = tree_parent(n, edges, 0)
    want = {}
    for v in range(n):
        s, u = 0, v
        while par[u] != u:
            s += w.get((u, par[u]), w.get((par[u], u)))
            u = par[u]
        want[v] = s
    assert path_prefix_sum(t, w) == want


@given(trees(), st.randoms(use_true_random=False))
def test_child_order_positions(tr, rnd):
    n, edges = tr
    par = tree_parent(n, edges, 0)
    kids = {u: [v for v in range(n) if v != u and par[v] == u] for u in range(n)}
    for u in kids:
        rnd.shuffle(kids[u])
    tour, pos = tour_from_child_order(ClusterTree(list(range(n)), par, kids))
    assert sorted(pos.values()) == list(range(1, 2 * n - 1))
    assert validate_tour(tour, edges, range(n)).ok
    first = tour.first()
    for u, cs in kids.items():
        assert [first[c] for c in cs] == sorted(first[c] for c in cs)


@given(st.lists(st.integers(), max_size=10), st.data())
def test_sequence_insert_matches_naive(base, data):
    keys = data.draw(st.sets(st.integers(0, len(base)), max_size=4))
    ins = {k: data.draw(st.lists(st.integers(), min_size=1, max_size=3)) for k in keys}
    out = []
    for i in range(len(base) + 1):
        out.extend(ins.get(i, []))
        if i < len(base):
            out.append(base[i])
    assert sequence_insert(base, ins) == out


# --- joins ----------------------------------------------------------------------

FIVE = dict(
    clusters={1: [1], 2: [2], 3: [3], 4: [4], 5: [51, 52, 53, 54, 55]},
    subtour=EulerTour(((51, 52), (52, 55), (55, 53), (53, 55), (55, 54), (54, 55), (55, 52),
                       (52, 51))),
    tour=EulerTour(((5, 1), (1, 5), (5, 4), (4, 5), (5, 2), (2, 5), (5, 3), (3, 5))),
    g={(5, 1): (51, 1), (5, 2): (52, 2), (5, 3): (53, 3), (5, 4): (54, 4)},
    tree=[(1, 5), (4, 5), (2, 5), (3, 5)],
)


def test_five_cluster_instance():
    f = FIVE
    sub_edges = f["subtour"].edges()
    edges, out = euler_tour_join(f["clusters"], f["tree"], f["tour"], f["g"],
                                 {5: sub_edges}, {5: f["subtour"]})
    assert validate_tour(out, edges, [1, 2, 3, 4, 51, 52, 53, 54, 55]).ok
    naive = naive_splice(f["clusters"], f["tour"], f["g"], {5: f["subtour"]})
    dup = [e for e, c in Counter(naive).items() if c > 1]
    assert (52, 55) in dup


def test_join_all_singletons():
    clusters = {0: [10], 1: [11], 2: [12]}
    tree = [(0, 1), (1, 2)]
    tour = dfs_euler_tour(tree, 0)
    g = {(0, 1): (10, 11), (1, 2): (11, 12)}
    edges, out = euler_tour_join(clusters, tree, tour, g, {}, {})
    assert out.seq == tuple(g.get(e) or g[(e[1], e[0])][::-1] for e in tour.seq)


def test_join_bad_edge_map():
    clusters = {0: [10], 1: [11]}
    tour = dfs_euler_tour([(0, 1)], 0)
    with pytest.raises(InvalidArgument):
        euler_tour_join(clusters, [(0, 1)], tour, {}, {}, {})
    with pytest.raises(InvalidArgument):
        euler_tour_join(clusters, [(0, 1)], tour, {(0, 1): (11, 10)}, {}, {})


def test_join_bad_subtour():
    clusters = {0: [10, 20], 1: [11]}
    tour = dfs_euler_tour([(0, 1)], 0)
    with pytest.raises(InvalidArgument):
        euler_tour_join(clusters, [(0, 1)], tour, {(0, 1): (10, 11)}, {0: [(10, 20)]},
                        {0: EulerTour(((10, 20), (10, 20)))})


def test_random_joins_validate_and_keep_edges():
    rng = np.random.default_rng(99)
    for _ in range(200):
        clusters, tree, tour, g, se, st_ = random_join_instance(rng)
        edges, out = euler_tour_join(clusters, tree, tour, g, se, st_)
        nodes = [x for m in clusters.values() for x in m]
        assert validate_tour(out, edges, nodes).ok
        want = sorted(tuple(sorted(g[e])) for e in tree) + \
            sorted(tuple(sorted(e)) for es in se.values() for e in es)
        assert sorted(tuple(sorted(e)) for e in edges) == sorted(want)
        assert out.edges() == sorted(want)


# --- hierarchy ------------------------------------------------------------------

def test_hierarchy_one_level():
    tour, rep = euler_tour_via_hierarchy([np.array([0, 1]), np.array([0, 0])], [[(0, 1)]])
    assert len(tour) == 2 and validate_tour(tour, [(0, 1)], [0, 1]).ok


def test_hierarchy_two_levels():
    levels = [np.arange(4), np.array([0, 0, 2, 2]), np.zeros(4, dtype=np.int64)]
    es = [[(0, 1), (2, 3)], [(1, 2)]]
    tour, rep = euler_tour_via_hierarchy(levels, es)
    assert validate_tour(tour, [(0, 1), (2, 3), (1, 2)], range(4)).ok
    assert Counter(tuple(sorted(e)) for e in tour.seq) == {(0, 1): 2, (2, 3): 2, (1, 2): 2}


def test_hierarchy_pads_to_power_of_two():
    levels = [np.arange(4), np.array([0, 0, 2, 3]), np.array([0, 0, 0, 3]),
              np.zeros(4, dtype=np.int64)]
    es = [[(0, 1)], [(1, 2)], [(2, 3)]]
    tour, rep = euler_tour_via_hierarchy(levels, es)
    assert rep.padded_levels == 4 and rep.iterations == 2
    assert validate_tour(tour, [(0, 1), (1, 2), (2, 3)], range(4)).ok


def test_hierarchy_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        euler_tour_via_hierarchy([np.arange(2), np.array([0, 1])], [[]])
    with pytest.raises(InvalidArgument):
        euler_tour_via_hierarchy([np.arange(2), np.zeros(2, dtype=np.int64)], [[]])


@pytest.mark.parametrize("strategy", ["exact-threshold", "cell-leader", "sampled-leader"])
@pytest.mark.parametrize("h", [1, 6])
def test_pipeline_tour_n300(strategy, h):
    cfg = AlgorithmConfig(seed=3, strategy=strategy, h=h)
    res = solve(uniform(300, 8, 3), cfg, oracle=False)
    assert validate_tour(res.tour, res.tree.edges, range(300)).ok
    # diagnostic bound on cluster-tree diameters along the merge micro-hierarchy
    diam = max(res.tour_report.max_cluster_tree_diameter.values())
    assert diam <= 2 * 5 ** cfg.h + 2
    # D' <= 3D + 2 per compression round and 2D + 2 for the star give 2 * 3^h
    assert diam <= 2 * 3 ** cfg.h
