import numpy as np
import pytest
from hypothesis import given, strategies as st

from mpc_emst.errors import ConsistencyError, InvalidArgument
from mpc_emst.generators import uniform
from mpc_emst.geometry import AlgorithmConfig, PointSet, Quadtree, ShiftVector, normalize_aspect
from mpc_emst.partitions import (Partition, compress, components_of, incomplete_leaders,
                                 kappa_exp, leader_compression_round, merge_partitions, part1,
                                 part2, part3, refines, run_pipeline)
from mpc_emst.spanner import EdgeSet
from mpc_emst.verify import compression_decay, hierarchy_problems, path_graph

from conftest import DSU, is_spanning_tree


def labels_strategy(max_n=12):
    return st.integers(1, max_n).flatmap(
        lambda n: st.lists(st.integers(0, n - 1), min_size=n, max_size=n))


def edges_strategy(n):
    return st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n)


def brute_refines(p, q):
    n = p.n
    return all(q.leader[x] == q.leader[y] for x in range(n) for y in range(n)
               if p.leader[x] == p.leader[y])


# --- Partition basics ---------------------------------------------------------

def test_leader_invariant_enforced():
    with pytest.raises(InvalidArgument):
        Partition(np.array([1, 2, 2]))
    with pytest.raises(InvalidArgument):
        Partition(np.array([0, 5]))


def test_from_blocks_and_equality():
    p = Partition.from_blocks([[0, 2], [1]], 3)
    assert list(p.leader) == [0, 1, 0]
    assert p == Partition(np.array([2, 1, 2]))
    assert p.blocks() == [[0, 2], [1]]
    with pytest.raises(InvalidArgument):
        Partition.from_blocks([[0]], 2)


def test_merge_example():
    p = Partition.from_blocks([[0], [1, 2], [3], [4]], 5)
    q = Partition.from_blocks([[0], [1], [2, 3], [4]], 5)
    assert merge_partitions(p, q).blocks() == [[0], [1, 2, 3], [4]]


def test_merge_size_mismatch():
    with pytest.raises(InvalidArgument):
        merge_partitions(Partition.singletons(2), Partition.singletons(3))
    with pytest.raises(InvalidArgument):
        refines(Partition.singletons(2), Partition.singletons(3))


@given(labels_strategy())
def test_merge_idempotent(lab):
    p = Partition.from_labels(lab)
    assert merge_partitions(p, p) == p


@given(labels_strategy(), st.data())
def test_merge_matches_union_find(lab, data):
    n = len(lab)
    p = Partition.from_labels(lab)
    q = Partition.from_labels(data.draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n)))
    dsu = DSU(n)
    for part in (p, q):
        for x in range(n):
            dsu.union(x, int(part.leader[x]))
    m = merge_partitions(p, q)
    assert len(m) == len({dsu.find(x) for x in range(n)})
    for x in range(n):
        for y in range(n):
            assert (m.leader[x] == m.leader[y]) == (dsu.find(x) == dsu.find(y))
    assert refines(p, m) and refines(q, m)
    assert brute_refines(p, m)


def test_refines_examples():
    p = Partition.from_blocks([[0, 1], [2]], 3)
    assert refines(Partition.singletons(3), p)
    assert refines(p, Partition(np.zeros(3, dtype=np.int64)))
    assert not refines(p, Partition.singletons(3))


@given(labels_strategy(), labels_strategy())
def test_refines_matches_definition(a, b):
    n = min(len(a), len(b))
    p, q = Partition.from_labels(a[:n]), Partition.from_labels(b[:n])
    assert refines(p, q) == brute_refines(p, q)


# --- leader compression -------------------------------------------------------

def test_compression_forced_coins():
    out = leader_compression_round(Partition.singletons(2), [(0, 1)], True,
                                   coins=np.array([1, 0]))
    assert len(out.partition) == 1
    assert out.merge_edges == [(0, 1)]


def test_compression_empty_graph():
    p = Partition.from_blocks([[0, 1], [2]], 3)
    out = leader_compression_round(p, [], True, rng=np.random.default_rng(0))
    assert out.partition == p and out.merge_edges == []


def test_compression_tie_break_smallest_sender():
    # leaders 0 and 1 flip 1, leader 2 flips 0: 2 hears from both and keeps 0
    out = leader_compression_round(Partition.singletons(3), [(1, 2), (0, 2)], True,
                                   coins=np.array([1, 1, 0]))
    assert out.merge_edges == [(0, 2)]
    assert list(out.partition.leader) == [0, 1, 0]


@given(labels_strategy(10), st.data(), st.integers(0, 2 ** 32 - 1))
def test_compression_round_bounds(lab, data, seed):
    n = len(lab)
    p = Partition.from_labels(lab)
    graph = data.draw(edges_strategy(n))
    out = leader_compression_round(p, graph, True, rng=np.random.default_rng(seed))
    q = out.partition
    assert refines(p, q)
    assert refines(q, merge_partitions(p, components_of(n, graph)))
    # collected edges form a forest over the blocks of p
    dsu = DSU(n)
    for x in range(n):
        dsu.union(x, int(p.leader[x]))
    for u, v in out.merge_edges:
        assert dsu.union(u, v)
    assert len(out.merge_edges) == len(p) - len(q)


def test_compression_decay_path_unit():
    mean, se, gap = compression_decay(path_graph(10), 10, 3, 2000, seed=1)
    assert gap == 9
    assert mean <= 0.75 ** 3 * gap + 3 * se


def test_compress_reproducible():
    g = path_graph(30)
    a, _ = compress(Partition.singletons(30), g, 4, seed=5, stage=1, e=3)
    b, _ = compress(Partition.singletons(30), g, 4, seed=5, stage=1, e=3)
    assert a == b


@given(labels_strategy(10), st.data())
def test_incomplete_marking_matches_definition(lab, data):
    n = len(lab)
    p = Partition.from_labels(lab)
    graph = data.draw(edges_strategy(n))
    want = sorted({int(p.leader[x]) for u, v in graph for x in (u, v)
                   if p.leader[u] != p.leader[v]})
    assert sorted(incomplete_leaders(p, graph).tolist()) == want


# --- parts 1 to 3 -------------------------------------------------------------

def _qt(x, delta=1024.0):
    pts = PointSet(np.asarray(x, dtype=float), delta=delta)
    cfg = AlgorithmConfig().resolve(pts.d)
    return pts, cfg, Quadtree(pts, ShiftVector.zero(pts.d), cfg)


def test_part1_single_small_cell():
    pts, cfg, qt = _qt([[0.1, 0.2], [1.0, 1.5], [1.9, 0.0]])
    p = part1(pts, 16, qt.shift, EdgeSet(), cfg, qt)
    assert len(p) == 1


def test_part1_two_isolated_clusters():
    pts, cfg, qt = _qt([[0.0, 0.0], [1.0, 1.0], [100.0, 100.0], [101.0, 100.5]])
    p = part1(pts, 16, qt.shift, EdgeSet(), cfg, qt)
    assert p.blocks() == [[0, 1], [2, 3]]


def test_part1_rejects_non_alpha_power():
    pts, cfg, qt = _qt([[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(InvalidArgument):
        part1(pts, 8, qt.shift, EdgeSet(), cfg, qt)


@pytest.mark.parametrize("e, kexp", [(1, 1), (2, 2), (3, 1), (5, 1), (6, 2), (7, 1)])
def test_kappa(e, kexp):
    assert kappa_exp(e, 4) == kexp
    assert kappa_exp(e, 4) == (e % 4) & -(e % 4)


def test_kappa_alpha_power_rejected():
    with pytest.raises(InvalidArgument):
        kappa_exp(8, 4)


def test_part2_nothing_merges():
    cfg = AlgorithmConfig()
    p_lo = Partition.from_blocks([[0, 1], [2, 3]], 4)
    p_hi = Partition(np.zeros(4, dtype=np.int64))
    out = part2(4, EdgeSet(np.array([[0, 1], [2, 3]])), p_lo, p_hi, cfg)
    assert out == p_lo


def test_part2_all_incomplete_single_block():
    cfg = AlgorithmConfig(h=1)
    p_lo = Partition.singletons(4)
    p_hi = Partition(np.zeros(4, dtype=np.int64))
    out = part2(4, EdgeSet(np.array([[0, 1], [1, 2], [2, 3]])), p_lo, p_hi, cfg)
    assert refines(p_hi, out) and refines(out, p_hi)
    assert refines(p_lo, out)


def test_part2_errors():
    cfg = AlgorithmConfig()
    with pytest.raises(InvalidArgument):
        part2(16, EdgeSet(), Partition.singletons(2), Partition.singletons(2), cfg)
    with pytest.raises(ConsistencyError):
        part2(2, EdgeSet(), Partition(np.zeros(2, dtype=np.int64)), Partition.singletons(2), cfg)


def test_part3_equal_partitions():
    p = Partition.from_blocks([[0, 1], [2]], 3)
    assert part3(2, EdgeSet(), p, p, AlgorithmConfig()) == []


def test_part3_star_on_smallest_id():
    out = part3(2, EdgeSet(), Partition.singletons(3), Partition(np.zeros(3, dtype=np.int64)),
                AlgorithmConfig())
    assert out == [(0, 1, "star"), (0, 2, "star")]


def test_part3_precondition():
    with pytest.raises(ConsistencyError) as exc:
        part3(2, EdgeSet(), Partition(np.zeros(2, dtype=np.int64)), Partition.singletons(2),
              AlgorithmConfig())
    assert exc.value.stage == "part3"


# --- pipeline -----------------------------------------------------------------

def _run(n, d, seed, **kw):
    cfg = AlgorithmConfig(seed=seed, **kw).resolve(d)
    raw = uniform(n, d, seed)
    pts, _ = normalize_aspect(raw, cfg)
    return raw, pts, cfg, run_pipeline(pts, cfg, weight_points=raw)


def test_pipeline_single_point():
    _, _, _, (hier, tree, _) = _run(1, 2, 0)
    assert tree.edges == [] and tree.cost == 0.0


def test_pipeline_two_points():
    raw, _, _, (hier, tree, _) = _run(2, 3, 4)
    assert tree.edges == [(0, 1)]
    assert tree.cost == pytest.approx(raw.dist(0, 1), rel=1e-12)


@pytest.mark.parametrize("strategy", ["exact-threshold", "cell-leader", "sampled-leader"])
def test_pipeline_300_points_spanning_tree(strategy):
    raw, pts, cfg, (hier, tree, ledger) = _run(300, 8, 7, strategy=strategy)
    assert len(tree.edges) == 299
    assert is_spanning_tree(300, tree.edges)
    ts = hier.ts()
    assert hier.levels[1] == Partition.singletons(300)
    assert len(hier.levels[ts[-1]]) == 1
    prev = Partition.singletons(300)
    for t in ts:
        assert len(prev) - len(hier.edges[t]) == len(hier.levels[t])
        prev = hier.levels[t]
    assert sum(len(v) for v in tree.per_level.values()) == 299


@given(st.integers(2, 80), st.integers(1, 5), st.integers(0, 10 ** 6))
def test_hierarchy_invariants_property(n, d, seed):
    from mpc_emst.pipeline import solve
    res = solve(uniform(n, d, seed), AlgorithmConfig(seed=seed), oracle=False)
    assert hierarchy_problems(res) == []
    assert is_spanning_tree(n, res.tree.edges)


def test_pipeline_deterministic():
    a = _run(120, 4, 3)[3]
    b = _run(120, 4, 3)[3]
    assert all(a[0].levels[t] == b[0].levels[t] for t in a[0].ts())
    assert a[1].edges == b[1].edges and a[2].rounds == b[2].rounds


def test_pipeline_needs_normalized_points():
    with pytest.raises(InvalidArgument):
        run_pipeline(uniform(5, 2, 0), AlgorithmConfig())


def test_tree_dump_format():
    import io
    _, _, _, (_, tree, _) = _run(20, 2, 1)
    buf = io.StringIO()
    tree.dump(buf)
    rows = [l.split() for l in buf.getvalue().splitlines()]
    assert len(rows) == 19
    keys = [(int(r[3]), int(r[0]), int(r[1])) for r in rows]
    assert keys == sorted(keys)
    assert all(r[4] == "star" or r[4].startswith("lc") for r in rows)
