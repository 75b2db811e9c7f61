import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from pagelink.corepruner import kcore_prune, prune_for_explanation, remove_high_degree
from pagelink.hetgraph import ComputationGraph, extract_computation_graph

from conftest import simple_graph
from oracles import brute_kcore, random_graph


def _names(g, nodes):
    return {g.node_ref(v) for v in nodes}


def test_ego_fixture_core_prunes_dangling_nodes(ego_fixture):
    g = ego_fixture
    cg = extract_computation_graph(g, ("user", 1), ("item", 1), 2)
    core = kcore_prune(cg, 2)
    removed = _names(g, cg.nodes) - _names(g, core.nodes)
    assert removed == {("item", 5), ("attr2", 1), ("attr2", 2)}
    # attr2 2 hangs off item 5, so item 5 only goes in the second round
    assert core.shells[g.index(("item", 5))] == 2


def test_complete_graph_unchanged():
    g = simple_graph([(a, b) for a in range(4) for b in range(a + 1, 4)])
    cg = ComputationGraph.whole(g, ("v", 0), ("v", 3))
    core = kcore_prune(cg, 3)
    assert core.num_nodes == 4 and core.num_edges == 6


def test_path_graph_peels_from_the_leaves():
    g = simple_graph([(0, 1), (1, 2), (2, 3)])
    # nothing protected: leaves peel away round by round
    assert kcore_prune(g, 2).num_nodes == 0
    # protected endpoints still count toward their neighbours, so the s-t path survives
    cg = ComputationGraph.whole(g, ("v", 0), ("v", 3))
    assert kcore_prune(cg, 2).num_edges == 3
    # a pendant hanging off the path is peeled
    g = simple_graph([(0, 1), (1, 2), (2, 3), (1, 4), (4, 5)])
    core = kcore_prune(ComputationGraph.whole(g, ("v", 0), ("v", 3)), 2)
    assert _names(g, core.nodes) == {("v", i) for i in range(4)}
    assert core.shells == {g.index(("v", 5)): 1, g.index(("v", 4)): 2}


def test_degree_cap_removes_star_center():
    g = simple_graph([(0, i) for i in range(1, 6)])
    cg = ComputationGraph.whole(g, ("v", 1), ("v", 2))
    out = remove_high_degree(cg, 4)
    assert _names(g, out.nodes) == {("v", i) for i in range(1, 6)}
    assert out.num_edges == 0
    assert remove_high_degree(cg, 5).num_nodes == 6


def test_degree_cap_spares_protected_nodes():
    g = simple_graph([(0, i) for i in range(1, 6)])
    cg = ComputationGraph.whole(g, ("v", 0), ("v", 1))
    assert remove_high_degree(cg, 1).contains(0)


def test_fallback_to_one_core_when_core_separates_pair():
    # interior path nodes always keep degree 2, so only k >= 3 can separate s and t
    g = simple_graph([(0, 1), (1, 2)])
    cg = ComputationGraph.whole(g, ("v", 0), ("v", 2), hops=2)
    assert prune_for_explanation(cg, 2).k == 2
    core = prune_for_explanation(cg, 3)
    assert core.k == 1 and core.num_edges == 2


def test_invalid_k():
    g = simple_graph([(0, 1)])
    with pytest.raises(ValueError):
        kcore_prune(ComputationGraph.whole(g, 0, 1), 0)


@pytest.mark.parametrize("k", [2, 3])
def test_matches_brute_force_oracle(k):
    rng = np.random.default_rng(k)
    for _ in range(150):
        n = int(rng.integers(2, 9))
        g = random_graph(rng, n, int(rng.integers(0, n * (n - 1) // 2 + 1)), node_types=("a",), edge_types=("x",))
        s, t = 0, n - 1
        cg = ComputationGraph.whole(g, s, t)
        core = kcore_prune(cg, k)
        nodes, edges = brute_kcore(range(n), list(zip(g.edge_src.tolist(), g.edge_dst.tolist())), k, {s, t})
        assert set(core.nodes.tolist()) == nodes
        assert set(core.edges.tolist()) == edges


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(2, 16), density=st.floats(0.0, 0.8), k=st.integers(1, 4))
def test_idempotent_and_nested(seed, n, density, k):
    g = random_graph(np.random.default_rng(seed), n, int(density * n * (n - 1) / 2),
                     node_types=("a", "b"), edge_types=("x", "y"))
    cg = ComputationGraph.whole(g, 0, n - 1)
    core = kcore_prune(cg, k)
    again = kcore_prune(core, k)
    assert again.nodes.tolist() == core.nodes.tolist()
    assert again.edges.tolist() == core.edges.tolist()
    assert set(kcore_prune(cg, k + 1).nodes.tolist()) <= set(core.nodes.tolist())
    deg = core.degrees
    for v, d in zip(core.nodes.tolist(), deg.tolist()):
        assert v in (0, n - 1) or d >= k


def test_runtime_grows_linearly():
    sizes, times = [], []
    for m in (2_000, 5_000, 10_000, 20_000):
        rng = np.random.default_rng(m)
        n = m // 3
        src, dst = rng.integers(0, n, m), rng.integers(0, n, m)
        keep = src != dst
        g = simple_graph(list(dict.fromkeys(zip(src[keep].tolist(), dst[keep].tolist()))))
        cg = ComputationGraph.whole(g, g.node_ref(0), g.node_ref(1))
        runs = []
        for _ in range(5):
            t0 = time.perf_counter()
            kcore_prune(cg, 3)
            runs.append(time.perf_counter() - t0)
        sizes.append(cg.num_edges)
        times.append(float(np.median(runs)))
    assert stats.linregress(sizes, times).rvalue ** 2 >= 0.95
