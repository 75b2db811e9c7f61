import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pagelink.exceptions import DegreeError, NoPathError
from pagelink.hetgraph import ComputationGraph
from pagelink.masks import EdgeMaskSet
from pagelink.paths import edge_score, search_local, top_k_paths, traversal_costs

from conftest import simple_graph
from oracles import all_simple_paths, random_graph


def test_edge_score_values():
    assert edge_score(0.0, 1) == pytest.approx(-0.6931, abs=1e-4)
    assert edge_score(0.0, 2) == pytest.approx(-1.3863, abs=1e-4)
    assert edge_score(60.0, 1) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DegreeError):
        edge_score(0.0, 0)


@given(logit=st.floats(-50, 50), deg=st.integers(1, 10_000))
def test_edge_cost_is_nonnegative(logit, deg):
    assert -edge_score(logit, deg) >= 0.0


def _whole(edges, s, t):
    g = simple_graph(edges)
    return g, ComputationGraph.whole(g, ("v", s), ("v", t))


def test_diamond_prefers_quieter_middle():
    # s=0, a=1, b=2, t=3; b also touches 4 so it has degree 3
    g, cg = _whole([(0, 1), (1, 3), (0, 2), (2, 3), (2, 4)], 0, 3)
    paths = top_k_paths(cg, EdgeMaskSet.constant(cg), ("v", 0), ("v", 3), k_paths=2, l_max=3)
    assert [g.node_ref(v)[1] for v in paths[0].nodes] == [0, 1, 3]
    assert [g.node_ref(v)[1] for v in paths[1].nodes] == [0, 2, 3]


def test_single_path_wins_whatever_the_mask():
    g, cg = _whole([(0, 1), (1, 2), (2, 3)], 0, 3)
    for value in (-8.0, 0.0, 8.0):
        paths = top_k_paths(cg, EdgeMaskSet.constant(cg, value), ("v", 0), ("v", 3), k_paths=5, l_max=3)
        assert len(paths) == 1 and paths[0].length == 3


def test_complete_graph_has_five_short_paths():
    g, cg = _whole([(a, b) for a in range(4) for b in range(a + 1, 4)], 0, 3)
    paths = top_k_paths(cg, EdgeMaskSet.constant(cg), ("v", 0), ("v", 3), k_paths=10, l_max=3)
    assert len(paths) == 5
    assert sorted(p.length for p in paths) == [1, 2, 2, 3, 3]


def test_length_cap_filters_long_paths():
    g, cg = _whole([(0, 1), (1, 2), (2, 3), (0, 4), (4, 3)], 0, 3)
    paths = top_k_paths(cg, EdgeMaskSet.constant(cg, 5.0), ("v", 0), ("v", 3), k_paths=5, l_max=2)
    assert [p.length for p in paths] == [2]
    with pytest.raises(NoPathError):
        top_k_paths(cg, EdgeMaskSet.constant(cg), ("v", 0), ("v", 3), l_max=1)


def test_disconnected_pair():
    g, cg = _whole([(0, 1), (2, 3)], 0, 3)
    with pytest.raises(NoPathError):
        top_k_paths(cg, EdgeMaskSet.constant(cg), ("v", 0), ("v", 3))


def test_path_score_is_sum_of_edge_scores():
    rng = np.random.default_rng(0)
    g = random_graph(rng, 9, 20)
    cg = ComputationGraph.whole(g, 0, 8)
    logits = rng.normal(size=cg.num_edges) * 3
    deg = cg.degrees
    for p in top_k_paths(cg, EdgeMaskSet.from_flat(cg, logits), 0, 8, k_paths=6, l_max=4):
        total = 0.0
        for v, e in zip(p.nodes[1:], p.edges):
            pos = int(np.searchsorted(cg.edges, e))
            total += edge_score(logits[pos], int(deg[cg.local(v)]))
        assert p.score == pytest.approx(total, rel=1e-12, abs=1e-12)
        assert len(set(p.nodes)) == len(p.nodes)


def _oracle(cg, logits, s, t, k, l_max, degree_from="core"):
    fwd, rev = traversal_costs(cg, logits, degree_from)
    edge_list = list(zip(cg.local_src.tolist(), cg.local_dst.tolist()))
    labels = all_simple_paths(cg.num_nodes, edge_list, fwd.tolist(), rev.tolist(),
                              int(cg.local(s)), int(cg.local(t)), l_max)
    return labels[:k]


@settings(max_examples=120, deadline=None)
@given(seed=st.integers(0, 1_000_000), n=st.integers(2, 10), k=st.integers(1, 12), l_max=st.integers(1, 6),
       coarse=st.booleans(), degree_from=st.sampled_from(["core", "full"]))
def test_matches_exhaustive_enumeration(seed, n, k, l_max, coarse, degree_from):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, int(rng.integers(0, n * (n - 1) // 2 + 1)), node_types=("a",), edge_types=("x", "y"))
    sub = ComputationGraph(g, np.arange(n), np.arange(g.num_edges)[: max(0, g.num_edges - 1)], 0, n - 1, 1)
    # coarse logits create ties, which must still come out in the oracle's order
    logits = rng.integers(-1, 2, sub.num_edges).astype(float) if coarse else rng.normal(size=sub.num_edges)
    got = search_local(sub, logits, int(sub.local(0)), int(sub.local(n - 1)), k, l_max, degree_from)
    assert got == _oracle(sub, logits, 0, n - 1, k, l_max, degree_from)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 1_000_000), bump=st.floats(0.0, 5.0))
def test_raising_a_logit_never_demotes_its_path(seed, bump):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 8, 16, node_types=("a",), edge_types=("x",))
    cg = ComputationGraph.whole(g, 0, 7)
    logits = rng.normal(size=cg.num_edges)
    before = search_local(cg, logits, 0, 7, 10**6, 7)
    if not before:
        return
    target = before[int(rng.integers(len(before)))]
    e = target[3][int(rng.integers(len(target[3])))]
    raised = logits.copy()
    raised[e] += bump
    after = search_local(cg, raised, 0, 7, 10**6, 7)
    order = [lab[3] for lab in after]
    for other in before:
        if e in other[3]:
            continue
        was_ahead = before.index(target) < before.index(other)
        if was_ahead:
            assert order.index(target[3]) < order.index(other[3])
