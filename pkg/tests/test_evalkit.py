import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import simple_graph
from oracles import pairwise_auc
from pagelink.datasets import GroundTruth, GTPath
from pagelink.evalkit import (
    EvalReport, bench_scaling, mask_auc, path_hit, path_hit_rate, reports_to_json, reports_to_tsv,
    synthetic_core, top_edges,
)
from pagelink.exceptions import ConfigError, UndefinedMetric
from pagelink.hetgraph import ComputationGraph
from pagelink.masks import EdgeMaskSet


def whole(g):
    return ComputationGraph.whole(g, g.node_ref(0), g.node_ref(g.num_nodes - 1))


def truth(g, paths):
    """Ground truth from lists of edge ids, each forming a walk in order."""
    out = []
    for ids in paths:
        a, b = int(g.edge_src[ids[0]]), int(g.edge_dst[ids[0]])
        if len(ids) > 1 and a in (g.edge_src[ids[1]], g.edge_dst[ids[1]]):
            a, b = b, a
        nodes = [a, b]
        for e in ids[1:]:
            u, v = int(g.edge_src[e]), int(g.edge_dst[e])
            nodes.append(v if u == nodes[-1] else u)
        out.append(GTPath(tuple(nodes), tuple("e" for _ in ids), tuple(ids), 0))
    return GroundTruth((nodes[0], nodes[-1]), out, 3, 10, 5)


@pytest.fixture
def chain():
    # 0-1-2-3 plus spokes 1-4, 2-5, 0-6
    g = simple_graph([(0, 1), (1, 2), (2, 3), (1, 4), (2, 5), (0, 6)])
    e = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(g.edge_src, g.edge_dst))}
    gt = truth(g, [[e[(0, 1)], e[(1, 2)], e[(2, 3)]]])
    return g, whole(g), gt, e


def test_perfect_separation(chain):
    g, cg, gt, _ = chain
    flat = np.where(np.isin(cg.edges, list(gt.edges)), 3.0, -1.0)
    assert mask_auc(EdgeMaskSet.from_flat(cg, flat), gt, cg) == 1.0


def test_constant_mask_is_half(chain):
    _, cg, gt, _ = chain
    assert mask_auc(EdgeMaskSet.constant(cg, 0.7), gt, cg) == 0.5


def test_undefined_when_labels_are_one_class():
    g = simple_graph([(0, 1), (1, 2)])
    cg = whole(g)
    gt = truth(g, [[0, 1]])
    with pytest.raises(UndefinedMetric):
        mask_auc(EdgeMaskSet.constant(cg), gt, cg)
    with pytest.raises(UndefinedMetric):
        path_hit(EdgeMaskSet.constant(cg), 5, gt, cg)


def test_ground_truth_outside_evaluation_graph(chain):
    g, cg, gt, e = chain
    sub = ComputationGraph(g, cg.nodes, np.array([e[(0, 1)], e[(1, 4)], e[(0, 6)]]), cg.source, cg.target, 1)
    with pytest.raises(ConfigError):
        mask_auc(EdgeMaskSet.constant(sub), gt, sub)


def test_hit_saturates_and_pigeonholes(chain):
    _, cg, gt, _ = chain
    m = EdgeMaskSet.from_flat(cg, np.random.default_rng(0).normal(size=cg.num_edges))
    assert path_hit(m, cg.num_edges, gt, cg) == 1
    assert path_hit(m, 2, gt, cg) == 0
    with pytest.raises(ConfigError):
        path_hit(m, 0, gt, cg)


def test_ties_break_by_edge_id(chain):
    _, cg, gt, e = chain
    m = EdgeMaskSet.constant(cg)
    assert top_edges(m, cg, 3).tolist() == [0, 1, 2]
    flat = np.zeros(cg.num_edges)
    flat[list(cg.edges).index(5)] = 1.0
    assert top_edges(EdgeMaskSet.from_flat(cg, flat), cg, 2).tolist() == [5, 0]
    # the chain edges are ids 0, 2, 4; a constant mask picks 0, 1, 2 and misses
    assert sorted(gt.edges) == [0, 2, 4]
    assert path_hit(m, 3, gt, cg) == 0


def test_hit_rate_aggregates(chain):
    _, cg, gt, _ = chain
    good = EdgeMaskSet.from_flat(cg, np.where(np.isin(cg.edges, list(gt.edges)), 1.0, 0.0))
    bad = EdgeMaskSet.from_flat(cg, np.where(np.isin(cg.edges, list(gt.edges)), 0.0, 1.0))
    assert path_hit_rate([good, bad], 3, [gt, gt], [cg, cg]) == 0.5
    with pytest.raises(UndefinedMetric):
        path_hit_rate([], 3, [], [])


@st.composite
def scored_graphs(draw):
    n = draw(st.integers(4, 12))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=3, max_size=min(50, len(pairs)), unique=True))
    g = simple_graph(chosen)
    m = g.num_edges
    pos = draw(st.lists(st.integers(0, m - 1), min_size=1, max_size=m - 1, unique=True))
    # integer-valued scores give plenty of ties
    scores = np.array(draw(st.lists(st.integers(-3, 3), min_size=m, max_size=m)), dtype=float)
    return g, sorted(pos), scores


@settings(max_examples=150, deadline=None)
@given(scored_graphs())
def test_auc_matches_pairwise_oracle(case):
    g, pos, scores = case
    cg = whole(g)
    gt = GroundTruth((0, 1), [GTPath((int(g.edge_src[e]), int(g.edge_dst[e])), ("e",), (e,), 0) for e in pos],
                     1, 10, len(pos))
    got = mask_auc(EdgeMaskSet.from_flat(cg, scores), gt, cg)
    labels = np.isin(cg.edges, pos)
    assert got == pytest.approx(pairwise_auc(scores, labels), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(scored_graphs())
def test_hit_rate_monotone_in_budget(case):
    g, pos, scores = case
    cg = whole(g)
    gt = GroundTruth((0, 1), [GTPath((int(g.edge_src[e]), int(g.edge_dst[e])), ("e",), (e,), 0) for e in pos],
                     1, 10, len(pos))
    m = EdgeMaskSet.from_flat(cg, scores)
    hits = [path_hit(m, b, gt, cg) for b in range(1, g.num_edges + 1)]
    assert hits == sorted(hits) and hits[-1] == 1


def test_report_round_trips(tmp_path):
    r = EvalReport("pagelink", 0, [0.9, 0.8], {10: [1, 0], 50: [1, 1]}, [(20, 0.1)])
    r2 = r.merge(EvalReport("pagelink", 0, [1.0], {10: [1]}, []))
    assert r2.mean_auc == pytest.approx(0.9)
    assert r2.hit_rate(10) == pytest.approx(2 / 3) and r2.hit_rate(50) == 1.0
    text = reports_to_tsv([r], tmp_path / "r.tsv")
    assert (tmp_path / "r.tsv").read_text() == text
    assert text.splitlines() == ["method\tlinks\tmean_auc\thr@10\thr@50", "pagelink\t2\t0.8500\t0.5000\t1.0000"]
    doc = json.loads(reports_to_json([r]))
    assert doc[0]["hit_rate"] == {"10": 0.5, "50": 1.0} and doc[0]["links"] == 2


def test_synthetic_core_size():
    cg = synthetic_core(300, seed=1)
    assert 300 <= cg.num_edges <= 303
    assert cg.graph.find_edge(cg.graph.index(("a", 0)), cg.graph.index(("b", 0)), "link") >= 0


def test_bench_needs_four_sizes():
    with pytest.raises(ConfigError):
        bench_scaling([100, 200, 300])
    with pytest.raises(ConfigError):
        bench_scaling([])


def test_bench_is_linear_and_doubling_ratio():
    res = bench_scaling([250, 500, 1000, 1500, 2500], trials=3, seed=0)
    assert len(res["table"]) == 5
    assert res["r2"] >= 0.95
    fit = lambda x: res["slope"] * x + res["intercept"]
    assert 1.5 <= fit(2500) / fit(1250) <= 2.5
