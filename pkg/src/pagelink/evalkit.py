"""Mask ROC-AUC, path hit rate, and the explainer scaling benchmark.

Masks are scored by their logits. The logistic squashing is monotone, so
rankings match the mask weights, but saturated weights would tie where
logits still differ.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from sklearn.metrics import roc_auc_score

from .exceptions import ConfigError, UndefinedMetric
from .explainer import ExplainerConfig, extract_explanation, learn_mask
from .corepruner import prune_for_explanation
from .hetgraph import ComputationGraph, Subgraph, build_graph
from .masks import EdgeMaskSet
from .rgcn import init_model


def _labels(gt, sub: Subgraph) -> np.ndarray:
    pos = {e for path in gt.edge_sets(sub.graph) for e in path}
    missing = pos - set(sub.edges.tolist())
    if missing:
        raise ConfigError(f"{len(missing)} ground-truth edge(s) lie outside the evaluation graph")
    return np.isin(sub.edges, list(pos))


def mask_auc(mask: EdgeMaskSet, gt, sub: Subgraph) -> float:
    """ROC-AUC of mask scores over ``sub``'s edges, ground-truth edges positive.

    Tied scores share their average rank.
    """
    y = _labels(gt, sub)
    if y.all() or not y.any():
        raise UndefinedMetric("ROC-AUC needs both positive and negative edges")
    return float(roc_auc_score(y, mask.flat(sub)))


def top_edges(mask: EdgeMaskSet, sub: Subgraph, budget: int) -> np.ndarray:
    """The ``budget`` highest-scoring edge ids; ties go to the smaller edge id."""
    scores = mask.flat(sub)
    order = np.lexsort((sub.edges, -scores))
    return sub.edges[order[:budget]]


def path_hit(mask: EdgeMaskSet, budget: int, gt, sub: Subgraph) -> int:
    """1 if the top-``budget`` edges contain every edge of some ground-truth path."""
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    y = _labels(gt, sub)
    if y.all() or not y.any():
        raise UndefinedMetric("hit rate needs both ground-truth and other edges")
    chosen = set(top_edges(mask, sub, budget).tolist())
    return int(any(set(p) <= chosen for p in gt.edge_sets(sub.graph)))


def path_hit_rate(masks, budget: int, gts, subs) -> float:
    """Fraction of links whose top-``budget`` mask edges cover a ground-truth path."""
    hits = [path_hit(m, budget, g, s) for m, g, s in zip(masks, gts, subs)]
    if not hits:
        raise UndefinedMetric("no links to score")
    return float(np.mean(hits))


# -- reports -------------------------------------------------------------------

@dataclass
class EvalReport:
    method: str
    seed: int
    aucs: list = field(default_factory=list)
    hits: dict = field(default_factory=dict)       # budget -> list of 0/1
    timings: list = field(default_factory=list)    # (edges, seconds)

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.aucs)) if self.aucs else float("nan")

    def hit_rate(self, budget: int) -> float:
        h = self.hits.get(budget, [])
        return float(np.mean(h)) if h else float("nan")

    def merge(self, other: "EvalReport") -> "EvalReport":
        out = EvalReport(self.method, self.seed, self.aucs + other.aucs,
                         {b: self.hits.get(b, []) + other.hits.get(b, [])
                          for b in sorted(set(self.hits) | set(other.hits))},
                         self.timings + other.timings)
        return out

    def to_dict(self) -> dict:
        return {"method": self.method, "seed": self.seed, "links": len(self.aucs),
                "mean_auc": self.mean_auc, "auc": self.aucs,
                "hit_rate": {str(b): self.hit_rate(b) for b in sorted(self.hits)},
                "timings": [list(t) for t in self.timings]}


def reports_to_tsv(reports, out=None) -> str:
    budgets = sorted({b for r in reports for b in r.hits})
    head = ["method", "links", "mean_auc"] + [f"hr@{b}" for b in budgets]
    rows = ["\t".join(head)]
    for r in reports:
        rows.append("\t".join([r.method, str(len(r.aucs)), f"{r.mean_auc:.4f}"]
                              + [f"{r.hit_rate(b):.4f}" for b in budgets]))
    text = "\n".join(rows) + "\n"
    if out is not None:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)


# -- method comparison ---------------------------------------------------------

def score_mask(report: EvalReport, mask: EdgeMaskSet, gt, cg: ComputationGraph, budgets):
    report.aucs.append(mask_auc(mask, gt, cg))
    for b in budgets:
        report.hits.setdefault(b, []).append(path_hit(mask, b, gt, cg))


def compare_explainers(g, links, predictor, explainers: dict, budgets=(10, 50, 100), seed=0,
                       on_explanation=None):
    """Evaluate each ``name -> fitted explainer`` on every ``(pair, GroundTruth)``.

    Explainers must offer ``explain_mask(pair) -> (computation graph, mask)``.
    For PaGE-Link, ``on_explanation`` (if given) receives each emitted
    :class:`Explanation` so callers can check its structure.
    """
    reports = {name: EvalReport(name, seed) for name in explainers}
    for pair, gt in links:
        for name, ex in explainers.items():
            t0 = time.perf_counter()
            if hasattr(ex, "explain_with_mask"):
                cg, mask, exp = ex.explain_with_mask(pair)
                if on_explanation is not None:
                    on_explanation(exp)
            else:
                cg, mask = ex.explain_mask(pair)
            reports[name].timings.append((cg.num_edges, time.perf_counter() - t0))
            score_mask(reports[name], mask, gt, cg, budgets)
    return reports


# -- scaling benchmark ---------------------------------------------------------

def synthetic_core(n_edges: int, seed=0, avg_degree: float = 6.0):
    """Random two-type graph with about ``n_edges`` edges, viewed whole as a
    computation graph around a pair joined by a 3-hop path."""
    rng = np.random.default_rng(seed)
    n = max(8, int(round(2 * n_edges / avg_degree)))
    half = n // 2
    pairs = set()
    while len(pairs) < n_edges:
        a, b = int(rng.integers(half)), int(rng.integers(n - half))
        pairs.add((a, b))
    nodes = [("a", i) for i in range(half)] + [("b", i) for i in range(n - half)]
    edges = [("a", a, "link", "b", b) for a, b in sorted(pairs)]
    # plant s -> b0 -> a1 -> t so a short path always exists
    edges += [("a", 0, "link", "b", 0), ("a", 1, "link", "b", 0), ("a", 1, "link", "b", 1)]
    g = build_graph(nodes, [e for e in dict.fromkeys(edges)])
    return ComputationGraph.whole(g, ("a", 0), ("b", 1), hops=2)


def _fit(xs, ys):
    fit = stats.linregress(xs, ys)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2)


def bench_scaling(sizes, trials: int = 3, seed=0, cfg: ExplainerConfig | None = None, hidden: int = 16):
    """Median wall time of prune + mask learning + extraction per core size.

    Returns ``{"table": [(edges, seconds)], "slope", "intercept", "r2"}``.
    Mask learning runs exactly ``cfg.max_iter`` steps (tolerance 0).
    """
    sizes = sorted(set(int(s) for s in sizes))
    if len(sizes) < 4:
        raise ConfigError("bench_scaling needs at least 4 distinct sizes")
    cfg = cfg or ExplainerConfig(max_iter=20)
    cfg = ExplainerConfig(**{**cfg.__dict__, "tol": 0.0}).validate()
    table = []
    for i, size in enumerate(sizes):
        cg = synthetic_core(size, seed + i)
        params = init_model(cg.graph, L=2, H=hidden, seed=seed)
        times = []
        for _ in range(trials):
            t0 = time.perf_counter()
            core = prune_for_explanation(ComputationGraph(cg.graph, cg.nodes, cg.edges, cg.source,
                                                          cg.target, cg.hops), cfg.k_core, cfg.degree_cap)
            mask = learn_mask(core, params, cg.pair, cfg)
            extract_explanation(core, mask, cg.pair, cfg)
            times.append(time.perf_counter() - t0)
        table.append((cg.num_edges, float(np.median(times))))
    slope, intercept, r2 = _fit([t[0] for t in table], [t[1] for t in table])
    return {"table": table, "slope": slope, "intercept": intercept, "r2": r2}

