"""Path-based link explanations: mask learning steered by candidate paths.

The mask is trained on the pruned core with two forces. The prediction
term keeps the masked model confident in the link. The path term pulls
logits up on the edges of the current best s-t paths (weight ``alpha``)
and down everywhere else (weight ``beta``). Candidate paths are re-derived
from the mask at every step. After training, the highest-scoring paths
that fit the edge budget are returned.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, fields

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_pair
from .corepruner import prune_for_explanation
from .exceptions import ConfigError, NoPathError
from .hetgraph import ComputationGraph, HeteroGraph, Subgraph, extract_computation_graph
from .masks import EdgeMaskSet
from .paths import Path, search_local, to_path
from .rgcn import ModelParams, _check_schema, _pair_local, forward, mask_objective, message_graph


@dataclass
class ExplainerConfig:
    alpha: float = 1.0
    beta: float = 0.2
    lr: float = 0.1
    max_iter: int = 100
    k_core: int = 2
    budget: int = 15
    l_max: int = 3
    degree_cap: int | None = None
    k_paths: int = 5
    tol: float = 1e-4
    degree_from: str = "core"
    lambda_ent: float = 0.1
    lambda_norm: float = 0.01

    def validate(self) -> "ExplainerConfig":
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be >= 0")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be >= 0")
        if self.l_max < 1 or self.budget < self.l_max:
            raise ConfigError(f"need l_max >= 1 and budget >= l_max (got {self.budget}, {self.l_max})")
        if self.k_paths < 1 or self.k_core < 1:
            raise ConfigError("k_paths and k_core must be >= 1")
        if self.degree_cap is not None and self.degree_cap < 1:
            raise ConfigError("degree_cap must be >= 1")
        if self.degree_from not in ("core", "full"):
            raise ConfigError("degree_from must be 'core' or 'full'")
        return self

    @classmethod
    def from_mapping(cls, values: dict) -> "ExplainerConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in names})


@dataclass
class Explanation:
    """Paths explaining one predicted link, best first."""

    pair: tuple
    paths: list
    budget: int
    l_max: int
    mask: EdgeMaskSet
    probability: float = float("nan")
    core: Subgraph | None = field(default=None, repr=False)

    @property
    def budget_used(self) -> int:
        """Budget charged by the paths (``len(paths) * l_max``)."""
        return len(self.paths) * self.l_max

    @property
    def edges(self) -> set:
        return {e for p in self.paths for e in p.edges}

    def to_dict(self, g: HeteroGraph) -> dict:
        s, t = self.pair
        return {
            "pair": [list(g.node_ref(s)), list(g.node_ref(t))],
            "probability": None if np.isnan(self.probability) else self.probability,
            "paths": [p.to_dict(g) for p in self.paths],
            "budget": self.budget,
            "budget_used": self.budget_used,
            "l_max": self.l_max,
            "mask_stats": self.mask.stats(),
        }

    def to_json(self, g: HeteroGraph) -> str:
        return json.dumps(self.to_dict(g), indent=2, sort_keys=True)


def path_force(n_edges: int, on_path: np.ndarray, alpha: float, beta: float):
    """Value-free gradient of ``-(alpha * sum_on M - beta * sum_off M)``."""
    grad = np.full(n_edges, float(beta))
    grad[on_path] = -float(alpha)
    return grad


def learn_mask(core: Subgraph, params: ModelParams, pair=None, cfg: ExplainerConfig | None = None) -> EdgeMaskSet:
    """Gradient descent on prediction loss plus path loss, from all-zero logits.

    With ``alpha == beta == 0`` no paths are searched and this is plain
    prediction-loss mask learning.
    """
    cfg = (cfg or ExplainerConfig()).validate()
    if pair is None:
        pair = core.pair
    _check_schema(core, params)
    si, ti = _pair_local(core, pair)
    logits = np.zeros(core.num_edges)
    use_paths = cfg.alpha > 0 or cfg.beta > 0
    history = []
    it = 0
    for it in range(1, cfg.max_iter + 1):
        loss, grad = mask_objective(core, params, logits, si, ti, cfg.lambda_ent, cfg.lambda_norm)
        if use_paths:
            labels = search_local(core, logits, si, ti, cfg.k_paths, cfg.l_max, cfg.degree_from)
            if not labels:
                raise NoPathError(f"no s-t path of at most {cfg.l_max} hops in the core")
            on = np.zeros(core.num_edges, dtype=bool)
            for lab in labels:
                on[list(lab[3])] = True
            loss -= cfg.alpha * logits[on].sum() - cfg.beta * logits[~on].sum()
            grad = grad + path_force(core.num_edges, on, cfg.alpha, cfg.beta)
        step = cfg.lr * grad
        logits = logits - step
        history.append(float(loss))
        if not len(step) or np.max(np.abs(step)) < cfg.tol:
            break
    mask = EdgeMaskSet.from_flat(core, logits, iteration=it if cfg.max_iter else 0)
    mask.history = history
    return mask


def extract_explanation(core: Subgraph, mask: EdgeMaskSet, pair=None, cfg: ExplainerConfig | None = None) -> Explanation:
    """Top paths under the learned mask, as many as the budget allows."""
    cfg = (cfg or ExplainerConfig()).validate()
    if pair is None:
        pair = core.pair
    si, ti = _pair_local(core, pair)
    labels = search_local(core, mask.flat(core), si, ti, cfg.k_paths, cfg.l_max, cfg.degree_from)
    if not labels:
        g = core.graph
        raise NoPathError(f"no path of at most {cfg.l_max} hops joins "
                          f"{g.node_ref(core.nodes[si])} and {g.node_ref(core.nodes[ti])}")
    keep = labels[:cfg.budget // cfg.l_max]
    gp = (int(core.nodes[si]), int(core.nodes[ti]))
    return Explanation(gp, [to_path(core, lab) for lab in keep], cfg.budget, cfg.l_max, mask, core=core)


def prepare(g: HeteroGraph, params: ModelParams, pair, cfg: ExplainerConfig):
    """Message-passing graph, resolved pair, computation graph and pruned core."""
    mp = message_graph(g, params)
    s, t = check_pair(mp, pair)
    cg = extract_computation_graph(mp, s, t, params.n_layers)
    core = prune_for_explanation(cg, cfg.k_core, cfg.degree_cap)
    return mp, (s, t), cg, core


def explain(g: HeteroGraph, params: ModelParams, pair, cfg: ExplainerConfig | None = None) -> Explanation:
    """Computation graph, pruning, mask learning and path extraction for one link."""
    cfg = (cfg or ExplainerConfig()).validate()
    _, st, cg, core = prepare(g, params, pair, cfg)
    prob = forward(cg, params, pair=st)
    if prob < 0.5:
        warnings.warn(f"explaining a link the model scores negative (p={prob:.3f})", stacklevel=2)
    mask = learn_mask(core, params, st, cfg)
    exp = extract_explanation(core, mask, st, cfg)
    exp.probability = prob
    return exp


def expand_mask(mask: EdgeMaskSet, cg: ComputationGraph) -> EdgeMaskSet:
    """Mask over ``cg``'s edges; edges the mask does not cover get ``min - 1``."""
    vals = mask.lookup(cg.edges)
    known = vals[~np.isnan(vals)]
    fill = (known.min() if len(known) else 0.0) - 1.0
    vals[np.isnan(vals)] = fill
    return EdgeMaskSet.from_flat(cg, vals, mask.iteration)


# -- DOT export --------------------------------------------------------------

def _dot_id(g, v):
    t, i = g.node_ref(v)
    return f'"{t}:{i}"'


def to_dot(sub: Subgraph, pair, highlight=(), reference=(), title: str = "explanation") -> str:
    """Graphviz text for ``sub``.

    ``highlight`` (selected paths) are drawn green and bold, ``reference``
    (ground-truth paths) blue, and the predicted link as a red dashed edge.
    """
    g = sub.graph
    sel = {e for p in highlight for e in (p.edges if isinstance(p, Path) else p)}
    ref = {e for p in reference for e in (p.edges if isinstance(p, Path) else p)}
    lines = [f'digraph "{title}" {{', "  node [shape=ellipse, fontsize=10];"]
    s, t = pair
    for v in sub.nodes.tolist():
        style = ', style=filled, fillcolor="#ffe9a8"' if v in (s, t) else ""
        lines.append(f"  {_dot_id(g, v)} [label=\"{g.node_ref(v)[0]} {g.node_ref(v)[1]}\"{style}];")
    for e in sub.edges.tolist():
        attrs = [f'label="{g.edge_type_name(e)}"']
        if e in sel:
            attrs += ['color="#1a9641"', "penwidth=2.5"]
        elif e in ref:
            attrs += ['color="#2b83ba"', "penwidth=1.8"]
        else:
            attrs += ['color="#bbbbbb"']
        lines.append(f"  {_dot_id(g, g.edge_src[e])} -> {_dot_id(g, g.edge_dst[e])} [{', '.join(attrs)}];")
    lines.append(f'  {_dot_id(g, s)} -> {_dot_id(g, t)} [style=dashed, color="#d7191c", label="predicted"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


class PaGELinkExplainer(BaseEstimator):
    """Estimator wrapper around :func:`explain`.

    ``fit`` takes the graph and a trained predictor (an
    ``RGCNLinkPredictor`` or raw ``ModelParams``); ``transform`` maps pairs
    to :class:`Explanation` objects.
    """

    def __init__(self, alpha=1.0, beta=0.2, learning_rate=0.1, max_iter=100, k_core=2, budget=15,
                 l_max=3, degree_cap=None, k_paths=5, tol=1e-4, degree_from="core",
                 lambda_ent=0.1, lambda_norm=0.01):
        self.alpha = alpha
        self.beta = beta
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.k_core = k_core
        self.budget = budget
        self.l_max = l_max
        self.degree_cap = degree_cap
        self.k_paths = k_paths
        self.tol = tol
        self.degree_from = degree_from
        self.lambda_ent = lambda_ent
        self.lambda_norm = lambda_norm

    def config(self) -> ExplainerConfig:
        p = self.get_params()
        p["lr"] = p.pop("learning_rate")
        return ExplainerConfig.from_mapping(p).validate()

    def fit(self, graph: HeteroGraph, model):
        params = getattr(model, "params_", model)
        if not isinstance(params, ModelParams):
            raise ConfigError("model must be a fitted RGCNLinkPredictor or ModelParams")
        self.params_ = params
        self.graph_ = message_graph(graph, params)
        self.config_ = self.config()
        return self

    def explain(self, pair) -> Explanation:
        check_is_fitted(self, "params_")
        return explain(self.graph_, self.params_, pair, self.config_)

    def explain_mask(self, pair):
        """``(computation graph, mask over it)`` for evaluation against ground truth."""
        check_is_fitted(self, "params_")
        _, st, cg, core = prepare(self.graph_, self.params_, pair, self.config_)
        return cg, expand_mask(learn_mask(core, self.params_, st, self.config_), cg)

    def explain_with_mask(self, pair):
        """``(computation graph, mask expanded onto it, Explanation)``."""
        check_is_fitted(self, "params_")
        _, st, cg, core = prepare(self.graph_, self.params_, pair, self.config_)
        mask = learn_mask(core, self.params_, st, self.config_)
        exp = extract_explanation(core, mask, st, self.config_)
        return cg, expand_mask(mask, cg), exp

    def transform(self, pairs) -> list:
        return [self.explain(p) for p in pairs]
