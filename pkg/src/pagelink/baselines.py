"""Comparison explainers that produce edge masks without path guidance.

``gnnexp_link`` learns a free logit per edge from the prediction loss
alone. ``PGExp`` trains one small network per edge type that maps the
frozen encoder representations of an edge's endpoints to its logit, so a
new link is explained in a single forward pass. Both work on the full
computation graph, with no pruning.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import checkpoint
from ._validation import check_pair, check_pairs, check_random_state
from .exceptions import ConfigError, NumericalError, SchemaError
from .explainer import ExplainerConfig, learn_mask
from .hetgraph import ComputationGraph, HeteroGraph, extract_computation_graph
from .masks import EdgeMaskSet
from .rgcn import (Adam, ModelParams, _as_subgraph, _check_schema, _encode, _pair_local,
                   mask_objective, message_graph)

FORMAT_SECTION = "pgexp"


def gnnexp_link(cg: ComputationGraph, params: ModelParams, pair=None, cfg: ExplainerConfig | None = None) -> EdgeMaskSet:
    """Prediction-loss-only mask learning (path forces switched off)."""
    cfg = replace(cfg or ExplainerConfig(), alpha=0.0, beta=0.0)
    return learn_mask(cg, params, pair, cfg)


# -- mask predictor ----------------------------------------------------------

@dataclass
class PredictorParams:
    """Per edge type: ``logit = w2 . tanh(W1 [h_u * scale, h_v * scale] + b1) + b2``."""

    edge_types: tuple
    weights: dict
    input_scale: float
    schema_hash: str

    def arrays(self) -> dict:
        return {f"{r}/{k}": np.atleast_1d(v) for r in self.edge_types for k, v in self.weights[r].items()}

    def check_finite(self):
        for name, v in self.arrays().items():
            if not np.all(np.isfinite(v)):
                raise NumericalError(f"non-finite predictor weights in {name}")


@dataclass
class PGExpConfig:
    epochs: int = 30
    lr: float = 0.01
    hidden: int | None = None
    seed: int = 0
    lambda_ent: float = 0.1
    lambda_norm: float = 0.01


def init_predictor(params: ModelParams, hidden=None, seed=0, input_scale=1.0) -> PredictorParams:
    H = params.hidden
    width = hidden or H
    rng = check_random_state(seed)
    w = {}
    for r in params.edge_types:
        w[r] = {"w1": rng.standard_normal((2 * H, width)) / np.sqrt(2 * H),
                "b1": np.zeros(width),
                "w2": rng.standard_normal(width) / np.sqrt(width),
                "b2": np.zeros(1)}
    return PredictorParams(tuple(params.edge_types), w, float(input_scale), params.schema_hash)


def _edge_inputs(cg: ComputationGraph, reps: np.ndarray, scale: float) -> np.ndarray:
    g = cg.graph
    return np.concatenate([reps[g.edge_src[cg.edges]], reps[g.edge_dst[cg.edges]]], axis=1) * scale


def _predict(pred: PredictorParams, cg, x):
    """Logits over ``cg.edges`` plus per-type activations for backprop."""
    logits = np.zeros(cg.num_edges)
    cache = {}
    for i, r in enumerate(cg.graph.edge_types):
        sel = np.flatnonzero(cg.edge_type_idx == i)
        if not len(sel):
            continue
        wt = pred.weights[r]
        z = np.tanh(x[sel] @ wt["w1"] + wt["b1"])
        logits[sel] = z @ wt["w2"] + wt["b2"][0]
        cache[r] = (sel, z)
    return logits, cache


def pgexp_link_infer(cg: ComputationGraph, predictor: PredictorParams, params: ModelParams,
                     reps: np.ndarray | None = None) -> EdgeMaskSet:
    """One forward pass of the predictor over every edge of ``cg``."""
    if predictor.schema_hash != params.schema_hash:
        raise SchemaError("predictor and model were built for different graphs")
    if reps is None:
        reps = node_representations(cg.graph, params)
    logits, _ = _predict(predictor, cg, _edge_inputs(cg, reps, predictor.input_scale))
    return EdgeMaskSet.from_flat(cg, logits)


def node_representations(g: HeteroGraph, params: ModelParams) -> np.ndarray:
    sub = _as_subgraph(g)
    _check_schema(sub, params)
    h, _ = _encode(sub, params)
    return h


def predictor_objective(pred: PredictorParams, params: ModelParams, jobs, lambda_ent=0.1, lambda_norm=0.01):
    """Mean explanation loss over ``jobs`` and its gradient per predictor array.

    ``jobs`` holds ``(computation graph, s_local, t_local, edge inputs)``.
    """
    n = len(jobs)
    total = 0.0
    grads = {k: np.zeros_like(v) for k, v in pred.arrays().items()}
    for cg, si, ti, x in jobs:
        logits, cache = _predict(pred, cg, x)
        loss, d_logit = mask_objective(cg, params, logits, si, ti, lambda_ent, lambda_norm)
        total += loss / n
        for r, (sel, z) in cache.items():
            wt = pred.weights[r]
            dl = d_logit[sel] / n
            grads[f"{r}/w2"] += z.T @ dl
            grads[f"{r}/b2"] += dl.sum()
            da = np.outer(dl, wt["w2"]) * (1.0 - z * z)
            grads[f"{r}/w1"] += x[sel].T @ da
            grads[f"{r}/b1"] += da.sum(axis=0)
    return total, grads


def pgexp_jobs(mp: HeteroGraph, params: ModelParams, pairs, reps: np.ndarray, scale: float) -> list:
    jobs = []
    for s, t in np.asarray(pairs).tolist():
        cg = extract_computation_graph(mp, s, t, params.n_layers)
        si, ti = _pair_local(cg, (s, t))
        jobs.append((cg, si, ti, _edge_inputs(cg, reps, scale)))
    return jobs


def pgexp_link_train(g: HeteroGraph, params: ModelParams, train_pairs, cfg: PGExpConfig | None = None) -> PredictorParams:
    """Fit the mask predictor on the masked prediction loss of ``train_pairs``.

    Gradients of the loss with respect to every edge logit come from the
    encoder's reverse pass and are pushed through the predictor; all
    training links contribute to each full-batch Adam step.
    """
    cfg = cfg or PGExpConfig()
    mp = message_graph(g, params)
    pairs = check_pairs(mp, train_pairs)
    if len(pairs) < 10:
        raise ConfigError(f"need >= 10 training pairs for the mask predictor, got {len(pairs)}")
    reps = node_representations(mp, params)
    scale = 1.0 / max(float(reps.std()), 1e-12)
    pred = init_predictor(params, cfg.hidden, cfg.seed, scale)
    jobs = pgexp_jobs(mp, params, pairs, reps, scale)
    state = pred.arrays()
    opt = Adam(state, lr=cfg.lr)
    # predictor weights are views into ``state`` so Adam updates them in place
    for r in pred.edge_types:
        for k in pred.weights[r]:
            pred.weights[r][k] = state[f"{r}/{k}"]
    for _ in range(cfg.epochs):
        _, grads = predictor_objective(pred, params, jobs, cfg.lambda_ent, cfg.lambda_norm)
        opt.step(state, grads)
    pred.check_finite()
    return pred


def save_predictor(pred: PredictorParams, path):
    fields = {"edge_types": list(pred.edge_types), "input_scale": pred.input_scale,
              "hidden": int(pred.weights[pred.edge_types[0]]["b1"].shape[0]) if pred.edge_types else 0}
    checkpoint.write(path, FORMAT_SECTION, pred.schema_hash, fields, pred.arrays())


def load_predictor(path, expect_schema: str | None = None) -> PredictorParams:
    section, schema, fields, arrays = checkpoint.read(path, expect_schema=expect_schema)
    if section != FORMAT_SECTION:
        raise SchemaError(f"checkpoint section is {section!r}, expected {FORMAT_SECTION!r}")
    w = {r: {k: arrays[f"{r}/{k}"] for k in ("w1", "b1", "w2", "b2")} for r in fields["edge_types"]}
    return PredictorParams(tuple(fields["edge_types"]), w, fields["input_scale"], schema)


# -- estimators --------------------------------------------------------------

class _MaskExplainer(BaseEstimator):
    def _fit_model(self, graph, model):
        params = getattr(model, "params_", model)
        if not isinstance(params, ModelParams):
            raise ConfigError("model must be a fitted RGCNLinkPredictor or ModelParams")
        self.params_ = params
        self.graph_ = message_graph(graph, params)

    def _cg(self, pair):
        s, t = check_pair(self.graph_, pair)
        return extract_computation_graph(self.graph_, s, t, self.params_.n_layers), (s, t)

    def transform(self, pairs) -> list:
        return [self.explain_mask(p)[1] for p in pairs]


class GNNExpLinkExplainer(_MaskExplainer):
    """Free per-edge mask logits trained on the prediction loss only."""

    def __init__(self, learning_rate=0.1, max_iter=100, tol=1e-4, lambda_ent=0.1, lambda_norm=0.01):
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.tol = tol
        self.lambda_ent = lambda_ent
        self.lambda_norm = lambda_norm

    def fit(self, graph, model):
        self._fit_model(graph, model)
        self.config_ = ExplainerConfig(lr=self.learning_rate, max_iter=self.max_iter, tol=self.tol,
                                       lambda_ent=self.lambda_ent, lambda_norm=self.lambda_norm)
        return self

    def explain_mask(self, pair):
        check_is_fitted(self, "params_")
        cg, st = self._cg(pair)
        return cg, gnnexp_link(cg, self.params_, st, self.config_)


class PGExpLinkExplainer(_MaskExplainer):
    """Shared per-edge-type mask predictor over frozen endpoint representations."""

    def __init__(self, epochs=30, learning_rate=0.01, hidden=None, lambda_ent=0.1,
                 lambda_norm=0.01, random_state=0):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.hidden = hidden
        self.lambda_ent = lambda_ent
        self.lambda_norm = lambda_norm
        self.random_state = random_state

    def fit(self, graph, model, train_pairs):
        self._fit_model(graph, model)
        cfg = PGExpConfig(self.epochs, self.learning_rate, self.hidden, self.random_state,
                          self.lambda_ent, self.lambda_norm)
        self.predictor_ = pgexp_link_train(self.graph_, self.params_, train_pairs, cfg)
        self.reps_ = node_representations(self.graph_, self.params_)
        return self

    def explain_mask(self, pair):
        check_is_fitted(self, "predictor_")
        cg, _ = self._cg(pair)
        return cg, pgexp_link_infer(cg, self.predictor_, self.params_, self.reps_)
