"""Relational GNN link predictor with hand-written reverse-mode gradients.

Each edge type ``r`` contributes two relations: messages along the edge
(``r``) and against it (``r^-1``). A layer computes::

    z_v = W_self h_v + sum_rel (1 / c_{v,rel}) sum_{e in N_rel(v)} w_e W_rel h_{u(e)}

where ``c_{v,rel}`` is the unmasked number of ``rel`` messages arriving at
``v`` and ``w_e`` is the edge weight (``sigmoid`` of its mask logit, or 1).
Hidden layers use ``tanh``; the last layer is linear. The link score is
the inner product ``h_s . h_t`` squashed by the logistic function.

Inputs are featureless: layer 0 is an embedding per node
(``embedding="node"``) or per node type (``embedding="type"``). By default
the embeddings stay at their random initialization during training.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.metrics import roc_auc_score
from sklearn.utils.validation import check_is_fitted

from . import checkpoint
from ._validation import check_pairs, check_random_state
from .exceptions import ConfigError, NodeNotFoundError, NumericalError, SchemaError
from .hetgraph import HeteroGraph, Subgraph
from .masks import EdgeMaskSet

FORMAT_SECTION = "rgcn"


@dataclass
class ModelParams:
    n_layers: int
    hidden: int
    node_types: tuple
    edge_types: tuple
    embedding_mode: str
    embedding: np.ndarray
    w_self: np.ndarray   # (L, H, H)
    w_rel: np.ndarray    # (L, 2R, H, H); relation 2r is along edge type r, 2r+1 against it
    schema_hash: str
    version: int = 0

    def arrays(self) -> dict:
        return {"embedding": self.embedding, "w_self": self.w_self, "w_rel": self.w_rel}

    def check_finite(self):
        for name, arr in self.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise NumericalError(f"non-finite values in {name}")

    def copy(self) -> "ModelParams":
        return ModelParams(self.n_layers, self.hidden, self.node_types, self.edge_types,
                           self.embedding_mode, self.embedding.copy(), self.w_self.copy(),
                           self.w_rel.copy(), self.schema_hash, self.version)


def init_model(schema: HeteroGraph, L: int = 2, H: int = 32, seed=0,
               embedding: str = "node") -> ModelParams:
    """Random parameters for ``schema``: N(0, 1/H) weights, deterministic per seed."""
    if L < 1 or H < 1:
        raise ConfigError("need L >= 1 and H >= 1")
    if embedding not in ("node", "type"):
        raise ConfigError(f"unknown embedding mode {embedding!r}")
    for r in schema.edge_types:
        sig = schema.signatures.get(r)
        if sig is None or any(t is not None and t not in schema.node_types for t in sig):
            raise SchemaError(f"edge type {r!r} joins unknown node types {sig}")
    rng = check_random_state(seed)
    scale = 1.0 / np.sqrt(H)
    rows = schema.num_nodes if embedding == "node" else len(schema.node_types)
    R2 = 2 * len(schema.edge_types)
    emb = rng.standard_normal((rows, H))
    w_self = rng.standard_normal((L, H, H)) * scale
    w_rel = rng.standard_normal((L, R2, H, H)) * scale
    return ModelParams(L, H, tuple(schema.node_types), tuple(schema.edge_types), embedding,
                       emb, w_self, w_rel, schema.schema_hash)


# -- message passing ---------------------------------------------------------

class _Plan:
    """Index structure for message passing over one subgraph."""

    def __init__(self, sub: Subgraph):
        n, m = sub.num_nodes, sub.num_edges
        R2 = 2 * len(sub.graph.edge_types)
        src, dst, et = sub.local_src, sub.local_dst, sub.edge_type_idx
        self.n, self.m, self.R2 = n, m, R2
        self.msg_from = np.concatenate([src, dst])
        self.msg_to = np.concatenate([dst, src])
        self.rel = np.concatenate([2 * et, 2 * et + 1])
        self.edge_pos = np.concatenate([np.arange(m), np.arange(m)])
        key = self.msg_to * R2 + self.rel
        cnt = np.bincount(key, minlength=n * R2)
        self.norm = 1.0 / cnt[key] if len(key) else np.zeros(0)
        self.gather = self.rel * n + self.msg_from
        ones = np.ones(2 * m)
        cols = np.arange(2 * m)
        self.scatter_to = sparse.csr_matrix((ones, (self.msg_to, cols)), shape=(n, 2 * m))
        self.scatter_from = sparse.csr_matrix((ones, (self.gather, cols)), shape=(R2 * n, 2 * m))


_plans: "weakref.WeakKeyDictionary[Subgraph, _Plan]" = weakref.WeakKeyDictionary()
_wholes: "weakref.WeakKeyDictionary[HeteroGraph, Subgraph]" = weakref.WeakKeyDictionary()


def _as_subgraph(g) -> Subgraph:
    if isinstance(g, Subgraph):
        return g
    sub = _wholes.get(g)
    if sub is None:
        sub = Subgraph(g, np.arange(g.num_nodes), np.arange(g.num_edges))
        _wholes[g] = sub
    return sub


def _plan(sub: Subgraph) -> _Plan:
    p = _plans.get(sub)
    if p is None:
        p = _Plan(sub)
        _plans[sub] = p
    return p


def _check_schema(sub: Subgraph, params: ModelParams):
    if sub.graph.schema_hash != params.schema_hash:
        raise SchemaError("graph schema does not match the model "
                          f"({sub.graph.schema_hash} != {params.schema_hash})")


def message_graph(g: HeteroGraph, params: ModelParams) -> HeteroGraph:
    """``g`` without the edge types the model never passes messages over.

    A graph that still carries the target links is reduced to the graph the
    model was trained on; anything else that disagrees raises SchemaError.
    """
    if g.schema_hash == params.schema_hash:
        return g
    extra = [r for r in g.edge_types if r not in params.edge_types]
    mp = g.drop_edge_types(extra)
    if mp.schema_hash != params.schema_hash:
        raise SchemaError("graph schema does not match the model "
                          f"({mp.schema_hash} != {params.schema_hash})")
    return mp


def _inputs(sub: Subgraph, params: ModelParams) -> np.ndarray:
    if params.embedding_mode == "node":
        return params.embedding[sub.nodes]
    return params.embedding[sub.graph.node_type[sub.nodes]]


def _encode(sub: Subgraph, params: ModelParams, edge_weight=None):
    """Forward pass over all nodes of ``sub``; returns final reps and a tape."""
    plan = _plan(sub)
    coef = plan.norm if edge_weight is None else plan.norm * edge_weight[plan.edge_pos]
    h = _inputs(sub, params)
    tape = []
    n, Hd = plan.n, params.hidden
    for l in range(params.n_layers):
        hw = np.einsum("nh,rhk->rnk", h, params.w_rel[l]).reshape(plan.R2 * n, Hd)
        msg = hw[plan.gather]
        z = h @ params.w_self[l] + plan.scatter_to @ (coef[:, None] * msg)
        tape.append((h, msg))
        h = np.tanh(z) if l < params.n_layers - 1 else z
    return h, (coef, tape, h)


def _backprop(sub: Subgraph, params: ModelParams, tape, d_out, want_params=True):
    """Reverse pass. Returns (d_edge_weight, param grads or None)."""
    plan = _plan(sub)
    coef, layers, h_out = tape
    n, Hd, L = plan.n, params.hidden, params.n_layers
    d_coef = np.zeros(2 * plan.m)
    g_self = np.zeros_like(params.w_self) if want_params else None
    g_rel = np.zeros_like(params.w_rel) if want_params else None
    dh = d_out
    for l in reversed(range(L)):
        if l < L - 1:
            out = layers[l + 1][0]
            dz = dh * (1.0 - out * out)
        else:
            dz = dh
        h_in, msg = layers[l]
        dz_msg = dz[plan.msg_to]
        d_coef += np.einsum("ij,ij->i", dz_msg, msg)
        d_msg = coef[:, None] * dz_msg
        d_hw = (plan.scatter_from @ d_msg).reshape(plan.R2, n, Hd)
        if want_params:
            g_rel[l] = np.einsum("nh,rnk->rhk", h_in, d_hw)
            g_self[l] = h_in.T @ dz
        dh = dz @ params.w_self[l].T + np.einsum("rnk,rhk->nh", d_hw, params.w_rel[l])
    d_weight = np.bincount(plan.edge_pos, weights=d_coef * plan.norm, minlength=plan.m)
    grads = None
    if want_params:
        g_emb = np.zeros_like(params.embedding)
        if params.embedding_mode == "node":
            g_emb[sub.nodes] = dh
        else:
            np.add.at(g_emb, sub.graph.node_type[sub.nodes], dh)
        grads = {"embedding": g_emb, "w_self": g_self, "w_rel": g_rel}
    return d_weight, grads


def _pair_local(sub: Subgraph, pair):
    s, t = sub.graph.index(pair[0]), sub.graph.index(pair[1])
    for v in (s, t):
        if not sub.contains(v):
            raise NodeNotFoundError(f"node {sub.graph.node_ref(v)} is not in the subgraph")
    return int(sub.local(s)), int(sub.local(t))


def link_logit(g, params: ModelParams, pair, mask: EdgeMaskSet | None = None) -> float:
    sub = _as_subgraph(g)
    _check_schema(sub, params)
    si, ti = _pair_local(sub, pair)
    w = None if mask is None else expit(mask.flat(sub))
    h, _ = _encode(sub, params, w)
    return float(h[si] @ h[ti])


def forward(g, params: ModelParams, mask: EdgeMaskSet | None = None, pair=None) -> float:
    """Link probability ``P(Y=1)`` for ``pair`` on graph or subgraph ``g``."""
    if pair is None:
        pair = g.pair
    return float(expit(link_logit(g, params, pair, mask)))


def score_pairs(g, params: ModelParams, pairs) -> np.ndarray:
    """Logits for many pairs from one unmasked forward pass over ``g``."""
    sub = _as_subgraph(g)
    _check_schema(sub, params)
    h, _ = _encode(sub, params)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    loc = sub.local(pairs)
    return np.einsum("ij,ij->i", h[loc[:, 0]], h[loc[:, 1]])


# -- explanation objective ---------------------------------------------------

def _binary_entropy(p):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(p * np.log(p) + (1 - p) * np.log1p(-p))
    return np.nan_to_num(out, nan=0.0)


def mask_objective(sub: Subgraph, params: ModelParams, logits: np.ndarray, s_local: int,
                   t_local: int, lambda_ent: float = 0.1, lambda_norm: float = 0.01):
    """Loss and d loss / d logits for flat ``logits`` aligned with ``sub.edges``."""
    bad = ~np.isfinite(logits)
    if bad.any():
        raise NumericalError("non-finite mask logits", sub.edges[bad])
    p = expit(logits)
    h, tape = _encode(sub, params, p)
    x = float(h[s_local] @ h[t_local])
    pred_loss = float(np.logaddexp(0.0, -x))
    loss = pred_loss + lambda_ent * float(_binary_entropy(p).sum()) + lambda_norm * float(p.sum())
    if not np.isfinite(loss):
        raise NumericalError("non-finite explanation loss", sub.edges[~np.isfinite(p)])
    d_x = -expit(-x)
    d_out = np.zeros_like(h)
    d_out[s_local] += d_x * h[t_local]
    d_out[t_local] += d_x * h[s_local]
    d_w, _ = _backprop(sub, params, tape, d_out, want_params=False)
    dp_dm = p * (1.0 - p)
    grad = d_w * dp_dm - lambda_ent * logits * dp_dm + lambda_norm * dp_dm
    return loss, grad


def loss_and_mask_grad(core: Subgraph, params: ModelParams, mask: EdgeMaskSet, pair=None,
                       lambda_ent: float = 0.1, lambda_norm: float = 0.01):
    """Masked prediction loss with entropy/norm penalties, and its gradient per edge type.

    Model parameters are held fixed; only the mask logits are differentiated.
    """
    if pair is None:
        pair = core.pair
    _check_schema(core, params)
    si, ti = _pair_local(core, pair)
    logits = mask.flat(core)
    loss, grad = mask_objective(core, params, logits, si, ti, lambda_ent, lambda_norm)
    return loss, EdgeMaskSet.from_flat(core, grad).logits


# -- training ----------------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.01
    neg_ratio: int = 1
    split: tuple = (0.7, 0.1, 0.2)
    seed: int = 0
    n_layers: int = 2
    hidden: int = 32
    embedding: str = "node"
    weight_decay: float = 0.02
    freeze_embedding: bool = True

    def validate(self):
        if abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) < 0:
            raise ConfigError(f"split fractions must be non-negative and sum to 1, got {self.split}")
        if self.neg_ratio < 1:
            raise ConfigError("neg_ratio must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")


@dataclass
class SplitRecord:
    target_type: str
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int
    loss_curve: list = field(default_factory=list)


class Adam:
    def __init__(self, params: dict, lr=0.01, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.lr, self.b1, self.b2, self.eps, self.wd = lr, betas[0], betas[1], eps, weight_decay
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for k, g in grads.items():
            if self.wd:
                g = g + self.wd * params[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def sample_negatives(g: HeteroGraph, target_type: str, sources, ratio: int, rng,
                     exclude: set | None = None) -> np.ndarray:
    """Corrupt targets uniformly among nodes of the right type, skipping observed pairs."""
    sl = g.edge_slice(target_type)
    if exclude is None:
        exclude = set(zip(g.edge_src[sl].tolist(), g.edge_dst[sl].tolist()))
    dst_type = g.signatures[target_type][1]
    cands = g.nodes_of_type(dst_type)
    out = []
    for s in np.repeat(np.asarray(sources), ratio).tolist():
        for _ in range(100):
            t = int(cands[rng.integers(len(cands))])
            if (s, t) not in exclude and s != t:
                break
        out.append((s, t))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def split_target_edges(g: HeteroGraph, target_type: str, fractions, seed) -> tuple:
    if target_type not in g.edge_types:
        raise ConfigError(f"unknown target edge type {target_type!r}")
    sl = g.edge_slice(target_type)
    pairs = np.stack([g.edge_src[sl], g.edge_dst[sl]], axis=1)
    if len(pairs) < 10:
        raise ConfigError(f"target type {target_type!r} has {len(pairs)} edges; need >= 10")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(pairs))
    n_tr = int(round(fractions[0] * len(pairs)))
    n_va = int(round(fractions[1] * len(pairs)))
    tr, va, te = perm[:n_tr], perm[n_tr:n_tr + n_va], perm[n_tr + n_va:]
    if len(te) == 0 or len(tr) == 0:
        raise ConfigError("degenerate split: empty train or test set")
    return pairs[tr], pairs[va], pairs[te]


def train(g: HeteroGraph, target_type: str, cfg: TrainConfig | None = None):
    """Fit the predictor on ``target_type`` edges; other edge types carry messages.

    Target-type edges never take part in message passing, so test links
    cannot leak into their own scores.
    """
    cfg = cfg or TrainConfig()
    cfg.validate()
    tr, va, te = split_target_edges(g, target_type, cfg.split, cfg.seed)
    mp = g.drop_edge_types([target_type])
    params = init_model(mp, cfg.n_layers, cfg.hidden, cfg.seed, cfg.embedding)
    rng = np.random.default_rng(cfg.seed + 1)
    sl = g.edge_slice(target_type)
    observed = set(zip(g.edge_src[sl].tolist(), g.edge_dst[sl].tolist()))
    sub = _as_subgraph(mp)
    state = params.arrays()
    opt = Adam(state, lr=cfg.lr, weight_decay=cfg.weight_decay)
    curve = []
    for _ in range(cfg.epochs):
        neg = sample_negatives(g, target_type, tr[:, 0], cfg.neg_ratio, rng, observed)
        pairs = np.concatenate([tr, neg])
        y = np.concatenate([np.ones(len(tr)), np.zeros(len(neg))])
        h, tape = _encode(sub, params)
        loc = sub.local(pairs)
        hs, ht = h[loc[:, 0]], h[loc[:, 1]]
        x = np.einsum("ij,ij->i", hs, ht)
        loss = float(np.mean(np.logaddexp(0.0, x) - y * x))
        curve.append(loss)
        dx = (expit(x) - y) / len(y)
        d_out = np.zeros_like(h)
        np.add.at(d_out, loc[:, 0], dx[:, None] * ht)
        np.add.at(d_out, loc[:, 1], dx[:, None] * hs)
        _, grads = _backprop(sub, params, tape, d_out, want_params=True)
        if cfg.freeze_embedding:
            del grads["embedding"]
        opt.step(state, grads)
    params.version = cfg.epochs
    params.check_finite()
    return params, SplitRecord(target_type, tr, va, te, cfg.seed, curve)


def link_auc(g: HeteroGraph, params: ModelParams, target_type: str, pos, seed=0) -> float:
    """ROC-AUC of the predictor on ``pos`` against an equal number of sampled negatives."""
    mp = g.drop_edge_types([target_type])
    rng = np.random.default_rng(seed)
    neg = sample_negatives(g, target_type, np.asarray(pos)[:, 0], 1, rng)
    scores = score_pairs(mp, params, np.concatenate([pos, neg]))
    y = np.r_[np.ones(len(pos)), np.zeros(len(neg))]
    return float(roc_auc_score(y, scores))


# -- checkpoints -------------------------------------------------------------

def save_model(params: ModelParams, path, meta: dict | None = None):
    header = {"L": params.n_layers, "H": params.hidden, "node_types": list(params.node_types),
              "edge_types": list(params.edge_types), "embedding": params.embedding_mode,
              "version": params.version, "meta": meta or {}}
    checkpoint.write(path, FORMAT_SECTION, params.schema_hash, header, params.arrays())


def load_model(path, expect_schema: str | None = None) -> ModelParams:
    section, schema, header, arrays = checkpoint.read(path, expect_schema=expect_schema)
    if section != FORMAT_SECTION:
        raise SchemaError(f"checkpoint section is {section!r}, expected {FORMAT_SECTION!r}")
    return ModelParams(header["L"], header["H"], tuple(header["node_types"]),
                       tuple(header["edge_types"]), header["embedding"], arrays["embedding"],
                       arrays["w_self"], arrays["w_rel"], schema, header.get("version", 0))


# -- estimator ---------------------------------------------------------------

class RGCNLinkPredictor(BaseEstimator):
    """Relational GNN encoder with an inner-product link head.

    Parameters
    ----------
    n_layers : int, default=2
        Message-passing layers; also the hop count of computation graphs.
    hidden : int, default=32
    epochs : int, default=200
    learning_rate : float, default=0.01
    neg_ratio : int, default=1
        Negative pairs sampled per positive each epoch.
    split : tuple, default=(0.7, 0.1, 0.2)
        Train/validation/test fractions of the target edges.
    embedding : {"node", "type"}, default="node"
    weight_decay : float, default=0.02
    freeze_embedding : bool, default=True
        Keep the random layer-0 embeddings fixed and train only the layer
        weights; scores then depend on neighborhood structure, not identity.
    random_state : int, default=0
    """

    def __init__(self, n_layers=2, hidden=32, epochs=200, learning_rate=0.01, neg_ratio=1,
                 split=(0.7, 0.1, 0.2), embedding="node", weight_decay=0.02, freeze_embedding=True,
                 random_state=0):
        self.n_layers = n_layers
        self.hidden = hidden
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.neg_ratio = neg_ratio
        self.split = split
        self.embedding = embedding
        self.weight_decay = weight_decay
        self.freeze_embedding = freeze_embedding
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, lr=self.learning_rate, neg_ratio=self.neg_ratio,
                           split=tuple(self.split), seed=self.random_state, n_layers=self.n_layers,
                           hidden=self.hidden, embedding=self.embedding,
                           weight_decay=self.weight_decay,
                           freeze_embedding=self.freeze_embedding)

    def fit(self, graph: HeteroGraph, target_edge_type: str):
        self.params_, self.split_ = train(graph, target_edge_type, self._config())
        self.graph_ = graph.drop_edge_types([target_edge_type])
        self.target_edge_type_ = target_edge_type
        self.loss_curve_ = self.split_.loss_curve
        return self

    @classmethod
    def from_params(cls, params: ModelParams, graph: HeteroGraph, target_edge_type=None):
        """Wrap already-trained parameters (e.g. a loaded checkpoint)."""
        est = cls(n_layers=params.n_layers, hidden=params.hidden, embedding=params.embedding_mode)
        est.params_ = params
        est.graph_ = graph if target_edge_type is None else graph.drop_edge_types([target_edge_type])
        est.target_edge_type_ = target_edge_type
        return est

    def decision_function(self, pairs) -> np.ndarray:
        check_is_fitted(self, "params_")
        pairs = check_pairs(self.graph_, pairs)
        return score_pairs(self.graph_, self.params_, pairs)

    def predict_proba(self, pairs) -> np.ndarray:
        """Probability that each pair is linked (shape ``(n_pairs,)``)."""
        return expit(self.decision_function(pairs))

    def predict(self, pairs) -> np.ndarray:
        return (self.decision_function(pairs) > 0).astype(int)

    def score(self, pairs, y) -> float:
        """ROC-AUC of the link scores against binary labels ``y``."""
        return float(roc_auc_score(y, self.decision_function(pairs)))
