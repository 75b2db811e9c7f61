"""Per-edge-type mask logits over a subgraph's edges."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .exceptions import AlignmentError
from .hetgraph import Subgraph


@dataclass
class EdgeMaskSet:
    """One logit vector per edge type, aligned with parent-graph edge ids.

    Because parent edge ids are grouped by type, concatenating the
    per-type vectors in ``edge_types`` order gives a flat vector aligned
    with ``Subgraph.edges``.
    """

    logits: dict
    edge_ids: dict
    iteration: int = 0
    history: list = field(default_factory=list, repr=False)

    @classmethod
    def constant(cls, sub: Subgraph, value: float = 0.0) -> "EdgeMaskSet":
        return cls.from_flat(sub, np.full(sub.num_edges, float(value)))

    @classmethod
    def from_flat(cls, sub: Subgraph, flat, iteration: int = 0) -> "EdgeMaskSet":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (sub.num_edges,):
            raise AlignmentError(f"expected {sub.num_edges} logits, got {flat.shape}")
        logits, ids = {}, {}
        for i, r in enumerate(sub.graph.edge_types):
            sel = sub.edge_type_idx == i
            logits[r] = flat[sel].copy()
            ids[r] = sub.edges[sel].copy()
        return cls(logits, ids, iteration)

    @property
    def edge_types(self):
        return tuple(self.logits)

    def __len__(self):
        return sum(len(v) for v in self.logits.values())

    def all_edge_ids(self) -> np.ndarray:
        return np.concatenate([self.edge_ids[r] for r in self.logits]) if self.logits else np.zeros(0, int)

    def all_logits(self) -> np.ndarray:
        return np.concatenate([self.logits[r] for r in self.logits]) if self.logits else np.zeros(0)

    def weights(self) -> dict:
        return {r: expit(v) for r, v in self.logits.items()}

    def flat(self, sub: Subgraph) -> np.ndarray:
        """Logits aligned with ``sub.edges``; raises if the mask covers other edges."""
        ids = self.all_edge_ids()
        if len(ids) != sub.num_edges or not np.array_equal(ids, sub.edges):
            raise AlignmentError(
                f"mask covers {len(ids)} edges but subgraph has {sub.num_edges} "
                "(or the edge ids differ)")
        return self.all_logits()

    def lookup(self, edge_ids) -> np.ndarray:
        """Logits for the given parent edge ids (NaN where not covered)."""
        ids = self.all_edge_ids()
        vals = self.all_logits()
        order = np.argsort(ids)
        ids, vals = ids[order], vals[order]
        edge_ids = np.asarray(edge_ids)
        pos = np.searchsorted(ids, edge_ids)
        pos_c = np.minimum(pos, max(len(ids) - 1, 0))
        hit = (pos < len(ids)) & (ids[pos_c] == edge_ids) if len(ids) else np.zeros(len(edge_ids), bool)
        out = np.full(len(edge_ids), np.nan)
        out[hit] = vals[pos_c[hit]]
        return out

    def stats(self) -> dict:
        v = self.all_logits()
        if not len(v):
            return {"edges": 0}
        w = expit(v)
        return {"edges": int(len(v)), "iteration": int(self.iteration),
                "logit_min": float(v.min()), "logit_max": float(v.max()),
                "logit_mean": float(v.mean()), "weight_mean": float(w.mean())}
