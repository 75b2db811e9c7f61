"""k-core pruning with protected endpoints, and high-degree node removal."""
from __future__ import annotations

import numpy as np

from .hetgraph import ComputationGraph, HeteroGraph, Subgraph


class PrunedCore(ComputationGraph):
    """k-core of a computation graph in which the pair endpoints are never removed.

    ``shells`` maps each removed global node index to the peeling round
    (1-based) in which it was removed.
    """

    def __init__(self, parent: ComputationGraph, nodes, edges, k, shells):
        super().__init__(parent.graph, nodes, edges, parent.source, parent.target, parent.hops)
        self.parent = parent
        self.k = int(k)
        self.shells = dict(shells)

    @property
    def protected(self):
        return frozenset((self.source, self.target))


def _peel(sub: Subgraph, k: int, protected_local) -> tuple[np.ndarray, dict]:
    """Round-based peeling; returns (alive mask over local nodes, {local: round})."""
    ptr, nbr, epos = sub.adjacency
    deg = sub.degrees.copy()
    n = sub.num_nodes
    alive = np.ones(n, dtype=bool)
    edge_alive = np.ones(sub.num_edges, dtype=bool)
    guard = np.zeros(n, dtype=bool)
    guard[list(protected_local)] = True
    queued = (deg < k) & ~guard
    frontier = np.flatnonzero(queued).tolist()
    removed = {}
    rnd = 0
    ptr_l, nbr_l, epos_l = ptr.tolist(), nbr.tolist(), epos.tolist()
    while frontier:
        rnd += 1
        for v in frontier:
            alive[v] = False
            removed[v] = rnd
        nxt = []
        for v in frontier:
            for j in range(ptr_l[v], ptr_l[v + 1]):
                e = epos_l[j]
                if not edge_alive[e]:
                    continue
                edge_alive[e] = False
                u = nbr_l[j]
                if alive[u]:
                    deg[u] -= 1
                    if deg[u] < k and not queued[u] and not guard[u]:
                        queued[u] = True
                        nxt.append(u)
        frontier = nxt
    return alive, removed


def kcore_prune(cg: Subgraph, k: int, protected=None) -> PrunedCore | Subgraph:
    """Maximal subgraph whose non-protected nodes all have degree >= k.

    For a :class:`ComputationGraph` the protected set defaults to its
    source and target and a :class:`PrunedCore` is returned. For a plain
    :class:`Subgraph` (or a whole :class:`HeteroGraph`) nothing is
    protected unless ``protected`` (global indices) is given, and a
    :class:`Subgraph` is returned.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(cg, HeteroGraph):
        cg = Subgraph(cg, np.arange(cg.num_nodes), np.arange(cg.num_edges))
    if protected is None:
        protected = (cg.source, cg.target) if isinstance(cg, ComputationGraph) else ()
    prot_local = [int(cg.local(p)) for p in protected]
    alive, removed = _peel(cg, k, prot_local)
    nodes, edges = cg.induced(alive)
    shells = {int(cg.nodes[v]): r for v, r in removed.items()}
    if isinstance(cg, ComputationGraph):
        return PrunedCore(cg, nodes, edges, k, shells)
    return Subgraph(cg.graph, nodes, edges)


def remove_high_degree(cg: Subgraph, degree_cap: int, protected=None):
    """Drop every non-protected node whose degree in ``cg`` exceeds ``degree_cap``."""
    if degree_cap < 1:
        raise ValueError("degree_cap must be >= 1")
    if protected is None:
        protected = (cg.source, cg.target) if isinstance(cg, ComputationGraph) else ()
    keep = cg.degrees <= degree_cap
    for p in protected:
        keep[cg.local(p)] = True
    if isinstance(cg, ComputationGraph):
        return cg.restrict(keep)
    nodes, edges = cg.induced(keep)
    return Subgraph(cg.graph, nodes, edges)


def connected_in(sub: Subgraph, a: int, b: int) -> bool:
    """Whether global nodes ``a`` and ``b`` are joined by a path inside ``sub``."""
    if not (sub.contains(a) and sub.contains(b)):
        return False
    ptr, nbr, _ = sub.adjacency
    start, goal = int(sub.local(a)), int(sub.local(b))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        if v == goal:
            return True
        for u in nbr[ptr[v]:ptr[v + 1]].tolist():
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return False


def prune_for_explanation(cg: ComputationGraph, k: int = 2, degree_cap: int | None = None) -> PrunedCore:
    """Optional degree cap, then the k-core; falls back to k=1 if s and t get separated."""
    base = remove_high_degree(cg, degree_cap) if degree_cap else cg
    core = kcore_prune(base, k)
    if k > 1 and not connected_in(core, cg.source, cg.target):
        core = kcore_prune(base, 1)
    return core
