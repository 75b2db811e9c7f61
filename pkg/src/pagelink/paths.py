"""Edge scores and k-shortest loopless s-t paths under a hop limit.

An edge ``e = (u, v)`` entered at ``v`` scores ``log sigmoid(M_e) - log D_v``.
Scores are never positive, so ``-score`` is a valid Dijkstra distance and
the best paths are the shortest ones. Because the score depends on which
endpoint is entered, traversal cost is direction dependent.

Paths are ranked by the key ``(cost, hops, node sequence, edge sequence)``,
where cost is the left-to-right floating-point sum of edge costs. The
search reproduces that order exactly, ties included.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegreeError, NoPathError
from .hetgraph import Subgraph
from .masks import EdgeMaskSet


def edge_score(mask_logit: float, degree: int) -> float:
    """``log sigmoid(mask_logit) - log(degree)``."""
    if degree < 1:
        raise DegreeError("edge enters a node of degree 0")
    return -float(np.logaddexp(0.0, -mask_logit)) - math.log(degree)


@dataclass(frozen=True)
class Path:
    """A simple s-t path. ``nodes`` and ``edges`` hold parent-graph indices."""

    nodes: tuple
    edges: tuple
    edge_types: tuple
    score: float

    @property
    def length(self) -> int:
        return len(self.edges)

    def node_refs(self, g):
        return [g.node_ref(v) for v in self.nodes]

    def to_dict(self, g) -> dict:
        return {"nodes": [list(r) for r in self.node_refs(g)], "edge_types": list(self.edge_types),
                "edges": [int(e) for e in self.edges], "score": self.score}


def traversal_costs(sub: Subgraph, logits: np.ndarray, degree_from: str = "core"):
    """Per-edge costs ``(entering dst, entering src)`` aligned with ``sub.edges``."""
    if degree_from == "core":
        deg = sub.degrees
    elif degree_from == "full":
        deg = sub.graph.degrees[sub.nodes]
    else:
        raise ValueError(f"degree_from must be 'core' or 'full', not {degree_from!r}")
    # isolated protected endpoints have degree 0 but no edge ever enters them
    deg = np.maximum(deg, 1)
    base = np.logaddexp(0.0, -np.asarray(logits, dtype=np.float64))
    logd = np.log(deg.astype(np.float64))
    return base + logd[sub.local_dst], base + logd[sub.local_src]


def _adjacency(sub: Subgraph, fwd, rev):
    ptr, nbr, epos = sub.adjacency
    src = sub.local_src
    adj = []
    nbr_l, epos_l, ptr_l = nbr.tolist(), epos.tolist(), ptr.tolist()
    fwd_l, rev_l, src_l = fwd.tolist(), rev.tolist(), src.tolist()
    for v in range(sub.num_nodes):
        row = []
        for j in range(ptr_l[v], ptr_l[v + 1]):
            e = epos_l[j]
            row.append((nbr_l[j], e, fwd_l[e] if src_l[e] == v else rev_l[e]))
        adj.append(row)
    return adj


def _search(adj, goal, max_hops, label, banned_nodes, banned_edges):
    """Best label reaching ``goal`` within ``max_hops`` total hops.

    Labels are ``(cost, hops, nodes, edges)`` and are compared as tuples. A
    node popped at some hop count blocks later labels with at least as many
    hops, which keeps every node settled at most ``max_hops + 1`` times and
    makes the optimal walk a simple path.
    """
    heap = [label]
    settled = {}
    while heap:
        cost, hops, nodes, edges = heapq.heappop(heap)
        v = nodes[-1]
        prev = settled.get(v)
        if prev is not None and prev <= hops:
            continue
        settled[v] = hops
        if v == goal:
            return cost, hops, nodes, edges
        if hops >= max_hops:
            continue
        for u, e, c in adj[v]:
            if u in banned_nodes or e in banned_edges:
                continue
            prev = settled.get(u)
            if prev is not None and prev <= hops + 1:
                continue
            heapq.heappush(heap, (cost + c, hops + 1, nodes + (u,), edges + (e,)))
    return None


def _prefix_costs(adj_cost, nodes, edges):
    out = [0.0]
    acc = 0.0
    for j, e in enumerate(edges):
        acc = acc + adj_cost[(nodes[j], e)]
        out.append(acc)
    return out


def k_shortest_paths_local(adj, s: int, t: int, k: int, l_max: int):
    """Yen's algorithm over a local adjacency list; returns labels best first."""
    if k < 1:
        return []
    adj_cost = {(v, e): c for v, row in enumerate(adj) for _, e, c in row}
    first = _search(adj, t, l_max, (0.0, 0, (s,), ()), frozenset(), frozenset())
    if first is None:
        return []
    found = [first]
    seen = {first[3]}
    cands = []
    while len(found) < k:
        _, _, nodes, edges = found[-1]
        prefix = _prefix_costs(adj_cost, nodes, edges)
        for i in range(len(edges)):
            root_nodes, root_edges = nodes[:i + 1], edges[:i]
            banned_e = {p[3][i] for p in found
                        if len(p[3]) > i and p[2][:i + 1] == root_nodes and p[3][:i] == root_edges}
            banned_n = set(root_nodes[:-1])
            res = _search(adj, t, l_max, (prefix[i], i, root_nodes, root_edges), banned_n, banned_e)
            if res is not None and res[3] not in seen:
                seen.add(res[3])
                heapq.heappush(cands, res)
        if not cands:
            break
        found.append(heapq.heappop(cands))
    return found


def search_local(sub: Subgraph, logits, s_local: int, t_local: int, k_paths: int, l_max: int,
                 degree_from: str = "core"):
    """Best-first ``(cost, hops, nodes, edges)`` labels in ``sub``-local indices."""
    fwd, rev = traversal_costs(sub, logits, degree_from)
    return k_shortest_paths_local(_adjacency(sub, fwd, rev), s_local, t_local, k_paths, l_max)


def top_k_paths(core: Subgraph, mask: EdgeMaskSet, s, t, k_paths: int = 5, l_max: int = 3,
                degree_from: str = "core") -> list:
    """The ``k_paths`` highest-scoring simple s-t paths with at most ``l_max`` hops.

    Raises :class:`NoPathError` if no such path exists.
    """
    g = core.graph
    si, ti = g.index(s), g.index(t)
    for v in (si, ti):
        if not core.contains(v):
            raise NoPathError(f"{g.node_ref(v)} is not in the graph being searched")
    labels = search_local(core, mask.flat(core), int(core.local(si)), int(core.local(ti)),
                          k_paths, l_max, degree_from)
    if not labels:
        raise NoPathError(f"no path of at most {l_max} hops joins {g.node_ref(si)} and {g.node_ref(ti)}")
    return [to_path(core, lab) for lab in labels]


def to_path(sub: Subgraph, label) -> Path:
    cost, _, nodes, edges = label
    g = sub.graph
    gn = tuple(int(sub.nodes[v]) for v in nodes)
    ge = tuple(int(sub.edges[e]) for e in edges)
    return Path(gn, ge, tuple(g.edge_type_name(e) for e in ge), -cost)


def path_edge_set(paths) -> set:
    return {e for p in paths for e in p.edges}
