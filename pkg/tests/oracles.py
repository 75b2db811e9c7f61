"""Slow, obviously-correct reference implementations used by the tests."""
from __future__ import annotations

import itertools
from collections import deque

import numpy as np

from pagelink.hetgraph import build_graph


def random_graph(rng, n_nodes, n_edges, node_types=("a", "b"), edge_types=("x", "y")):
    """Random heterogeneous graph; edge type ``r`` always joins the same type pair."""
    nodes = [(node_types[i % len(node_types)], i) for i in range(n_nodes)]
    sigs = {r: (node_types[j % len(node_types)], node_types[(j + 1) % len(node_types)])
            for j, r in enumerate(edge_types)}
    by_type = {t: [n for n in nodes if n[0] == t] for t in node_types}
    edges = set()
    for _ in range(n_edges * 4):
        if len(edges) >= n_edges:
            break
        r = edge_types[int(rng.integers(len(edge_types)))]
        st, dt = sigs[r]
        u = by_type[st][int(rng.integers(len(by_type[st])))]
        v = by_type[dt][int(rng.integers(len(by_type[dt])))]
        if u != v:
            edges.add((u[0], u[1], r, v[0], v[1]))
    return build_graph(nodes, sorted(edges), edge_types=edge_types)


def bfs_distances(g, start):
    nbrs = {v: set() for v in range(g.num_nodes)}
    for s, d in zip(g.edge_src.tolist(), g.edge_dst.tolist()):
        nbrs[s].add(d)
        nbrs[d].add(s)
    dist = {start: 0}
    q = deque([start])
    while q:
        v = q.popleft()
        for u in nbrs[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def brute_kcore(nodes, edges, k, protected):
    """Largest node subset containing ``protected`` whose other nodes have induced degree >= k.

    ``edges`` are ``(u, v)`` pairs over ``nodes``. Returns ``(node set, edge index set)``.
    """
    nodes = list(nodes)
    free = [v for v in nodes if v not in protected]
    best = None
    for r in range(len(free), -1, -1):
        for keep in itertools.combinations(free, r):
            chosen = set(keep) | set(protected)
            deg = {v: 0 for v in chosen}
            for u, v in edges:
                if u in chosen and v in chosen:
                    deg[u] += 1
                    deg[v] += 1
            if all(deg[v] >= k for v in keep):
                if best is None:
                    best = chosen
                else:
                    # union-closed property: the first maximal hit contains every valid set
                    assert chosen <= best
        if best is not None:
            break
    kept_edges = {i for i, (u, v) in enumerate(edges) if u in best and v in best}
    return best, kept_edges


def all_simple_paths(n_nodes, edge_list, costs_fwd, costs_rev, s, t, l_max):
    """Every simple s-t path with at most ``l_max`` hops as a ``(cost, hops, nodes, edges)`` label.

    ``edge_list[i] = (u, v)``; traversing u->v costs ``costs_fwd[i]``, v->u ``costs_rev[i]``.
    Costs are summed left to right, the same way the search accumulates them.
    """
    adj = [[] for _ in range(n_nodes)]
    for i, (u, v) in enumerate(edge_list):
        adj[u].append((v, i, costs_fwd[i]))
        adj[v].append((u, i, costs_rev[i]))
    out = []

    def walk(v, cost, nodes, edges):
        if v == t:
            out.append((cost, len(edges), nodes, edges))
            return
        if len(edges) == l_max:
            return
        for u, i, c in adj[v]:
            if u not in nodes:
                walk(u, cost + c, nodes + (u,), edges + (i,))

    walk(s, 0.0, (s,), ())
    return sorted(out)


def pairwise_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def central_differences(f, x, step=1e-4):
    x = np.array(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(len(x)):
        up, down = x.copy(), x.copy()
        up[i] += step
        down[i] -= step
        out[i] = (f(up) - f(down)) / (2 * step)
    return out


def relative_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6))) if a.size else 0.0
