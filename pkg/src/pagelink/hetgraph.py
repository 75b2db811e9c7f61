"""Immutable heterogeneous multigraph and L-hop computation graphs.

Nodes are ``(node_type, int_id)`` pairs. At build time every node gets a
dense global index (nodes sorted by type name, then id) and every edge a
dense edge index (edges sorted by edge type, source index, target index),
so all downstream code works on integer arrays and results never depend on
the order in which edges were supplied.

Degrees and hop distances are measured on the undirected skeleton: an edge
counts once toward the degree of each of its endpoints, whatever its
direction.
"""
from __future__ import annotations

import hashlib
import io
import json
import warnings
from collections import deque
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .exceptions import ConstructionError, NodeNotFoundError, ParseError

NodeRef = tuple  # (node_type: str, node_id: int)
NodeLike = Union[NodeRef, int, np.integer]


class HeteroGraph:
    """Typed directed multigraph with array-backed storage.

    Do not instantiate directly; use :func:`build_graph`.
    """

    def __init__(self, node_types, edge_types, signatures, node_type, node_id,
                 edge_src, edge_dst, edge_type):
        self.node_types = tuple(node_types)
        self.edge_types = tuple(edge_types)
        self.signatures = dict(signatures)
        self.node_type = node_type
        self.node_id = node_id
        self.edge_src = edge_src
        self.edge_dst = edge_dst
        self.edge_type = edge_type
        for arr in (node_type, node_id, edge_src, edge_dst, edge_type):
            arr.setflags(write=False)

        n = len(node_type)
        self._index = {(self.node_types[t], int(i)): k
                       for k, (t, i) in enumerate(zip(node_type, node_id))}
        self.degrees = np.bincount(edge_src, minlength=n) + np.bincount(edge_dst, minlength=n)
        self.degrees.setflags(write=False)

        # undirected CSR: every edge appears once under each endpoint
        ends = np.concatenate([edge_src, edge_dst])
        others = np.concatenate([edge_dst, edge_src])
        eids = np.concatenate([np.arange(len(edge_src))] * 2)
        order = np.lexsort((eids, ends))
        self.adj_ptr = np.concatenate([[0], np.cumsum(self.degrees)])
        self.adj_nbr = others[order]
        self.adj_eid = eids[order]

        # canonical edge order groups each type into one contiguous block
        bounds = np.searchsorted(edge_type, np.arange(len(self.edge_types) + 1))
        self._type_slice = {r: slice(int(bounds[i]), int(bounds[i + 1]))
                            for i, r in enumerate(self.edge_types)}

    # -- sizes and lookups -------------------------------------------------
    @property
    def num_nodes(self) -> int:
        return len(self.node_type)

    @property
    def num_edges(self) -> int:
        return len(self.edge_src)

    def __repr__(self):
        return (f"HeteroGraph(nodes={self.num_nodes}, edges={self.num_edges}, "
                f"node_types={list(self.node_types)}, edge_types={list(self.edge_types)})")

    def index(self, node: NodeLike) -> int:
        """Global index of ``node`` (a ``(type, id)`` pair or an index)."""
        if isinstance(node, (int, np.integer)):
            if 0 <= node < self.num_nodes:
                return int(node)
            raise NodeNotFoundError(f"node index {node} out of range")
        try:
            return self._index[(node[0], int(node[1]))]
        except (KeyError, TypeError, ValueError, IndexError):
            raise NodeNotFoundError(f"unknown node {node!r}") from None

    def node_ref(self, idx: int) -> NodeRef:
        return (self.node_types[self.node_type[idx]], int(self.node_id[idx]))

    def type_of(self, idx: int) -> str:
        return self.node_types[self.node_type[idx]]

    def nodes_of_type(self, node_type: str) -> np.ndarray:
        t = self.node_types.index(node_type)
        return np.flatnonzero(self.node_type == t)

    def edge_slice(self, edge_type: str) -> slice:
        return self._type_slice[edge_type]

    def edge_type_name(self, eid: int) -> str:
        return self.edge_types[self.edge_type[eid]]

    def neighbors(self, idx: int):
        """``(neighbor indices, edge ids)`` on the undirected skeleton."""
        lo, hi = self.adj_ptr[idx], self.adj_ptr[idx + 1]
        return self.adj_nbr[lo:hi], self.adj_eid[lo:hi]

    def has_edge(self, u: int, v: int, edge_type: str | None = None) -> bool:
        """True if some edge joins ``u`` and ``v`` in either direction."""
        nbrs, eids = self.neighbors(u)
        hit = eids[nbrs == v]
        if edge_type is None:
            return len(hit) > 0
        r = self.edge_types.index(edge_type)
        return bool(np.any(self.edge_type[hit] == r))

    @cached_property
    def typed_adjacency(self):
        """Per edge type: forward (by source) and reverse (by target) CSR.

        Returns ``{edge_type: (fwd_ptr, fwd_eids, rev_ptr, rev_eids)}``.
        """
        out = {}
        n = self.num_nodes
        for r, sl in self._type_slice.items():
            eids = np.arange(sl.start, sl.stop)
            src, dst = self.edge_src[sl], self.edge_dst[sl]
            f = np.argsort(src, kind="stable")
            b = np.argsort(dst, kind="stable")
            fptr = np.concatenate([[0], np.cumsum(np.bincount(src, minlength=n))])
            bptr = np.concatenate([[0], np.cumsum(np.bincount(dst, minlength=n))])
            out[r] = (fptr, eids[f], bptr, eids[b])
        return out

    @cached_property
    def schema_hash(self) -> str:
        """Digest of the type vocabularies, edge signatures and node set."""
        h = hashlib.sha256()
        h.update(json.dumps([self.node_types, self.edge_types,
                             [self.signatures[r] for r in self.edge_types]]).encode())
        h.update(np.ascontiguousarray(self.node_type, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(self.node_id, dtype="<i8").tobytes())
        return h.hexdigest()[:16]

    @cached_property
    def _edge_keys(self) -> dict:
        return {k: e for e, k in enumerate(zip(self.edge_src.tolist(), self.edge_dst.tolist(),
                                                self.edge_type.tolist()))}

    def find_edge(self, u: int, v: int, edge_type: str, either_direction: bool = True) -> int:
        """Edge id of the ``edge_type`` edge ``u -> v`` (or ``v -> u``), else -1."""
        if edge_type not in self.edge_types:
            return -1
        r = self.edge_types.index(edge_type)
        e = self._edge_keys.get((int(u), int(v), r), -1)
        if e < 0 and either_direction:
            e = self._edge_keys.get((int(v), int(u), r), -1)
        return e

    def drop_edge_types(self, drop: Iterable[str]) -> "HeteroGraph":
        """Copy of the graph without the given edge types (nodes kept)."""
        drop = set(drop)
        keep = [r for r in self.edge_types if r not in drop]
        if len(keep) == len(self.edge_types):
            return self
        mask = np.isin(self.edge_type, [self.edge_types.index(r) for r in keep])
        remap = {self.edge_types.index(r): i for i, r in enumerate(keep)}
        new_type = np.array([remap[x] for x in self.edge_type[mask]], dtype=np.int64)
        return HeteroGraph(self.node_types, keep,
                           {r: self.signatures[r] for r in keep},
                           self.node_type.copy(), self.node_id.copy(),
                           self.edge_src[mask].copy(), self.edge_dst[mask].copy(), new_type)

    def with_edges(self, edge_specs) -> "HeteroGraph":
        """Copy with extra ``(src_ref, edge_type, dst_ref)`` edges appended."""
        nodes = [self.node_ref(i) for i in range(self.num_nodes)]
        edges = list(self.iter_edges())
        edges += [(s[0], s[1], r, d[0], d[1]) for s, r, d in edge_specs]
        return build_graph(nodes, edges)

    def iter_edges(self):
        """Yield ``(src_type, src_id, edge_type, dst_type, dst_id)`` in canonical order."""
        for e in range(self.num_edges):
            s, d = self.edge_src[e], self.edge_dst[e]
            st, si = self.node_ref(s)
            dt, di = self.node_ref(d)
            yield (st, si, self.edge_types[self.edge_type[e]], dt, di)

    def canonical_form(self) -> str:
        """Text form that is identical for isomorphic-by-label graphs."""
        buf = io.StringIO()
        write_tsv(self, buf)
        isolated = np.flatnonzero(self.degrees == 0)
        for i in isolated:
            t, k = self.node_ref(i)
            buf.write(f"{t}\t{k}\n")
        return buf.getvalue()


def build_graph(node_specs: Iterable[Sequence], edge_specs: Iterable[Sequence],
                node_types: Sequence[str] | None = None,
                edge_types: Sequence[str] | None = None) -> HeteroGraph:
    """Build an immutable :class:`HeteroGraph`.

    Parameters
    ----------
    node_specs : iterable of (node_type, node_id)
    edge_specs : iterable of (src_type, src_id, edge_type, dst_type, dst_id)
    node_types, edge_types : optional declared vocabularies. When given,
        every type used must belong to them; otherwise they are inferred.

    Duplicate edges (same endpoints and type) are collapsed with a warning.
    Every edge type must always join the same pair of node types.
    """
    refs = []
    seen = set()
    for spec in node_specs:
        ref = (str(spec[0]), int(spec[1]))
        if ref in seen:
            raise ConstructionError(f"duplicate node id {ref!r}")
        seen.add(ref)
        refs.append(ref)

    edges = [(str(e[0]), int(e[1]), str(e[2]), str(e[3]), int(e[4])) for e in edge_specs]

    if node_types is None:
        node_types = sorted({r[0] for r in refs})
    else:
        node_types = sorted(set(node_types))
        bad = {r[0] for r in refs} - set(node_types)
        if bad:
            raise ConstructionError(f"node types outside vocabulary: {sorted(bad)}")
    if edge_types is None:
        edge_types = sorted({e[2] for e in edges})
    else:
        edge_types = sorted(set(edge_types))
        bad = {e[2] for e in edges} - set(edge_types)
        if bad:
            raise ConstructionError(f"edge types outside vocabulary: {sorted(bad)}")

    refs.sort(key=lambda r: (r[0], r[1]))
    index = {r: i for i, r in enumerate(refs)}
    tpos = {t: i for i, t in enumerate(node_types)}
    rpos = {r: i for i, r in enumerate(edge_types)}

    signatures = {}
    triples = set()
    dup = 0
    for st, si, r, dt, di in edges:
        try:
            u, v = index[(st, si)], index[(dt, di)]
        except KeyError as exc:
            raise ConstructionError(f"edge {st}:{si} -{r}-> {dt}:{di} has dangling endpoint "
                                    f"{exc.args[0]!r}") from None
        if u == v:
            raise ConstructionError(f"self-loop on {st}:{si} ({r}) is not supported")
        sig = signatures.setdefault(r, (st, dt))
        if sig != (st, dt):
            raise ConstructionError(f"edge type {r!r} used as {st}->{dt}, previously {sig[0]}->{sig[1]}")
        key = (rpos[r], u, v)
        if key in triples:
            dup += 1
            continue
        triples.add(key)
    if dup:
        warnings.warn(f"dropped {dup} duplicate edge(s)", stacklevel=2)
    for r in edge_types:
        signatures.setdefault(r, (None, None))

    ordered = sorted(triples)
    etype = np.array([k[0] for k in ordered], dtype=np.int64)
    esrc = np.array([k[1] for k in ordered], dtype=np.int64)
    edst = np.array([k[2] for k in ordered], dtype=np.int64)
    ntype = np.array([tpos[r[0]] for r in refs], dtype=np.int64)
    nid = np.array([r[1] for r in refs], dtype=np.int64)
    return HeteroGraph(node_types, edge_types, signatures, ntype, nid, esrc, edst, etype)


def degree(g: HeteroGraph, v: NodeLike) -> int:
    """Undirected-skeleton degree of ``v``."""
    return int(g.degrees[g.index(v)])


# -- subgraph views ----------------------------------------------------------

class Subgraph:
    """A node/edge subset of a parent graph, both stored as sorted global indices."""

    def __init__(self, graph: HeteroGraph, nodes, edges):
        self.graph = graph
        self.nodes = np.asarray(nodes, dtype=np.int64)
        self.edges = np.asarray(edges, dtype=np.int64)
        self.nodes.setflags(write=False)
        self.edges.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def local(self, global_idx):
        """Map global node indices to positions in ``self.nodes``."""
        return np.searchsorted(self.nodes, global_idx)

    def contains(self, global_idx: int) -> bool:
        i = np.searchsorted(self.nodes, global_idx)
        return i < len(self.nodes) and self.nodes[i] == global_idx

    @cached_property
    def local_src(self) -> np.ndarray:
        return self.local(self.graph.edge_src[self.edges])

    @cached_property
    def local_dst(self) -> np.ndarray:
        return self.local(self.graph.edge_dst[self.edges])

    @cached_property
    def edge_type_idx(self) -> np.ndarray:
        return self.graph.edge_type[self.edges]

    @cached_property
    def degrees(self) -> np.ndarray:
        """Degrees within this subgraph, aligned with ``self.nodes``."""
        n = self.num_nodes
        return np.bincount(self.local_src, minlength=n) + np.bincount(self.local_dst, minlength=n)

    @cached_property
    def adjacency(self):
        """Local undirected CSR ``(ptr, nbr, edge_pos)``; ``edge_pos`` indexes ``self.edges``."""
        n = self.num_nodes
        m = self.num_edges
        ends = np.concatenate([self.local_src, self.local_dst])
        others = np.concatenate([self.local_dst, self.local_src])
        pos = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((pos, ends))
        ptr = np.concatenate([[0], np.cumsum(np.bincount(ends, minlength=n))])
        return ptr, others[order], pos[order]

    def edges_by_type(self) -> dict:
        """``{edge_type: sorted global edge ids}`` for every type in the parent graph."""
        g = self.graph
        out = {}
        for i, r in enumerate(g.edge_types):
            out[r] = self.edges[self.edge_type_idx == i]
        return out

    def induced(self, keep_local) -> tuple:
        """Node and edge arrays of the subgraph induced by ``keep_local`` (bool, local)."""
        keep_local = np.asarray(keep_local, dtype=bool)
        e_keep = keep_local[self.local_src] & keep_local[self.local_dst]
        return self.nodes[keep_local], self.edges[e_keep]


class ComputationGraph(Subgraph):
    """The L-hop ego-graph of a predicted pair ``(source, target)``.

    ``source``/``target`` are global node indices.
    """

    def __init__(self, graph, nodes, edges, source, target, hops):
        super().__init__(graph, nodes, edges)
        self.source = int(source)
        self.target = int(target)
        self.hops = int(hops)

    @property
    def pair(self):
        return self.source, self.target

    def __repr__(self):
        g = self.graph
        return (f"{type(self).__name__}(pair={g.node_ref(self.source)}->{g.node_ref(self.target)}, "
                f"L={self.hops}, nodes={self.num_nodes}, edges={self.num_edges})")

    def restrict(self, keep_local) -> "ComputationGraph":
        nodes, edges = self.induced(keep_local)
        return ComputationGraph(self.graph, nodes, edges, self.source, self.target, self.hops)

    @classmethod
    def whole(cls, graph: HeteroGraph, source, target, hops=1) -> "ComputationGraph":
        """Treat the entire graph as a computation graph (tests, benchmarks)."""
        return cls(graph, np.arange(graph.num_nodes), np.arange(graph.num_edges),
                   graph.index(source), graph.index(target), hops)


def hop_distances(g: HeteroGraph, start: int, limit: int) -> dict:
    """BFS distances from ``start`` on the undirected skeleton, up to ``limit`` hops."""
    dist = {start: 0}
    queue = deque([start])
    ptr, nbr = g.adj_ptr, g.adj_nbr
    while queue:
        v = queue.popleft()
        d = dist[v]
        if d == limit:
            continue
        for u in nbr[ptr[v]:ptr[v + 1]].tolist():
            if u not in dist:
                dist[u] = d + 1
                queue.append(u)
    return dist


def extract_computation_graph(g: HeteroGraph, s: NodeLike, t: NodeLike, L: int) -> ComputationGraph:
    """Nodes within ``L`` hops of ``s`` or ``t`` and every edge among them."""
    si, ti = g.index(s), g.index(t)
    if si == ti:
        raise ValueError("source and target must differ")
    if L < 1:
        raise ValueError("hop count L must be >= 1")
    reach = set(hop_distances(g, si, L))
    reach.update(hop_distances(g, ti, L))
    nodes = np.array(sorted(reach), dtype=np.int64)
    inside = np.zeros(g.num_nodes, dtype=bool)
    inside[nodes] = True
    ptr = g.adj_ptr
    eids = np.concatenate([g.adj_eid[ptr[v]:ptr[v + 1]] for v in nodes.tolist()])
    eids = np.unique(eids)
    eids = eids[inside[g.edge_src[eids]] & inside[g.edge_dst[eids]]]
    return ComputationGraph(g, nodes, eids, si, ti, L)


# -- TSV interchange ---------------------------------------------------------

def write_tsv(g: HeteroGraph, out, header: Sequence[str] = ()):
    """Write edges as ``src_type, src_id, edge_type, dst_type, dst_id`` lines."""
    own = isinstance(out, (str, Path))
    fh = open(out, "w", encoding="utf-8", newline="\n") if own else out
    try:
        for line in header:
            fh.write(f"# {line}\n")
        for row in g.iter_edges():
            fh.write("\t".join(map(str, row)) + "\n")
    finally:
        if own:
            fh.close()


def write_nodes_tsv(g: HeteroGraph, out, header: Sequence[str] = (), only_isolated=True):
    own = isinstance(out, (str, Path))
    fh = open(out, "w", encoding="utf-8", newline="\n") if own else out
    try:
        for line in header:
            fh.write(f"# {line}\n")
        idx = np.flatnonzero(g.degrees == 0) if only_isolated else range(g.num_nodes)
        for i in idx:
            t, k = g.node_ref(i)
            fh.write(f"{t}\t{k}\n")
    finally:
        if own:
            fh.close()


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield no, line.split("\t")


def read_tsv(edges_path, nodes_path=None) -> HeteroGraph:
    """Parse the edge TSV (and optional companion nodes file) into a graph."""
    nodes = set()
    edges = []
    for no, cols in _data_lines(edges_path):
        if len(cols) != 5:
            raise ParseError(f"expected 5 tab-separated fields, got {len(cols)}", no)
        st, si, r, dt, di = cols
        try:
            si, di = int(si), int(di)
        except ValueError:
            raise ParseError("node ids must be integers", no) from None
        nodes.add((st, si))
        nodes.add((dt, di))
        edges.append((st, si, r, dt, di))
    if nodes_path is not None:
        for no, cols in _data_lines(nodes_path):
            if len(cols) != 2:
                raise ParseError(f"expected 2 tab-separated fields, got {len(cols)}", no)
            try:
                nodes.add((cols[0], int(cols[1])))
            except ValueError:
                raise ParseError("node ids must be integers", no) from None
    return build_graph(sorted(nodes), edges)
