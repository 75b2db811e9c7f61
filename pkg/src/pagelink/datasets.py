"""Graphs with planted ground-truth explanations.

``augment_with_paths`` adds ``likes`` links between pairs that are joined
by at least one short path through low-degree nodes, and records the best
such paths (smallest interior degree sum) as the ground truth. The
user/item/attribute generator and the citation-like generator both feed
their base graph through it.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path as FsPath

import numpy as np

from .exceptions import ConfigError, GenerationError, ParseError
from .hetgraph import HeteroGraph, build_graph, read_tsv

LINK_TYPE = "likes"


@dataclass(frozen=True)
class GTPath:
    """A ground-truth path: node indices, the edge types joining them, edge ids.

    Edge ids refer to the graph the path was emitted with; use
    :meth:`GroundTruth.edge_sets` to resolve them in another graph with the
    same nodes (e.g. the graph without the ``likes`` links).
    """

    nodes: tuple
    edge_types: tuple
    edges: tuple
    degree_sum: int

    @property
    def length(self) -> int:
        return len(self.edges)


@dataclass
class GroundTruth:
    link: tuple
    paths: list
    l_max: int
    d_max: int
    p_max: int

    @property
    def edges(self) -> set:
        return {e for p in self.paths for e in p.edges}

    def edge_sets(self, g: HeteroGraph) -> list:
        """Each path's edge ids in ``g`` (matched by endpoints and type)."""
        out = []
        for p in self.paths:
            ids = []
            for j, r in enumerate(p.edge_types):
                e = g.find_edge(p.nodes[j], p.nodes[j + 1], r)
                if e < 0:
                    raise ConfigError(f"ground-truth edge {p.nodes[j]}-{r}-{p.nodes[j + 1]} is not in the graph")
                ids.append(e)
            out.append(tuple(ids))
        return out


# -- qualifying paths ----------------------------------------------------------

def _walk(g: HeteroGraph, s: int, l_max: int, d_max: int, allowed_types, deg, dst_type: int | None):
    """All simple paths from ``s`` of at most ``l_max`` hops whose interior
    nodes have degree <= ``d_max``; yields ``(end, nodes, edges)``."""
    ptr, nbr, eid = g.adj_ptr, g.adj_nbr, g.adj_eid
    etype = g.edge_type
    stack = [(s, (s,), ())]
    while stack:
        v, nodes, edges = stack.pop()
        if len(edges) == l_max:
            continue
        for j in range(ptr[v], ptr[v + 1]):
            u, e = int(nbr[j]), int(eid[j])
            if not allowed_types[etype[e]] or u in nodes:
                continue
            pn, pe = nodes + (u,), edges + (e,)
            if dst_type is None or g.node_type[u] == dst_type:
                yield u, pn, pe
            if deg[u] <= d_max:
                stack.append((u, pn, pe))


def qualifying_paths(g: HeteroGraph, s, t, l_max: int, d_max: int, exclude_types=(LINK_TYPE,)) -> list:
    """Simple s-t paths with <= ``l_max`` hops and interior degrees <= ``d_max``.

    Degrees ignore ``exclude_types`` edges, and paths never use them.
    Returned best first by (interior degree sum, hops, nodes, edges).
    """
    si, ti = g.index(s), g.index(t)
    allowed, deg = _allowed_and_degrees(g, exclude_types)
    found = []
    for end, nodes, edges in _walk(g, si, l_max, d_max, allowed, deg, None):
        if end == ti:
            found.append(_gt_path(g, nodes, edges, deg))
    return sorted(found, key=_rank)


def _allowed_and_degrees(g, exclude_types):
    allowed = np.array([r not in set(exclude_types) for r in g.edge_types], dtype=bool)
    keep = allowed[g.edge_type]
    n = g.num_nodes
    deg = np.bincount(g.edge_src[keep], minlength=n) + np.bincount(g.edge_dst[keep], minlength=n)
    return allowed, deg


def _gt_path(g, nodes, edges, deg) -> GTPath:
    return GTPath(tuple(nodes), tuple(g.edge_type_name(e) for e in edges), tuple(edges),
                  int(sum(int(deg[v]) for v in nodes[1:-1])))


def _rank(p: GTPath):
    return (p.degree_sum, p.length, p.nodes, p.edges)


def augment_with_paths(g: HeteroGraph, src_type: str, dst_type: str, l_max: int, d_max: int,
                       p_max: int, n_links: int, seed=0, link_type: str = LINK_TYPE):
    """Add ``n_links`` typed links between non-adjacent pairs that have a qualifying path.

    Returns ``(augmented graph, [((s, t), GroundTruth), ...])`` with links
    sorted by node index. Qualifying paths are computed on ``g`` as given,
    so the new links never affect them. If fewer than ``n_links`` pairs
    qualify, all of them are added and a warning is issued.
    """
    for t in (src_type, dst_type):
        if t not in g.node_types:
            raise ConfigError(f"graph has no node type {t!r}")
    if link_type in g.edge_types:
        raise ConfigError(f"graph already has {link_type!r} edges")
    allowed, deg = _allowed_and_degrees(g, ())
    dst_idx = g.node_types.index(dst_type)
    cands = {}
    for s in g.nodes_of_type(src_type).tolist():
        near = set(g.neighbors(s)[0].tolist())
        per = {}
        for end, nodes, edges in _walk(g, s, l_max, d_max, allowed, deg, dst_idx):
            if end in near:
                continue
            per.setdefault(end, []).append(_gt_path(g, nodes, edges, deg))
        for t, paths in per.items():
            cands[(s, t)] = paths
    keys = sorted(cands)
    rng = np.random.default_rng(seed)
    if len(keys) < n_links:
        warnings.warn(f"only {len(keys)} pairs qualify; wanted {n_links}", stacklevel=2)
        chosen = keys
    else:
        pick = rng.choice(len(keys), size=n_links, replace=False)
        chosen = sorted(keys[i] for i in pick)
    if not chosen:
        return g, []
    new = g.with_edges([(g.node_ref(s), link_type, g.node_ref(t)) for s, t in chosen])
    links = []
    for s, t in chosen:
        best = sorted(cands[(s, t)], key=_rank)[:p_max]
        # node indices survive with_edges; edge ids are re-resolved in the new graph
        paths = [GTPath(p.nodes, p.edge_types,
                        tuple(new.find_edge(p.nodes[j], p.nodes[j + 1], r) for j, r in enumerate(p.edge_types)),
                        p.degree_sum) for p in best]
        links.append(((s, t), GroundTruth((s, t), paths, l_max, d_max, p_max)))
    return new, links


# -- generators ----------------------------------------------------------------

@dataclass
class SynthSpec:
    """Parameters of the user/item/attribute generator.

    ``attr_skew`` is a Zipf exponent over attributes within each attribute
    type; 0 gives uniform popularity. ``cf_trials`` random (user, item)
    pairs are offered a collaborative-filtering ``buys`` edge.
    """

    n_users: int = 50
    n_items: int = 100
    attr_types: int = 2
    attrs_per_type: int = 10
    has_prob: float = 0.2
    prefer_prob: float = 0.08
    attr_skew: float = 2.5
    items_per_user: int = 20
    cf_trials: int = 30
    similar_threshold: int = 2
    l_max: int = 3
    d_max: int = 15
    p_max: int = 5
    n_links: int = 500
    seed: int = 0

    def validate(self) -> "SynthSpec":
        for name in ("n_users", "n_items", "attr_types", "attrs_per_type", "items_per_user",
                     "similar_threshold", "l_max", "d_max", "p_max", "n_links"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("has_prob", "prefer_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.cf_trials < 0 or self.attr_skew < 0:
            raise ConfigError("cf_trials and attr_skew must be >= 0")
        if self.items_per_user > self.n_items:
            raise ConfigError("items_per_user exceeds n_items")
        return self


@dataclass
class CitationSpec:
    n_authors: int = 120
    n_papers: int = 200
    n_refs: int = 150
    n_fos: int = 25
    authors_per_paper: int = 2
    refs_per_paper: int = 3
    fos_per_paper: int = 2
    fos_skew: float = 1.1
    author_skew: float = 0.8
    l_max: int = 3
    d_max: int = 30
    p_max: int = 5
    n_links: int = 300
    seed: int = 0

    def validate(self) -> "CitationSpec":
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("fos_skew", "author_skew", "seed"):
                if v < 0:
                    raise ConfigError(f"{f.name} must be >= 0")
            elif v < 1:
                raise ConfigError(f"{f.name} must be >= 1")
        if self.fos_per_paper > self.n_fos or self.refs_per_paper > self.n_refs \
                or self.authors_per_paper > self.n_authors:
            raise ConfigError("per-paper counts exceed the population they draw from")
        return self


PRESETS = {
    "useritemattr": SynthSpec,
    "citation-like": CitationSpec,
}


def _zipf(n: int, skew: float) -> np.ndarray:
    w = np.arange(1, n + 1, dtype=np.float64) ** (-skew)
    return w / w.mean()


def base_useritemattr(spec: SynthSpec) -> HeteroGraph:
    """Steps 1-5: ``has`` and ``buys`` edges (hidden preferences are discarded)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_attr = spec.attr_types * spec.attrs_per_type
    pop = np.tile(_zipf(spec.attrs_per_type, spec.attr_skew), spec.attr_types)
    has = rng.random((spec.n_items, n_attr)) < np.minimum(1.0, spec.has_prob * pop)[None, :]
    prefers = rng.random((spec.n_users, n_attr)) < spec.prefer_prob
    if spec.prefer_prob > 0:
        # every user prefers something, otherwise it never buys and stays isolated
        idle = np.flatnonzero(~prefers.any(axis=1))
        prefers[idle, rng.integers(n_attr, size=len(idle))] = True
    buys = np.zeros((spec.n_users, spec.n_items), dtype=bool)
    for u in range(spec.n_users):
        for i in rng.choice(spec.n_items, size=spec.items_per_user, replace=False):
            if (prefers[u] & has[i]).any():
                buys[u, i] = True
    shared = buys.astype(np.int64) @ buys.T.astype(np.int64)
    np.fill_diagonal(shared, 0)
    similar = shared >= spec.similar_threshold
    snapshot = buys.copy()
    for _ in range(spec.cf_trials):
        u, i = int(rng.integers(spec.n_users)), int(rng.integers(spec.n_items))
        if not buys[u, i] and (similar[u] & snapshot[:, i]).any():
            buys[u, i] = True
    nodes = ([("user", u) for u in range(spec.n_users)] + [("item", i) for i in range(spec.n_items)]
             + [("attr", a) for a in range(n_attr)])
    edges = [("item", int(i), "has", "attr", int(a)) for i, a in zip(*np.nonzero(has))]
    edges += [("user", int(u), "buys", "item", int(i)) for u, i in zip(*np.nonzero(buys))]
    return build_graph(nodes, edges, edge_types=("buys", "has"))


def gen_useritemattr(spec: SynthSpec | None = None):
    """User/item/attribute graph with ``likes`` links and their ground truth."""
    spec = (spec or SynthSpec()).validate()
    base = base_useritemattr(spec)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        g, links = augment_with_paths(base, "user", "item", spec.l_max, spec.d_max, spec.p_max,
                                      spec.n_links, spec.seed)
    for w in caught:
        warnings.warn(w.message, stacklevel=2)
    if not links:
        raise GenerationError(
            f"no qualifying (user, item) pairs: {base.num_edges} base edges "
            f"({int((base.edge_type == 0).sum())} buys), l_max={spec.l_max}, d_max={spec.d_max}")
    return g, links


def gen_citation_like(spec: CitationSpec | None = None, seed=None) -> HeteroGraph:
    """author/paper/ref/fos graph with ``writes``, ``cites`` and ``in`` edges.

    Field-of-study and author popularity follow Zipf weights, so a few
    generic fields collect far more papers than the rest.
    """
    spec = (spec or CitationSpec()).validate()
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    fos_w = _zipf(spec.n_fos, spec.fos_skew)
    fos_w /= fos_w.sum()
    auth_w = _zipf(spec.n_authors, spec.author_skew)
    auth_w /= auth_w.sum()
    edges = []
    for p in range(spec.n_papers):
        for a in rng.choice(spec.n_authors, size=spec.authors_per_paper, replace=False, p=auth_w):
            edges.append(("author", int(a), "writes", "paper", p))
        for r in rng.choice(spec.n_refs, size=spec.refs_per_paper, replace=False):
            edges.append(("paper", p, "cites", "ref", int(r)))
        for f in rng.choice(spec.n_fos, size=spec.fos_per_paper, replace=False, p=fos_w):
            edges.append(("paper", p, "in", "fos", int(f)))
    nodes = ([("author", a) for a in range(spec.n_authors)] + [("paper", p) for p in range(spec.n_papers)]
             + [("ref", r) for r in range(spec.n_refs)] + [("fos", f) for f in range(spec.n_fos)])
    return build_graph(nodes, edges, edge_types=("cites", "in", "writes"))


def gen_augcitation(spec: CitationSpec | None = None):
    """Citation-like graph plus (author, paper) ``likes`` links and ground truth."""
    spec = (spec or CitationSpec()).validate()
    base = gen_citation_like(spec)
    g, links = augment_with_paths(base, "author", "paper", spec.l_max, spec.d_max, spec.p_max,
                                  spec.n_links, spec.seed)
    if not links:
        raise GenerationError(f"no qualifying (author, paper) pairs in a graph of {base.num_edges} edges")
    return g, links


def ingest_tsv(edges_path, nodes_path=None) -> HeteroGraph:
    return read_tsv(edges_path, nodes_path)


# -- spec and ground-truth files -------------------------------------------------

def spec_to_text(spec) -> str:
    preset = next(k for k, v in PRESETS.items() if isinstance(spec, v))
    lines = [f"# seed={spec.seed}", f"preset={preset}"]
    lines += [f"{k}={v}" for k, v in asdict(spec).items()]
    return "\n".join(lines) + "\n"


def parse_key_values(text: str) -> dict:
    out = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {raw!r}", no)
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def spec_from_mapping(values: dict, preset: str | None = None):
    """Build a spec from string values; unknown keys raise ConfigError."""
    values = dict(values)
    preset = values.pop("preset", None) or preset or "useritemattr"
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cls = PRESETS[preset]
    types = {f.name: f.type for f in fields(cls)}
    kwargs = {}
    for k, v in values.items():
        if k not in types:
            raise ConfigError(f"{preset} spec has no field {k!r}")
        kwargs[k] = float(v) if "float" in str(types[k]) else int(v)
    return cls(**kwargs).validate()


def read_spec(path):
    return spec_from_mapping(parse_key_values(FsPath(path).read_text(encoding="utf-8")))


def _encode_path(g: HeteroGraph, p: GTPath) -> str:
    parts = ["{}:{}".format(*g.node_ref(p.nodes[0]))]
    for j, e in enumerate(p.edges):
        forward = g.edge_src[e] == p.nodes[j]
        parts.append(f"{p.edge_types[j]}>" if forward else f"<{p.edge_types[j]}")
        parts.append("{}:{}".format(*g.node_ref(p.nodes[j + 1])))
    return ",".join(parts)


def _decode_node(g, token, line_no):
    try:
        t, i = token.split(":")
        return g.index((t, int(i)))
    except (ValueError, LookupError):
        raise ParseError(f"bad node {token!r}", line_no) from None


def write_ground_truth(g: HeteroGraph, links, out, header=()):
    """One line per link: ``src  dst  l_max  d_max  p_max  path...`` (tab separated).

    A path is ``type:id,edge>,type:id,<edge,type:id``; ``>`` marks an edge
    traversed along its direction, ``<`` against it.
    """
    own = isinstance(out, (str, FsPath))
    fh = open(out, "w", encoding="utf-8", newline="\n") if own else out
    try:
        for line in header:
            fh.write(f"# {line}\n")
        for (s, t), gt in links:
            cols = ["{}:{}".format(*g.node_ref(s)), "{}:{}".format(*g.node_ref(t)),
                    str(gt.l_max), str(gt.d_max), str(gt.p_max)]
            cols += [_encode_path(g, p) for p in gt.paths]
            fh.write("\t".join(cols) + "\n")
    finally:
        if own:
            fh.close()


def read_ground_truth(g: HeteroGraph, path) -> list:
    _, deg = _allowed_and_degrees(g, (LINK_TYPE,))
    links = []
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 5:
                raise ParseError("expected src, dst, l_max, d_max, p_max and paths", no)
            s, t = _decode_node(g, cols[0], no), _decode_node(g, cols[1], no)
            try:
                l_max, d_max, p_max = (int(c) for c in cols[2:5])
            except ValueError:
                raise ParseError("l_max, d_max and p_max must be integers", no) from None
            paths = []
            for enc in cols[5:]:
                toks = enc.split(",")
                if len(toks) % 2 == 0:
                    raise ParseError(f"malformed path {enc!r}", no)
                nodes = [_decode_node(g, x, no) for x in toks[0::2]]
                types, edges = [], []
                for j, tok in enumerate(toks[1::2]):
                    fwd = tok.endswith(">")
                    r = tok.rstrip(">").lstrip("<")
                    a, b = (nodes[j], nodes[j + 1]) if fwd else (nodes[j + 1], nodes[j])
                    e = g.find_edge(a, b, r, either_direction=False)
                    if e < 0:
                        raise ParseError(f"edge {tok!r} of {enc!r} is not in the graph", no)
                    types.append(r)
                    edges.append(e)
                paths.append(GTPath(tuple(nodes), tuple(types), tuple(edges),
                                    int(sum(int(deg[v]) for v in nodes[1:-1]))))
            links.append(((s, t), GroundTruth((s, t), paths, l_max, d_max, p_max)))
    return links
