"""Input checking helpers shared by the estimators."""
from __future__ import annotations

import numbers
import re

import numpy as np

from .exceptions import ConfigError, NodeNotFoundError
from .hetgraph import HeteroGraph


def check_random_state(seed) -> np.random.Generator:
    """``numpy.random.Generator`` from an int, None or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, numbers.Integral):
        return np.random.default_rng(seed)
    raise ConfigError(f"{seed!r} cannot seed a random generator")


def check_pair(g: HeteroGraph, pair) -> tuple:
    """Resolve a pair of node refs/indices to distinct global indices."""
    if isinstance(pair, str):
        pair = parse_pair(g, pair)
    if len(pair) != 2:
        raise ConfigError(f"a pair needs two nodes, got {pair!r}")
    s, t = g.index(pair[0]), g.index(pair[1])
    if s == t:
        raise ConfigError("source and target must differ")
    return s, t


def check_pairs(g: HeteroGraph, pairs) -> np.ndarray:
    """``(n, 2)`` int array of global indices."""
    arr = np.asarray(pairs)
    if arr.dtype.kind in "iu" and arr.ndim == 2 and arr.shape[1] == 2:
        if arr.size and (arr.min() < 0 or arr.max() >= g.num_nodes):
            raise NodeNotFoundError("pair index out of range")
        return arr.astype(np.int64)
    return np.array([check_pair(g, p) for p in pairs], dtype=np.int64).reshape(-1, 2)


_TOKEN = re.compile(r"^([A-Za-z_][A-Za-z_\-]*?)[.:/=]?(\d+)$")


def parse_node(g: HeteroGraph, token: str) -> int:
    """Resolve ``user3``, ``u3``, ``user.3`` or ``user/3`` to a node index.

    The alphabetic part is matched against node type names exactly first,
    then as a unique prefix.
    """
    m = _TOKEN.match(token.strip())
    if not m:
        raise NodeNotFoundError(f"cannot parse node {token!r}")
    name, num = m.group(1), int(m.group(2))
    if name in g.node_types:
        return g.index((name, num))
    hits = [t for t in g.node_types if t.startswith(name)]
    if len(hits) != 1:
        raise NodeNotFoundError(f"node type prefix {name!r} matches {hits or 'nothing'}")
    return g.index((hits[0], num))


def parse_pair(g: HeteroGraph, text: str) -> tuple:
    """Parse ``"u3:i12"`` or ``"user.3,item.12"``."""
    sep = "," if "," in text else ":"
    parts = text.split(sep)
    if len(parts) != 2:
        raise NodeNotFoundError(f"cannot parse pair {text!r}")
    return parse_node(g, parts[0]), parse_node(g, parts[1])
