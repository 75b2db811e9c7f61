import warnings

import numpy as np
import pytest

from pagelink.datasets import SynthSpec, gen_useritemattr
from pagelink.hetgraph import build_graph


def simple_graph(edges, node_type="v", edge_type="e"):
    """Single-type graph from ``(u, v)`` integer pairs."""
    ids = sorted({x for e in edges for x in e})
    return build_graph([(node_type, i) for i in ids],
                       [(node_type, u, edge_type, node_type, v) for u, v in edges])


@pytest.fixture
def ego_fixture():
    """Users, items and two attribute families wired so that the 2-hop ego-graph of
    (user 1, item 1) leaves out user 3 and attr1 3, and its 2-core then drops
    item 5 and both attr2 nodes."""
    nodes = ([("user", i) for i in (1, 2, 3)] + [("item", i) for i in range(1, 6)]
             + [("attr1", i) for i in (1, 2, 3)] + [("attr2", i) for i in (1, 2)])
    buys = [(1, 2), (1, 3), (1, 5), (2, 1), (2, 2), (2, 4), (3, 4)]
    has1 = [(1, 1), (2, 1), (3, 2), (1, 2), (4, 2), (4, 3)]
    has2 = [(1, 1), (5, 2)]
    edges = ([("user", u, "buys", "item", i) for u, i in buys]
             + [("item", i, "has1", "attr1", a) for i, a in has1]
             + [("item", i, "has2", "attr2", a) for i, a in has2])
    return build_graph(nodes, edges)


@pytest.fixture
def two_route_graph():
    """User 1 and item 1 joined by two quiet 3-hop routes (via user 2, via attr 1)
    and a third through attr 2, which many items carry."""
    nodes = [("user", i) for i in (1, 2)] + [("item", i) for i in range(1, 9)] + [("attr", i) for i in (1, 2, 3)]
    edges = [("user", 1, "buys", "item", 2), ("user", 2, "buys", "item", 2), ("user", 2, "buys", "item", 1),
             ("user", 1, "buys", "item", 3), ("item", 3, "has", "attr", 1), ("item", 1, "has", "attr", 1),
             ("user", 1, "buys", "item", 4), ("item", 4, "has", "attr", 2), ("item", 1, "has", "attr", 2),
             ("item", 1, "has", "attr", 3)]
    # items 5-8 keep attr 2 busy inside the 2-core
    edges += [("item", i, "has", "attr", a) for i in range(5, 9) for a in (2, 3)]
    return build_graph(nodes, edges)


@pytest.fixture(scope="session")
def small_synth():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return gen_useritemattr(SynthSpec(n_links=120, seed=3))


@pytest.fixture(scope="session")
def trained_small(small_synth):
    from pagelink.rgcn import RGCNLinkPredictor
    g, links = small_synth
    return RGCNLinkPredictor(epochs=150, hidden=16, random_state=3).fit(g, "likes")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
