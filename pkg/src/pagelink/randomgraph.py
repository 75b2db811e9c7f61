"""Random-graph checks: s-t path counts versus subgraph counts, and k-core sizes.

On G(n, m) with density d, the expected number of simple paths between two
fixed nodes is close to ``(n-2)! d^(n-1) e`` while the number of
edge-induced subgraphs is ``2^m``. The k-core of a sparse random graph with
mean degree ``c = d n`` keeps a node fraction ``psi_k(mu)`` and an edge
fraction ``mu^2 / (d^2 n (n-1))``, where ``mu`` is the larger root of
``mu / psi_{k-1}(mu) = c`` and ``psi_j(mu) = P(Poisson(mu) >= j)``. The
core is empty w.h.p. when ``c`` is below ``c_k = min mu / psi_{k-1}(mu)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .corepruner import kcore_prune
from .exceptions import NumericalError, SizeError, SpecError
from .hetgraph import HeteroGraph, build_graph

MAX_EXACT_NODES = 14


@dataclass
class RandomGraphSpec:
    n: int
    d: float
    seed: int = 0
    trials: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise SpecError("need n >= 2")
        if not 0.0 < self.d <= 1.0:
            raise SpecError(f"density must lie in (0, 1], got {self.d}")
        if self.trials < 1:
            raise SpecError("trials must be >= 1")

    @property
    def pairs(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def m(self) -> int:
        return int(round(self.d * self.pairs))


def _unrank_pairs(idx: np.ndarray, n: int):
    """Map ranks in ``[0, C(n,2))`` to pairs ``i < j`` in row-major order."""
    idx = np.asarray(idx, dtype=np.int64)
    # row i starts at rank i*n - i*(i+1)/2; solve for the largest such i
    i = np.floor((2 * n - 1 - np.sqrt((2 * n - 1) ** 2 - 8.0 * idx)) / 2).astype(np.int64)
    start = i * n - i * (i + 1) // 2
    # guard against floating-point misplacement at row boundaries
    over = idx < start
    i[over] -= 1
    start = i * n - i * (i + 1) // 2
    nxt = (i + 1) * n - (i + 1) * (i + 2) // 2
    under = idx >= nxt
    i[under] += 1
    start = i * n - i * (i + 1) // 2
    j = idx - start + i + 1
    return i, j


def gen_random_graph(spec: RandomGraphSpec, seed=None) -> HeteroGraph:
    """``m`` distinct node pairs drawn uniformly without replacement."""
    m = spec.m
    if m > spec.pairs:
        raise SpecError(f"m={m} exceeds the {spec.pairs} available pairs")
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    ranks = np.sort(rng.choice(spec.pairs, size=m, replace=False)) if m else np.zeros(0, np.int64)
    i, j = _unrank_pairs(ranks, spec.n)
    nodes = [("v", k) for k in range(spec.n)]
    edges = [("v", a, "e", "v", b) for a, b in zip(i.tolist(), j.tolist())]
    return build_graph(nodes, edges, edge_types=("e",))


def count_paths_exact(g: HeteroGraph, s, t, l_cap: int | None = None) -> int:
    """Number of simple s-t paths (with at most ``l_cap`` hops if given)."""
    if g.num_nodes > MAX_EXACT_NODES:
        raise SizeError(f"exact path counting is limited to {MAX_EXACT_NODES} nodes")
    si, ti = g.index(s), g.index(t)
    cap = g.num_nodes - 1 if l_cap is None else l_cap
    nbrs = [sorted(set(g.neighbors(v)[0].tolist())) for v in range(g.num_nodes)]
    on_path = [False] * g.num_nodes

    def dfs(v, depth):
        if v == ti:
            return 1
        if depth == cap:
            return 0
        on_path[v] = True
        total = 0
        for u in nbrs[v]:
            if not on_path[u]:
                total += dfs(u, depth + 1)
        on_path[v] = False
        return total

    return dfs(si, 0) if si != ti else 1


def subgraph_count(spec) -> int:
    """``2 ** m`` edge-induced subgraphs (``spec`` may be a spec or an edge count)."""
    m = spec.m if isinstance(spec, RandomGraphSpec) else int(spec)
    return 2 ** m


def path_count_formula(n: int, d: float) -> float:
    return math.factorial(n - 2) * d ** (n - 1) * math.e


def poisson_tail(k: int, mu):
    """``P(Poisson(mu) >= k)`` via the regularized lower incomplete gamma function."""
    if k <= 0:
        return np.ones_like(np.asarray(mu, dtype=float))
    return special.gammainc(k, mu)


def core_threshold(k: int):
    """``(c_k, argmin)`` of ``mu / psi_{k-1}(mu)`` over ``mu > 0``."""
    f = lambda mu: mu / poisson_tail(k - 1, mu)
    hi = 10.0 * k + 10.0
    res = optimize.minimize_scalar(f, bounds=(1e-9, hi), method="bounded",
                                   options={"xatol": 1e-12, "maxiter": 1000})
    if not res.success:
        raise NumericalError(f"could not locate the core threshold for k={k}")
    return float(res.fun), float(res.x)


def core_fraction_theory(n: int, d: float, k: int):
    """Predicted ``(node fraction, edge fraction)`` of the k-core, or None if empty.

    The edge fraction is clipped to 1 (it can exceed 1 by O(1/n) at small n).
    """
    if k < 2:
        raise SpecError("core fractions are defined for k >= 2")
    c = d * n
    c_k, arg = core_threshold(k)
    if c <= c_k:
        return None
    f = lambda mu: mu / poisson_tail(k - 1, mu) - c
    lo, hi = arg, 2.0 * c
    try:
        mu, info = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps,
                                   maxiter=500, full_output=True)
    except ValueError as exc:
        raise NumericalError(f"no root bracketed on [{lo}, {hi}]: {exc}") from None
    if not info.converged or abs(f(mu)) > 1e-8:
        raise NumericalError(f"root search did not converge (residual {f(mu):.3g})")
    dv = float(poisson_tail(k, mu))
    de = min(1.0, float(mu * mu / (d * d * n * (n - 1))))
    return dv, de


def empirical_core_fraction(g: HeteroGraph, k: int):
    core = kcore_prune(g, k, protected=())
    return core.num_nodes / g.num_nodes, (core.num_edges / g.num_edges if g.num_edges else 0.0)


@dataclass
class TheoryReport:
    density: float
    path_rows: list = field(default_factory=list)   # (n, trials, Z_exact, Z_formula, S_exact)
    complete_check: tuple = ()                       # (n, Z_exact, closed form)
    core_rows: list = field(default_factory=list)    # (n, avg degree, k, dV_emp, dE_emp, dV, dE, c_k)

    @property
    def ratios(self) -> list:
        return [z / zf for _, _, z, zf, _ in self.path_rows]

    @property
    def log_ratios(self) -> list:
        return [math.log(z) / math.log(s) for _, _, z, _, s in self.path_rows]

    def ratio_within(self, lo=0.5, hi=2.0) -> bool:
        return all(lo <= r <= hi for r in self.ratios)

    def ratio_improving(self) -> bool:
        dev = [abs(math.log(r)) for r in self.ratios]
        return all(b <= a for a, b in zip(dev, dev[1:]))

    def log_ratio_decreasing(self) -> bool:
        lr = self.log_ratios
        return all(b < a for a, b in zip(lr, lr[1:]))

    def cores_within(self, tol=0.03) -> bool:
        return all(abs(r[3] - r[5]) <= tol and abs(r[4] - r[6]) <= tol
                   for r in self.core_rows if r[5] is not None)

    def to_tsv(self) -> str:
        lines = ["# path counts", "n\ttrials\tZ_exact\tZ_formula\tS_exact\tZ_ratio\tlogZ_over_logS"]
        for row, r, lr in zip(self.path_rows, self.ratios, self.log_ratios):
            n, trials, z, zf, s = row
            lines.append(f"{n}\t{trials}\t{z:.6g}\t{zf:.6g}\t{s}\t{r:.4f}\t{lr:.4f}")
        if self.complete_check:
            n, z, closed = self.complete_check
            lines.append(f"# complete graph K{n}: paths={z} closed_form={closed}")
        lines += ["# k-core fractions", "n\tavg_degree\tk\tdelta_V_emp\tdelta_E_emp\tdelta_V\tdelta_E\tc_k"]
        for n, c, k, ve, ee, vt, et, ck in self.core_rows:
            fmt = lambda x: "empty" if x is None else f"{x:.4f}"
            lines.append(f"{n}\t{c:g}\t{k}\t{ve:.4f}\t{ee:.4f}\t{fmt(vt)}\t{fmt(et)}\t{ck:.4f}")
        lines.append(f"# checks: ratio_within={self.ratio_within()} ratio_improving={self.ratio_improving()} "
                     f"log_ratio_decreasing={self.log_ratio_decreasing()} cores_within={self.cores_within()}")
        return "\n".join(lines) + "\n"


def mean_path_count(n: int, d: float, trials: int, seed=0) -> float:
    total = 0
    for i in range(trials):
        g = gen_random_graph(RandomGraphSpec(n, d, seed=seed * 1_000_003 + i))
        total += count_paths_exact(g, ("v", 0), ("v", 1))
    return total / trials


def complete_graph_paths(n: int) -> int:
    return sum(math.perm(n - 2, j) for j in range(n - 1))


def verify_theory(n_values=range(6, 13), d: float = 0.5, trials: int = 200, ks=(5,),
                  core_n: int = 10_000, avg_degrees=(7.0,), seed=0) -> TheoryReport:
    """Path/subgraph series at small n and k-core fractions at ``core_n`` nodes."""
    rep = TheoryReport(d)
    for n in n_values:
        spec = RandomGraphSpec(n, d)
        z = mean_path_count(n, d, trials, seed)
        rep.path_rows.append((n, trials, z, path_count_formula(n, d), subgraph_count(spec)))
    k6 = gen_random_graph(RandomGraphSpec(6, 1.0))
    rep.complete_check = (6, count_paths_exact(k6, ("v", 0), ("v", 1)), complete_graph_paths(6))
    for c in avg_degrees:
        dens = c / (core_n - 1)
        g = gen_random_graph(RandomGraphSpec(core_n, dens, seed=seed))
        for k in ks:
            ve, ee = empirical_core_fraction(g, k)
            theory = core_fraction_theory(core_n, dens, k)
            vt, et = theory if theory is not None else (None, None)
            rep.core_rows.append((core_n, c, k, ve, ee, vt, et, core_threshold(k)[0]))
    return rep
