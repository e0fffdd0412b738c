"""Independent checks of the closed-form evaluation.

Two routes that never touch ``(I - M_hat)^-1``: explicit enumeration of
the walks an evader can take, and Monte Carlo simulation of walks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .evaders import AbsorbingChain
from .exceptions import ChainError, EnumerationLimitError
from .graph import NO_INTERDICTION, Graph, InterdictionPlan
from .tolerances import MASS_FLOOR


@dataclass(frozen=True)
class PathEnsemble:
    """Walks ending at the target, each as ``(nodes, probability, cost)``."""

    paths: list

    @property
    def total_mass(self) -> float:
        return math.fsum(p for _, p, _ in self.paths)

    def __len__(self):
        return len(self.paths)


def _is_acyclic(M: np.ndarray) -> bool:
    m = len(M)
    indeg = (M > 0).sum(axis=0)
    stack = list(np.flatnonzero(indeg == 0))
    seen = 0
    while stack:
        i = stack.pop()
        seen += 1
        for j in np.flatnonzero(M[i] > 0):
            indeg[j] -= 1
            if indeg[j] == 0:
                stack.append(j)
    return seen == m


def enumerate_paths(chain: AbsorbingChain, start, mass_floor: float = MASS_FLOOR, max_paths: int = 1_000_000) -> PathEnsemble:
    """Every walk from the start support to the target with its probability.

    On acyclic chains the enumeration is complete and `mass_floor` is
    ignored.  On cyclic chains branches whose probability falls below
    `mass_floor` are dropped, so the ensemble's total mass falls short of
    one by at most the pruned mass.
    """
    a = chain.start_vector(start)
    M, R = chain.transient, chain.absorb
    C, S = chain.transient_costs, chain.absorb_costs
    nodes = chain.ordering.tolist()
    target = chain.target
    floor = 0.0 if _is_acyclic(M) else mass_floor
    succ = [np.flatnonzero(M[i] > 0).tolist() for i in range(len(a))]

    paths = []
    stack = [(int(i), float(a[i]), 0.0, (nodes[i],)) for i in np.flatnonzero(a > 0)[::-1]]
    while stack:
        i, p, c, walk = stack.pop()
        if R[i] > 0:
            paths.append((walk + (target,), p * R[i], c + S[i]))
            if len(paths) > max_paths:
                raise EnumerationLimitError(f"more than {max_paths} paths", len(paths))
        for j in reversed(succ[i]):
            q = p * M[i, j]
            if q < floor:
                continue
            stack.append((j, q, c + C[i, j], walk + (nodes[j],)))
    return PathEnsemble(paths)


def oracle_expected_cost(ensemble: PathEnsemble, renormalize: bool = False) -> float:
    """``sum_p P(p) c(p)``; divide by the captured mass when `renormalize`."""
    if not ensemble.paths:
        raise ValueError("empty path ensemble")
    value = math.fsum(p * c for _, p, c in ensemble.paths)
    if renormalize:
        value /= ensemble.total_mass
    return value


def simple_path_ensemble(graph: Graph, source: int, target: int, plan: InterdictionPlan = NO_INTERDICTION, max_paths: int = 1_000_000) -> PathEnsemble:
    """All simple source-target paths, each with equal probability.

    This is the "evader picks any path with equal probability" model used
    to motivate stochastic interdiction; it does not go through a chain.
    """
    costs = plan.effective_costs(graph)
    found = []

    def dfs(v, walk, cost, on_path):
        if v == target:
            found.append((tuple(walk), cost))
            if len(found) > max_paths:
                raise EnumerationLimitError(f"more than {max_paths} simple paths", len(found))
            return
        for k in graph.out_edges[v]:
            w = int(graph.heads[k])
            if w in on_path:
                continue
            on_path.add(w)
            walk.append(w)
            dfs(w, walk, cost + costs[k], on_path)
            walk.pop()
            on_path.discard(w)

    dfs(source, [source], 0.0, {source})
    if not found:
        return PathEnsemble([])
    p = 1.0 / len(found)
    return PathEnsemble([(w, p, c) for w, c in found])


@dataclass(frozen=True)
class WalkStats:
    mean_cost: float
    stderr: float
    edge_visits: dict
    edge_stderr: dict
    completed: int
    censored: int


def simulate_walks(chain: AbsorbingChain, start, walks: int, seed, step_cap: int | None = None) -> WalkStats:
    """Monte Carlo estimate of expected cost and edge traversals.

    Walks still running after `step_cap` steps (default ``100 * n``) are
    censored: they are excluded from every estimate and only counted.
    """
    if walks < 1:
        raise ValueError("need at least one walk")
    rng = np.random.default_rng(seed)
    a = chain.start_vector(start)
    m = chain.n_transient
    K = m + 1
    if step_cap is None:
        step_cap = 100 * chain.n_nodes
    P = np.zeros((m, K))
    P[:, :m] = chain.transient
    P[:, m] = chain.absorb
    cum = np.cumsum(P, axis=1)
    # rounding must never select a zero-probability transition
    last = K - 1 - np.argmax(P[:, ::-1] > 0, axis=1)
    for i in range(m):
        cum[i, last[i]:] = np.inf
    Cost = np.zeros((m, K))
    Cost[:, :m] = chain.transient_costs
    Cost[:, m] = chain.absorb_costs

    chunk = int(max(1, min(20_000, 4_000_000 // (m * K))))
    n_done = 0
    n_cens = 0
    sum_c = sum_c2 = 0.0
    sum_f = np.zeros(m * K)
    sum_f2 = np.zeros(m * K)
    p_start = a / a.sum()
    remaining = walks
    while remaining:
        w = min(chunk, remaining)
        remaining -= w
        state = rng.choice(m, size=w, p=p_start)
        cost = np.zeros(w)
        alive = np.arange(w)
        idx_log, code_log = [], []
        steps = 0
        while len(alive) and steps < step_cap:
            s = state[alive]
            u = 1.0 - rng.random(len(alive))
            nxt = (cum[s] < u[:, None]).sum(axis=1)
            cost[alive] += Cost[s, nxt]
            idx_log.append(alive)
            code_log.append(s * K + nxt)
            state[alive] = nxt
            alive = alive[nxt != m]
            steps += 1
        ok = np.ones(w, dtype=bool)
        ok[alive] = False
        n_cens += len(alive)
        n_done += int(ok.sum())
        sum_c += cost[ok].sum()
        sum_c2 += (cost[ok] ** 2).sum()
        if idx_log:
            idx = np.concatenate(idx_log)
            code = np.concatenate(code_log)
            keep = ok[idx]
            per_walk = np.bincount(idx[keep] * (m * K) + code[keep], minlength=w * m * K)
            per_walk = per_walk.reshape(w, m * K)
            sum_f += per_walk.sum(axis=0)
            sum_f2 += (per_walk.astype(float) ** 2).sum(axis=0)

    if n_done == 0:
        raise ChainError("every walk was censored; is the target accessible?")
    mean = sum_c / n_done
    var = max(sum_c2 / n_done - mean**2, 0.0) * n_done / max(n_done - 1, 1)
    f_mean = sum_f / n_done
    f_var = np.maximum(sum_f2 / n_done - f_mean**2, 0.0) * n_done / max(n_done - 1, 1)
    f_err = np.sqrt(f_var / n_done)

    nodes = chain.ordering
    F, Ferr = {}, {}
    for code in np.flatnonzero(P.ravel() > 0):
        i, j = divmod(int(code), K)
        key = (int(nodes[i]), int(nodes[j]))
        F[key] = float(f_mean[code])
        Ferr[key] = float(f_err[code])
    return WalkStats(mean, math.sqrt(var / n_done), F, Ferr, n_done, n_cens)
