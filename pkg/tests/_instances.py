"""Random test instances shared by several test modules."""

import numpy as np

from markov_interdict import EvaderSpec, Graph, LeastCostGuided


def random_graph(rng, n, p=0.35, cost_range=(0.5, 2.0), ensure_target=0, evasion=False):
    """Random digraph in which every node can reach `ensure_target`.

    A random spanning in-tree towards the target guarantees access.
    """
    edges = set()
    order = rng.permutation([v for v in range(n) if v != ensure_target])
    attached = [ensure_target]
    for v in order:
        edges.add((int(v), int(rng.choice(attached))))
        attached.append(v)
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < p:
                edges.add((u, v))
    edges = sorted(edges)
    costs = rng.uniform(*cost_range, size=len(edges))
    if evasion:
        ys = rng.uniform(0.3, 1.0, size=len(edges))
        return Graph(n, [(u, v, c, y) for (u, v), c, y in zip(edges, costs, ys)])
    return Graph(n, [(u, v, c) for (u, v), c in zip(edges, costs)])


def random_dag(rng, n, p=0.4, cost_range=(0.5, 2.0)):
    """Random DAG with target 0 where every edge goes from a higher to a lower node."""
    edges = set()
    for v in range(1, n):
        edges.add((v, int(rng.integers(0, v))))
        for u in range(v):
            if rng.random() < p:
                edges.add((v, u))
    edges = sorted(edges)
    costs = rng.uniform(*cost_range, size=len(edges))
    return Graph(n, [(u, v, c) for (u, v), c in zip(edges, costs)])


def random_sources(rng, n, target, k=None):
    nodes = [v for v in range(n) if v != target]
    k = k or int(rng.integers(1, min(3, len(nodes)) + 1))
    chosen = rng.choice(nodes, size=k, replace=False)
    w = rng.uniform(0.2, 1.0, size=k)
    w /= w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return {int(v): float(x) for v, x in zip(chosen, w)}


def random_spec(rng, n, target=0, lam=None, model=None):
    if model is None:
        model = LeastCostGuided(float(rng.choice([0.0, 0.3, 1.0, 3.0])) if lam is None else lam)
    return EvaderSpec(random_sources(rng, n, target), target, model)
