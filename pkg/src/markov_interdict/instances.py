"""Instance generators: the four-path example network and random grids."""

from __future__ import annotations

import numpy as np

from .evaders import EvaderSpec, LeastCostGuided, Model
from .exceptions import GraphError
from .graph import Graph, check_target_access

#: Edges of the four-path example as (tail, head, cost).  Only the path
#: totals 9, 8, 8 (through nodes 1, 2, 3 and node 4) and 8.01 (direct) are
#: fixed; the split of each total over its edges is arbitrary.
FIG1_EDGES = [
    (0, 1, 5.0),
    (1, 4, 2.0),
    (0, 2, 3.0),
    (2, 4, 3.0),
    (0, 3, 3.0),
    (3, 4, 3.0),
    (4, 5, 2.0),
    (0, 5, 8.01),
]
FIG1_SOURCE = 0
FIG1_TARGET = 5


def gen_fig1_instance(model: Model | None = None) -> tuple[Graph, EvaderSpec]:
    """Six-node network where cutting the least-cost path's bottleneck backfires.

    Returns the graph and an evader starting at node 0 bound for node 5
    (uniform random walk unless `model` is given).
    """
    graph = Graph(6, FIG1_EDGES)
    spec = EvaderSpec({FIG1_SOURCE: 1.0}, FIG1_TARGET, model or LeastCostGuided(0.0))
    return graph, spec


def grid_node(r: int, c: int, cols: int) -> int:
    return r * cols + c


def gen_grid_instance(rows: int, cols: int, shortcuts: int = 0, weight_range=(0.5, 1.5), seed=None, max_tries: int = 10_000) -> Graph:
    """Directed lattice with arcs both ways between 4-neighbours plus shortcuts.

    Node ``(r, c)`` is ``r * cols + c``.  Shortcuts are directed arcs
    between distinct, uniformly random node pairs that are not already
    joined by an arc.  Every arc cost is uniform on `weight_range`.
    The lattice has ``2 * (rows*(cols-1) + cols*(rows-1))`` arcs.
    """
    if rows < 2 or cols < 2:
        raise GraphError("grid needs at least 2 rows and 2 columns")
    lo, hi = map(float, weight_range)
    if not 0 <= lo <= hi:
        raise GraphError(f"bad weight range {weight_range}")
    rng = np.random.default_rng(seed)
    n = rows * cols
    pairs = []
    for r in range(rows):
        for c in range(cols):
            u = grid_node(r, c, cols)
            if c + 1 < cols:
                v = grid_node(r, c + 1, cols)
                pairs += [(u, v), (v, u)]
            if r + 1 < rows:
                v = grid_node(r + 1, c, cols)
                pairs += [(u, v), (v, u)]
    taken = set(pairs)
    tries = 0
    added = 0
    while added < shortcuts:
        tries += 1
        if tries > max_tries:
            raise GraphError(f"could not place {shortcuts} shortcuts after {max_tries} draws")
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u == v or (u, v) in taken or (v, u) in taken:
            continue
        pairs.append((u, v))
        taken.add((u, v))
        added += 1
    costs = rng.uniform(lo, hi, size=len(pairs))
    return Graph(n, [(u, v, float(c)) for (u, v), c in zip(pairs, costs)])


def random_evaders(graph: Graph, n_evaders: int, n_sources: int, seed=None, model: Model | None = None) -> list[EvaderSpec]:
    """Evaders with distinct random targets, each with uniform random sources.

    Scenario weights are equal.  Sources are drawn among nodes that can
    reach the evader's target.
    """
    rng = np.random.default_rng(seed)
    n = graph.n_nodes
    if n_evaders > n:
        raise GraphError("more evaders than nodes")
    targets = rng.choice(n, size=n_evaders, replace=False)
    specs = []
    for t in targets.tolist():
        pool = [v for v in range(n) if v != t and check_target_access(graph, t, [v])]
        if len(pool) < n_sources:
            raise GraphError(f"target {t} is reachable from only {len(pool)} nodes")
        src = rng.choice(pool, size=n_sources, replace=False)
        specs.append(
            EvaderSpec(
                {int(s): 1.0 / n_sources for s in src},
                int(t),
                model or LeastCostGuided(0.0),
                1.0 / n_evaders,
            )
        )
    return specs
