"""Directed weighted graphs, interdiction plans and distances to a target.

Nodes are dense integers ``0..n-1``.  Edges are identified by their
``(tail, head)`` pair and also by their position in the edge list (the
*edge index*), which is what solvers use for deterministic tie-breaking.
"""

from __future__ import annotations

import heapq
import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .exceptions import GraphError
from .tolerances import TIE_RTOL

Edge = tuple[int, int]


class Graph:
    """Immutable directed graph with base edge costs.

    Parameters
    ----------
    n_nodes : int
        Number of nodes; nodes are ``0..n_nodes-1``.
    edges : iterable of tuple
        ``(tail, head, cost)`` or ``(tail, head, cost, evasion_prob)``.
        Either every edge carries an evasion probability or none does.
    """

    def __init__(self, n_nodes: int, edges: Iterable[tuple]):
        edges = list(edges)
        if n_nodes < 1:
            raise GraphError("a graph needs at least one node")
        self.n_nodes = int(n_nodes)

        tails, heads, costs, probs = [], [], [], []
        index: dict[Edge, int] = {}
        for k, rec in enumerate(edges):
            if len(rec) not in (3, 4):
                raise GraphError(f"edge {k}: expected (tail, head, cost[, evasion_prob])")
            u, v, c = int(rec[0]), int(rec[1]), float(rec[2])
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise GraphError(f"edge ({u}, {v}) references a node outside 0..{n_nodes - 1}")
            if (u, v) in index:
                raise GraphError(f"duplicate edge ({u}, {v})")
            if not math.isfinite(c) or c < 0:
                raise GraphError(f"edge ({u}, {v}) has invalid cost {c}")
            if u == v and c != 0:
                raise GraphError(f"self-loop ({u}, {u}) must have zero cost, got {c}")
            if len(rec) == 4 and rec[3] is not None:
                y = float(rec[3])
                if not 0 < y <= 1:
                    raise GraphError(f"edge ({u}, {v}) has evasion probability {y} outside (0, 1]")
                probs.append(y)
            index[(u, v)] = k
            tails.append(u)
            heads.append(v)
            costs.append(c)

        if probs and len(probs) != len(tails):
            raise GraphError("evasion probabilities must be given for all edges or none")

        self._index = index
        self.tails = np.array(tails, dtype=np.intp)
        self.heads = np.array(heads, dtype=np.intp)
        self.costs = np.array(costs, dtype=float)
        self.evasion = np.array(probs, dtype=float) if probs else None
        for arr in (self.tails, self.heads, self.costs):
            arr.flags.writeable = False
        if self.evasion is not None:
            self.evasion.flags.writeable = False

        out_adj: list[list[int]] = [[] for _ in range(n_nodes)]
        in_adj: list[list[int]] = [[] for _ in range(n_nodes)]
        for k, (u, v) in enumerate(zip(tails, heads)):
            out_adj[u].append(k)
            in_adj[v].append(k)
        self.out_edges = tuple(tuple(a) for a in out_adj)
        self.in_edges = tuple(tuple(a) for a in in_adj)

    def __repr__(self):
        return f"Graph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"

    @property
    def n_edges(self) -> int:
        return len(self.tails)

    @property
    def has_evasion(self) -> bool:
        return self.evasion is not None

    def edge(self, k: int) -> Edge:
        return int(self.tails[k]), int(self.heads[k])

    def edges(self) -> list[Edge]:
        return list(zip(self.tails.tolist(), self.heads.tolist()))

    def edge_id(self, edge: Edge) -> int:
        try:
            return self._index[(int(edge[0]), int(edge[1]))]
        except KeyError:
            raise GraphError(f"unknown edge {tuple(edge)}") from None

    def has_edge(self, edge: Edge) -> bool:
        return (int(edge[0]), int(edge[1])) in self._index

    def interdictable(self) -> list[int]:
        """Indices of edges that may be interdicted (everything but self-loops)."""
        return [k for k in range(self.n_edges) if self.tails[k] != self.heads[k]]

    def records(self) -> list[tuple]:
        if self.evasion is None:
            return [(int(u), int(v), float(c)) for u, v, c in zip(self.tails, self.heads, self.costs)]
        return [
            (int(u), int(v), float(c), float(y))
            for u, v, c, y in zip(self.tails, self.heads, self.costs, self.evasion)
        ]

    def without_edges(self, removed: Iterable[Edge]) -> "Graph":
        """Copy of the graph with the given edges deleted (node set unchanged)."""
        drop = {self.edge_id(e) for e in removed}
        recs = [r for k, r in enumerate(self.records()) if k not in drop]
        return Graph(self.n_nodes, recs)

    def with_evasion(self, probs) -> "Graph":
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (self.n_edges,):
            raise GraphError("need one evasion probability per edge")
        recs = [(u, v, c, y) for (u, v, c), y in zip(self.records_base(), probs)]
        return Graph(self.n_nodes, recs)

    def records_base(self) -> list[tuple[int, int, float]]:
        return [(int(u), int(v), float(c)) for u, v, c in zip(self.tails, self.heads, self.costs)]


@dataclass(frozen=True)
class InterdictionPlan:
    """A set of interdicted edges and how much each one's cost is raised.

    ``default_increment`` is applied to every interdicted edge that has no
    entry in ``increments``.  ``evasion_factor`` is the multiplier applied to
    the evasion probability of an interdicted edge in the least-risk model;
    when ``None`` the factor ``exp(-increment)`` is used.
    """

    interdicted: frozenset = field(default_factory=frozenset)
    default_increment: float = 0.0
    increments: Mapping[Edge, float] = field(default_factory=dict)
    budget: int | None = None
    evasion_factor: float | None = None

    def __post_init__(self):
        edges = frozenset((int(u), int(v)) for u, v in self.interdicted)
        object.__setattr__(self, "interdicted", edges)
        object.__setattr__(
            self, "increments", {(int(u), int(v)): float(d) for (u, v), d in self.increments.items()}
        )
        if not math.isfinite(self.default_increment) or self.default_increment < 0:
            raise GraphError(f"default increment must be finite and >= 0, got {self.default_increment}")
        for e, d in self.increments.items():
            if not math.isfinite(d) or d < 0:
                raise GraphError(f"increment for {e} must be finite and >= 0, got {d}")
        if self.budget is not None:
            if self.budget < 0:
                raise GraphError("budget must be nonnegative")
            if len(edges) > self.budget:
                raise GraphError(f"{len(edges)} interdicted edges exceed budget {self.budget}")
        if self.evasion_factor is not None and not 0 < self.evasion_factor <= 1:
            raise GraphError("evasion factor must lie in (0, 1]")
        for u, v in edges:
            if u == v:
                raise GraphError(f"self-loop ({u}, {v}) cannot be interdicted")

    def __contains__(self, edge) -> bool:
        return (int(edge[0]), int(edge[1])) in self.interdicted

    def __len__(self):
        return len(self.interdicted)

    def increment(self, edge: Edge) -> float:
        return self.increments.get((int(edge[0]), int(edge[1])), self.default_increment)

    def with_edges(self, edges: Iterable[Edge]) -> "InterdictionPlan":
        """Plan with `edges` added to the interdiction set (budget dropped)."""
        return InterdictionPlan(
            interdicted=self.interdicted | {(int(u), int(v)) for u, v in edges},
            default_increment=self.default_increment,
            increments=self.increments,
            budget=None,
            evasion_factor=self.evasion_factor,
        )

    def validate(self, graph: Graph) -> None:
        for e in self.interdicted:
            if not graph.has_edge(e):
                raise GraphError(f"interdicted edge {e} is not in the graph")

    def effective_costs(self, graph: Graph) -> np.ndarray:
        """Per-edge costs with the increments of interdicted edges added."""
        costs = np.array(graph.costs, dtype=float)
        for e in self.interdicted:
            costs[graph.edge_id(e)] += self.increment(e)
        return costs

    def effective_evasion(self, graph: Graph) -> np.ndarray:
        """Per-edge evasion probabilities, reduced on interdicted edges."""
        if graph.evasion is None:
            raise GraphError("graph carries no evasion probabilities")
        probs = np.array(graph.evasion, dtype=float)
        for e in self.interdicted:
            k = graph.edge_id(e)
            factor = self.evasion_factor
            if factor is None:
                factor = math.exp(-self.increment(e))
            probs[k] *= factor
        if np.any(probs <= 0):
            raise GraphError("interdiction drove an evasion probability to zero")
        return probs


NO_INTERDICTION = InterdictionPlan()


def effective_cost(graph: Graph, edge: Edge, plan: InterdictionPlan = NO_INTERDICTION) -> float:
    """Cost of traversing `edge` under `plan`."""
    k = graph.edge_id(edge)
    c = float(graph.costs[k])
    if edge in plan:
        c += plan.increment(edge)
    return c


@dataclass(frozen=True)
class DistanceField:
    """Least cost from every node to ``target``.

    ``dist`` holds ``inf`` for nodes that cannot reach the target and
    ``next_hop_count[i]`` is the number of out-edges of ``i`` that lie on
    some least-cost path.  ``settle_order`` lists reachable nodes in the
    order Dijkstra finalised them (nondecreasing distance, target first).
    """

    target: int
    dist: np.ndarray
    next_hop_count: np.ndarray
    settle_order: tuple[int, ...]

    def reachable(self, node: int) -> bool:
        return math.isfinite(self.dist[node])


def reverse_dijkstra(graph: Graph, target: int, costs) -> tuple[np.ndarray, list[int]]:
    """Single-target shortest path lengths by Dijkstra on the reversed graph.

    Returns the distance array and the settle order.
    """
    n = graph.n_nodes
    if not 0 <= target < n:
        raise GraphError(f"target {target} outside 0..{n - 1}")
    tails = graph.tails
    in_edges = graph.in_edges
    dist = [math.inf] * n
    dist[target] = 0.0
    done = [False] * n
    order = []
    heap = [(0.0, target)]
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        order.append(v)
        for k in in_edges[v]:
            u = tails[k]
            nd = d + costs[k]
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return np.array(dist), order


def tight_edges(graph: Graph, costs, dist, rtol: float = TIE_RTOL) -> np.ndarray:
    """Boolean mask of edges lying on some least-cost path to the target.

    Self-loops are never tight.
    """
    dt = dist[graph.tails]
    dh = dist[graph.heads]
    finite = np.isfinite(dt) & np.isfinite(dh)
    with np.errstate(invalid="ignore"):
        slack = np.where(finite, costs + dh - dt, np.inf)
        scale = np.maximum(1.0, np.abs(np.where(finite, dt, 0.0)))
    return finite & (np.abs(slack) <= rtol * scale) & (graph.tails != graph.heads)


def distances_to_target(
    graph: Graph, target: int, plan: InterdictionPlan = NO_INTERDICTION
) -> DistanceField:
    """Least effective cost from every node to `target`.

    Runs Dijkstra from the target over reversed edges; unreachable nodes
    get ``inf``.
    """
    costs = plan.effective_costs(graph)
    dist, order = reverse_dijkstra(graph, target, costs)
    tight = tight_edges(graph, costs, dist)
    hops = np.bincount(graph.tails[tight], minlength=graph.n_nodes)
    dist.flags.writeable = False
    hops.flags.writeable = False
    return DistanceField(target=target, dist=dist, next_hop_count=hops, settle_order=tuple(order))


def check_target_access(graph: Graph, target: int, sources: Iterable[int]) -> bool:
    """True iff every node in `sources` has a directed path to `target`."""
    seen = [False] * graph.n_nodes
    seen[target] = True
    queue = deque([target])
    while queue:
        v = queue.popleft()
        for k in graph.in_edges[v]:
            u = graph.tails[k]
            if not seen[u]:
                seen[u] = True
                queue.append(u)
    return all(seen[s] for s in sources)


# -- edge-list text format ----------------------------------------------------


def parse_edgelist(lines: Iterable[str], n_nodes: int | None = None) -> Graph:
    """Parse ``tail head cost [evasion_prob]`` lines; ``#`` starts a comment.

    The node count is one more than the largest index seen unless given.
    """
    recs = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise GraphError(f"line {lineno}: expected 'tail head cost [evasion_prob]'")
        try:
            rec = (int(parts[0]), int(parts[1]), *map(float, parts[2:]))
        except ValueError as exc:
            raise GraphError(f"line {lineno}: {exc}") from None
        recs.append(rec)
    if n_nodes is None:
        n_nodes = 1 + max((max(r[0], r[1]) for r in recs), default=-1)
    try:
        return Graph(n_nodes, recs)
    except GraphError as exc:
        raise GraphError(f"edge list: {exc}") from None


def read_edgelist(path: str | os.PathLike, n_nodes: int | None = None) -> Graph:
    with open(path) as fh:
        return parse_edgelist(fh, n_nodes)


def format_edgelist(graph: Graph) -> str:
    lines = [f"# {graph.n_nodes} nodes, {graph.n_edges} edges", "# tail head cost [evasion_prob]"]
    for rec in graph.records():
        lines.append(" ".join([str(rec[0]), str(rec[1])] + [repr(x) for x in rec[2:]]))
    return "\n".join(lines) + "\n"


def write_edgelist(graph: Graph, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(format_edgelist(graph))
