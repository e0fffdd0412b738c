"""Evader models and the absorbing Markov chains they induce.

Every model turns the graph, an interdiction plan and a few parameters
into an :class:`AbsorbingChain` in canonical form::

    M = | M_hat  R |        C = | C_hat  S |
        |   0    1 |            |   -    0 |

Only nodes that can reach the evader's target are states of the chain;
everything else can never be entered and is left out.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .exceptions import ChainError, ModelError
from .graph import (
    NO_INTERDICTION,
    DistanceField,
    Graph,
    InterdictionPlan,
    distances_to_target,
    reverse_dijkstra,
)
from .tolerances import PROB_SUM_ATOL, TIE_RTOL


@dataclass(frozen=True)
class LeastCostGuided:
    """Prefers neighbours whose continuation to the target is cheap.

    The weight of edge ``(i, j)`` is ``exp(-lam * excess)`` where
    ``excess = C_ij + dist(j) - dist(i) >= 0`` is how much worse than
    optimal it is to continue through ``j``.  ``lam = 0`` is a uniform
    random walk, ``lam = inf`` follows least-cost paths only.
    """

    lam: float

    def __post_init__(self):
        if math.isnan(self.lam) or self.lam < 0:
            raise ModelError(f"least-cost model needs lambda >= 0, got {self.lam}")


@dataclass(frozen=True)
class LeastRiskGuided:
    """Prefers neighbours whose best continuation is least likely to be caught.

    ``M_ij`` is proportional to ``(q_ij / q_i*) ** lam`` with ``q_ij`` the
    evasion probability of edge ``(i, j)`` followed by the safest path from
    ``j`` and ``q_i*`` the best such value at ``i``.
    """

    lam: float

    def __post_init__(self):
        if math.isnan(self.lam) or self.lam <= 0:
            raise ModelError(f"least-risk model needs lambda > 0, got {self.lam}")


@dataclass(frozen=True)
class NonRetreating:
    """Wraps a guided model; the evader only steps to strictly closer nodes."""

    inner: Union[LeastCostGuided, LeastRiskGuided]

    def __post_init__(self):
        if not isinstance(self.inner, (LeastCostGuided, LeastRiskGuided)):
            raise ModelError("non-retreating model wraps a least-cost or least-risk model")


Model = Union[LeastCostGuided, LeastRiskGuided, NonRetreating]


@dataclass(frozen=True)
class EvaderSpec:
    """One evader (threat scenario).

    ``sources`` maps start node to probability; it must not put mass on the
    target.  ``weight`` is the probability of this scenario among all
    evaders of a problem.
    """

    sources: Mapping[int, float]
    target: int
    model: Model = field(default_factory=lambda: LeastCostGuided(0.0))
    weight: float = 1.0

    def __post_init__(self):
        src = {int(k): float(v) for k, v in dict(self.sources).items() if float(v) != 0.0}
        object.__setattr__(self, "sources", src)
        if not src:
            raise ModelError("evader needs at least one source with positive probability")
        if any(p < 0 for p in src.values()):
            raise ModelError("source probabilities must be nonnegative")
        if self.target in src:
            raise ModelError(f"target {self.target} cannot carry start probability")
        if abs(sum(src.values()) - 1.0) > PROB_SUM_ATOL:
            raise ModelError(f"source probabilities sum to {sum(src.values())!r}, not 1")
        if not 0 <= self.weight <= 1:
            raise ModelError(f"scenario weight {self.weight} outside [0, 1]")

    def start_vector(self, n_nodes: int) -> np.ndarray:
        a = np.zeros(n_nodes)
        for node, p in self.sources.items():
            if not 0 <= node < n_nodes:
                raise ModelError(f"source {node} outside 0..{n_nodes - 1}")
            a[node] = p
        return a

    def with_model(self, model: Model) -> "EvaderSpec":
        return EvaderSpec(self.sources, self.target, model, self.weight)

    def with_lambda(self, lam: float) -> "EvaderSpec":
        return self.with_model(_replace_lambda(self.model, lam))


def _replace_lambda(model: Model, lam: float) -> Model:
    if isinstance(model, NonRetreating):
        return NonRetreating(_replace_lambda(model.inner, lam))
    return type(model)(lam)


def model_lambda(model: Model) -> float:
    return model.inner.lam if isinstance(model, NonRetreating) else model.lam


@dataclass(frozen=True, eq=False)
class AbsorbingChain:
    """Canonical-form absorbing chain together with its edge costs.

    Transient state ``k`` is graph node ``ordering[k]``; the last entry of
    ``ordering`` is the target.  When ``triangular`` is set the transient
    block is strictly lower triangular, i.e. states are ranked by distance
    to the target and every step moves to a lower-ranked state.
    """

    ordering: np.ndarray
    transient: np.ndarray
    absorb: np.ndarray
    transient_costs: np.ndarray
    absorb_costs: np.ndarray
    n_nodes: int
    triangular: bool = False

    def __post_init__(self):
        m = len(self.ordering) - 1
        if self.transient.shape != (m, m) or self.transient_costs.shape != (m, m):
            raise ChainError("transient blocks must be square with one row per non-target state")
        if self.absorb.shape != (m,) or self.absorb_costs.shape != (m,):
            raise ChainError("absorbing column has the wrong length")
        for arr in (self.ordering, self.transient, self.absorb, self.transient_costs, self.absorb_costs):
            arr.flags.writeable = False

    @classmethod
    def from_matrices(cls, transient, absorb, transient_costs=None, absorb_costs=None, triangular=None):
        """Chain over nodes ``0..m`` with the target as node ``m``.

        Costs default to one for every possible transition.
        """
        M = np.array(transient, dtype=float)
        R = np.array(absorb, dtype=float)
        m = len(R)
        C = np.ones((m, m)) if transient_costs is None else np.array(transient_costs, dtype=float)
        S = np.ones(m) if absorb_costs is None else np.array(absorb_costs, dtype=float)
        if triangular is None:
            triangular = bool(np.all(np.triu(M) == 0))
        return cls(np.arange(m + 1), M, R, C, S, m + 1, triangular)

    @property
    def target(self) -> int:
        return int(self.ordering[-1])

    @property
    def n_transient(self) -> int:
        return len(self.ordering) - 1

    def state_of(self, node: int) -> int | None:
        hits = np.flatnonzero(self.ordering[:-1] == node)
        return int(hits[0]) if len(hits) else None

    def start_vector(self, start) -> np.ndarray:
        """Map a start distribution onto transient states.

        `start` may be an :class:`EvaderSpec`, a ``{node: prob}`` mapping, a
        node-indexed vector of length ``n_nodes`` or a state-indexed vector
        of length ``n_transient``.
        """
        m = self.n_transient
        if isinstance(start, EvaderSpec):
            start = start.sources
        if isinstance(start, Mapping):
            a = np.zeros(m)
            for node, p in start.items():
                if p == 0:
                    continue
                k = self.state_of(node)
                if k is None:
                    if node == self.target:
                        raise ChainError("start distribution puts mass on the target")
                    raise ChainError(f"start node {node} cannot reach the target")
                a[k] += p
            return a
        start = np.asarray(start, dtype=float)
        if start.shape == (m,) and m != self.n_nodes:
            return start.copy()
        if start.shape == (self.n_nodes,):
            mass_in = start[self.ordering[:-1]].sum()
            if start[self.target] != 0 or abs(mass_in - start.sum()) > PROB_SUM_ATOL:
                raise ChainError("start distribution has mass outside the transient states")
            return start[self.ordering[:-1]].copy()
        raise ChainError(f"start vector of shape {start.shape} matches neither states nor nodes")

    def full_matrix(self) -> np.ndarray:
        """``(m+1) x (m+1)`` transition matrix with the target last."""
        m = self.n_transient
        P = np.zeros((m + 1, m + 1))
        P[:m, :m] = self.transient
        P[:m, m] = self.absorb
        P[m, m] = 1.0
        return P

    def row_sums(self) -> np.ndarray:
        return self.transient.sum(axis=1) + self.absorb

    def can_absorb(self) -> np.ndarray:
        """Per state, whether absorption has positive probability."""
        m = self.n_transient
        ok = self.absorb > 0
        preds = [np.flatnonzero(self.transient[:, j] > 0) for j in range(m)]
        queue = deque(np.flatnonzero(ok).tolist())
        while queue:
            j = queue.popleft()
            for i in preds[j]:
                if not ok[i]:
                    ok[i] = True
                    queue.append(i)
        return ok

    def validate(self, atol: float = PROB_SUM_ATOL) -> None:
        if np.any(self.transient < 0) or np.any(self.absorb < 0):
            raise ChainError("negative transition probability")
        bad = np.flatnonzero(np.abs(self.row_sums() - 1) > atol)
        if len(bad):
            raise ChainError(f"rows {bad.tolist()} do not sum to one")
        stuck = np.flatnonzero(~self.can_absorb())
        if len(stuck):
            nodes = self.ordering[stuck].tolist()
            raise ChainError(f"nodes {nodes} never reach the target (access condition violated)")
        if self.triangular and np.any(np.triu(self.transient) != 0):
            raise ChainError("chain flagged triangular but has entries on or above the diagonal")


def _guided_probs(graph: Graph, target: int, route_costs: np.ndarray, lam: float):
    """Per-edge transition probabilities of a guided walk.

    Edge weights decay as ``exp(-lam * excess)`` in the excess of
    `route_costs` over the optimal continuation; weights are taken relative
    to each row's best edge so the best edge always has weight one.
    Returns ``(probs, dist)`` with `dist` the route-cost distances.
    """
    dist, _ = reverse_dijkstra(graph, target, route_costs)
    tails, heads = graph.tails, graph.heads
    n = graph.n_nodes
    active = (tails != target) & np.isfinite(dist[tails]) & np.isfinite(dist[heads])
    t_act = tails[active]
    excess = route_costs[active] + dist[heads[active]] - dist[t_act]
    best = np.full(n, np.inf)
    np.minimum.at(best, t_act, excess)
    rel = excess - best[t_act]
    if math.isinf(lam):
        scale = np.maximum(1.0, np.abs(dist[t_act]))
        w = (rel <= TIE_RTOL * scale).astype(float)
    else:
        w = np.exp(-lam * rel)
    norm = np.bincount(t_act, weights=w, minlength=n)
    probs = np.zeros(graph.n_edges)
    probs[active] = w / norm[t_act]
    return probs, dist


def _assemble(graph: Graph, target: int, probs, costs, states: np.ndarray, triangular=False) -> AbsorbingChain:
    """Scatter per-edge probabilities and costs into canonical blocks."""
    m = len(states)
    pos = np.full(graph.n_nodes, -1, dtype=np.intp)
    pos[states] = np.arange(m)
    pos[target] = m
    used = (probs > 0) & (graph.tails != target)
    rows = pos[graph.tails[used]]
    cols = pos[graph.heads[used]]
    if np.any(rows < 0) or np.any(cols < 0):
        raise ModelError("transition into a node that cannot reach the target")
    P = np.zeros((m, m + 1))
    C = np.zeros((m, m + 1))
    P[rows, cols] = probs[used]
    C[rows, cols] = costs[used]
    ordering = np.append(states, target).astype(np.intp)
    return AbsorbingChain(
        ordering=ordering,
        transient=np.ascontiguousarray(P[:, :m]),
        absorb=P[:, m].copy(),
        transient_costs=np.ascontiguousarray(C[:, :m]),
        absorb_costs=C[:, m].copy(),
        n_nodes=graph.n_nodes,
        triangular=triangular,
    )


def _check_sources(spec: EvaderSpec, dist: np.ndarray, n_nodes: int) -> None:
    for node in spec.sources:
        if not 0 <= node < n_nodes:
            raise ModelError(f"source {node} outside 0..{n_nodes - 1}")
        if not math.isfinite(dist[node]):
            raise ModelError(f"source {node} has no path to target {spec.target}")


def _transient_nodes(dist: np.ndarray, target: int) -> np.ndarray:
    ok = np.isfinite(dist)
    ok[target] = False
    return np.flatnonzero(ok)


def build_least_cost_chain(graph: Graph, spec: EvaderSpec, plan: InterdictionPlan = NO_INTERDICTION) -> AbsorbingChain:
    model = spec.model.inner if isinstance(spec.model, NonRetreating) else spec.model
    if not isinstance(model, LeastCostGuided):
        raise ModelError("spec does not describe a least-cost-guided evader")
    costs = plan.effective_costs(graph)
    probs, dist = _guided_probs(graph, spec.target, costs, model.lam)
    _check_sources(spec, dist, graph.n_nodes)
    return _assemble(graph, spec.target, probs, costs, _transient_nodes(dist, spec.target))


def build_least_risk_chain(graph: Graph, spec: EvaderSpec, plan: InterdictionPlan = NO_INTERDICTION) -> AbsorbingChain:
    """Least-risk-guided chain.

    Path evasion probabilities are products, so the safest continuation is
    a shortest path under ``-log Y`` and ``(q_ij / q_i*) ** lam`` equals
    ``exp(-lam * excess)`` in those log-costs.
    """
    model = spec.model.inner if isinstance(spec.model, NonRetreating) else spec.model
    if not isinstance(model, LeastRiskGuided):
        raise ModelError("spec does not describe a least-risk-guided evader")
    if not graph.has_evasion:
        raise ModelError("least-risk evader needs evasion probabilities on every edge")
    log_risk = -np.log(plan.effective_evasion(graph))
    probs, dist = _guided_probs(graph, spec.target, log_risk, model.lam)
    _check_sources(spec, dist, graph.n_nodes)
    return _assemble(graph, spec.target, probs, plan.effective_costs(graph), _transient_nodes(dist, spec.target))


def apply_non_retreating(chain: AbsorbingChain, dist: DistanceField) -> AbsorbingChain:
    """Drop every step that does not strictly approach the target.

    Surviving probabilities are renormalised per row and states are
    reordered by increasing distance, which makes the transient block
    strictly lower triangular.
    """
    if dist.target != chain.target:
        raise ModelError("distance field and chain have different targets")
    nodes = chain.ordering[:-1]
    d = np.asarray(dist.dist)[nodes]
    if not np.all(np.isfinite(d)):
        raise ModelError("chain contains nodes without a path to the target")
    margin = TIE_RTOL * np.maximum(1.0, np.abs(d))
    closer = (d[:, None] - d[None, :]) > margin[:, None]
    M = np.where(closer, chain.transient, 0.0)
    R = np.where(d > margin, chain.absorb, 0.0)
    total = M.sum(axis=1) + R
    empty = np.flatnonzero(total <= 0)
    if len(empty):
        raise ModelError(
            f"nodes {nodes[empty].tolist()} have no strictly closer neighbour (zero-cost edges?)"
        )
    M /= total[:, None]
    R = R / total
    perm = np.lexsort((nodes, d))
    ordering = np.append(nodes[perm], chain.target)
    return AbsorbingChain(
        ordering=ordering,
        transient=np.ascontiguousarray(M[np.ix_(perm, perm)]),
        absorb=R[perm],
        transient_costs=np.ascontiguousarray(chain.transient_costs[np.ix_(perm, perm)]),
        absorb_costs=chain.absorb_costs[perm].copy(),
        n_nodes=chain.n_nodes,
        triangular=True,
    )


def build_chain(graph: Graph, spec: EvaderSpec, plan: InterdictionPlan = NO_INTERDICTION) -> AbsorbingChain:
    """Build the chain for whichever model `spec` carries."""
    model = spec.model
    inner = model.inner if isinstance(model, NonRetreating) else model
    if isinstance(inner, LeastCostGuided):
        chain = build_least_cost_chain(graph, spec, plan)
    elif isinstance(inner, LeastRiskGuided):
        chain = build_least_risk_chain(graph, spec, plan)
    else:
        raise ModelError(f"unknown evader model {model!r}")
    if isinstance(model, NonRetreating):
        chain = apply_non_retreating(chain, distances_to_target(graph, spec.target, plan))
    return chain


def check_weights(specs: Sequence[EvaderSpec]) -> None:
    if not specs:
        raise ModelError("at least one evader is required")
    total = sum(s.weight for s in specs)
    if abs(total - 1.0) > PROB_SUM_ATOL:
        raise ModelError(f"evader weights sum to {total!r}, not 1")


def scenario_chains(graph: Graph, specs: Sequence[EvaderSpec], plan: InterdictionPlan = NO_INTERDICTION) -> list[AbsorbingChain]:
    check_weights(specs)
    return [build_chain(graph, s, plan) for s in specs]


# -- scenario files -------------------------------------------------------------

MODEL_NAMES = {
    "least-cost": LeastCostGuided,
    "least-risk": LeastRiskGuided,
}


def parse_model(words: Sequence[str], lam: float) -> Model:
    """``least-cost`` / ``least-risk``, optionally prefixed by ``non-retreating``."""
    words = list(words)
    wrap = False
    if words and words[0] == "non-retreating":
        wrap = True
        words = words[1:] or ["least-cost"]
    if len(words) != 1 or words[0] not in MODEL_NAMES:
        raise ModelError(f"unknown model {' '.join(words)!r}; expected one of {sorted(MODEL_NAMES)}")
    model = MODEL_NAMES[words[0]](lam)
    return NonRetreating(model) if wrap else model


def model_name(model: Model) -> str:
    if isinstance(model, NonRetreating):
        return "non-retreating " + model_name(model.inner)
    return {LeastCostGuided: "least-cost", LeastRiskGuided: "least-risk"}[type(model)]


class EvaderBlock:
    """Accumulates ``key value`` lines of one ``evader`` block."""

    KEYS = ("target", "model", "lambda", "weight", "source")

    def __init__(self, lineno: int):
        self.lineno = lineno
        self.target = None
        self.model_words = ["least-cost"]
        self.lam = 0.0
        self.weight = None
        self.sources: dict[int, float] = {}

    def feed(self, key: str, args: list[str], lineno: int) -> None:
        try:
            if key == "target":
                (self.target,) = map(int, args)
            elif key == "model":
                if not args:
                    raise ValueError("missing model name")
                self.model_words = args
            elif key == "lambda":
                (self.lam,) = map(float, args)
            elif key == "weight":
                (self.weight,) = map(float, args)
            elif key == "source":
                node, p = args
                node = int(node)
                if node in self.sources:
                    raise ValueError(f"source {node} listed twice")
                self.sources[node] = float(p)
            else:
                raise ModelError(f"line {lineno}: unknown evader key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"line {lineno}: bad '{key}' entry: {exc}") from None

    def build(self, weight: float) -> EvaderSpec:
        if self.target is None:
            raise ModelError(f"evader block at line {self.lineno} has no target")
        model = parse_model(self.model_words, self.lam)
        return EvaderSpec(self.sources, self.target, model, weight)


def finish_blocks(blocks: Sequence[EvaderBlock]) -> list[EvaderSpec]:
    """Turn parsed blocks into specs; missing weights mean equal weights."""
    given = [b.weight is not None for b in blocks]
    if any(given) and not all(given):
        raise ModelError("either every evader block sets a weight or none does")
    if not blocks:
        raise ModelError("no evader blocks")
    specs = [b.build(b.weight if b.weight is not None else 1.0 / len(blocks)) for b in blocks]
    check_weights(specs)
    return specs


def parse_scenario(lines: Iterable[str]) -> list[EvaderSpec]:
    """Parse a scenario file.

    Grammar (``#`` starts a comment)::

        evader
        target <node>
        model [non-retreating] least-cost|least-risk
        lambda <float>
        weight <float>
        source <node> <probability>   # repeated
    """
    blocks: list[EvaderBlock] = []
    for lineno, raw in enumerate(lines, 1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        key, args = words[0], words[1:]
        if key == "evader":
            if args:
                raise ModelError(f"line {lineno}: 'evader' takes no arguments")
            blocks.append(EvaderBlock(lineno))
        elif not blocks:
            raise ModelError(f"line {lineno}: '{key}' outside an evader block")
        else:
            blocks[-1].feed(key, args, lineno)
    return finish_blocks(blocks)


def read_scenario(path) -> list[EvaderSpec]:
    with open(path) as fh:
        return parse_scenario(fh)


def format_scenario(specs: Iterable[EvaderSpec]) -> str:
    out = []
    for s in specs:
        out += [
            "evader",
            f"target {s.target}",
            f"model {model_name(s.model)}",
            f"lambda {model_lambda(s.model)!r}",
            f"weight {s.weight!r}",
        ]
        out += [f"source {node} {p!r}" for node, p in sorted(s.sources.items())]
        out.append("")
    return "\n".join(out)
