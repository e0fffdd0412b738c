"""Choosing which edges to interdict.

All solvers share one contract: start from a plan template (which fixes the
cost increments and any edges that are already interdicted), add up to
``budget`` further edges, and report the objective after every addition.
Ties are broken in favour of the lowest edge index.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .evaders import EvaderSpec, check_weights
from .evaluate import evaluate_plan
from .exceptions import EnumerationLimitError, GraphError, ModelError
from .graph import NO_INTERDICTION, Graph, InterdictionPlan, reverse_dijkstra, tight_edges
from .tolerances import EXHAUSTIVE_CAP


@dataclass
class SolverReport:
    """Outcome of one solver run.

    ``objective_trajectory[b]``, ``elapsed[b]`` and ``evaluations_at[b]``
    describe the state after the first ``b`` picks (index 0 is the
    template plan itself).
    """

    solver: str
    chosen: list
    objective_trajectory: list
    evaluations: int
    wall_time: float
    elapsed: list = field(default_factory=list)
    evaluations_at: list = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_trajectory[-1]

    def at_budget(self, budget: int) -> tuple[float, list]:
        """Objective and edge set when at most `budget` picks are allowed."""
        b = min(budget, len(self.chosen))
        return self.objective_trajectory[b], self.chosen[:b]

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "chosen": [list(e) for e in self.chosen],
            "objective_trajectory": list(map(float, self.objective_trajectory)),
            "evaluations": self.evaluations,
            "wall_time": self.wall_time,
        }


@dataclass(frozen=True)
class CentralityField:
    """Source-weighted least-cost-path centrality of every edge.

    ``scores[k]`` is the combined score of edge index ``k``;
    ``per_evader`` keeps each evader's own field and ``unreachable`` lists
    ``(evader, source)`` pairs whose source cannot reach its target.
    """

    scores: np.ndarray
    per_evader: list
    unreachable: list


def _path_counts_to_target(graph: Graph, tight: np.ndarray, target: int):
    """Number of least-cost paths from every node to the target.

    Returns the counts and a topological order of the tight subgraph
    (target side last).
    """
    n = graph.n_nodes
    left = np.bincount(graph.tails[tight], minlength=n)
    sigma = np.zeros(n)
    sigma[target] = 1.0
    queue = [v for v in range(n) if left[v] == 0]
    done = []
    tails = graph.tails
    while queue:
        w = queue.pop()
        done.append(w)
        for k in graph.in_edges[w]:
            if tight[k]:
                v = tails[k]
                sigma[v] += sigma[w]
                left[v] -= 1
                if left[v] == 0:
                    queue.append(v)
    if len(done) != n:
        raise ModelError("zero-cost cycle among least-cost paths; path counts are unbounded")
    done.reverse()
    return sigma, done


def evader_centrality(graph: Graph, spec: EvaderSpec, costs: np.ndarray):
    """Per-edge ``sum_s a_s sigma_st(e) / sigma_st`` for one evader."""
    dist, _ = reverse_dijkstra(graph, spec.target, costs)
    tight = tight_edges(graph, costs, dist)
    to_t, order = _path_counts_to_target(graph, tight, spec.target)
    tight_out = [[k for k in graph.out_edges[v] if tight[k]] for v in range(graph.n_nodes)]
    heads = graph.heads
    score = np.zeros(graph.n_edges)
    missing = []
    for s, a_s in sorted(spec.sources.items()):
        if to_t[s] == 0:
            missing.append(s)
            continue
        from_s = np.zeros(graph.n_nodes)
        from_s[s] = 1.0
        for v in order:
            if from_s[v]:
                for k in tight_out[v]:
                    from_s[heads[k]] += from_s[v]
        frac = np.where(tight, from_s[graph.tails] * to_t[heads], 0.0) / to_t[s]
        score += a_s * frac
    return score, missing


def centrality(graph: Graph, specs: Sequence[EvaderSpec], plan: InterdictionPlan = NO_INTERDICTION) -> CentralityField:
    """Betweenness restricted to source-target least-cost paths.

    Uses the effective (interdicted) costs, so the field changes as the
    interdiction set grows.  Evader fields are combined by scenario weight.
    """
    check_weights(specs)
    costs = plan.effective_costs(graph)
    total = np.zeros(graph.n_edges)
    fields, unreachable = [], []
    for idx, spec in enumerate(specs):
        score, missing = evader_centrality(graph, spec, costs)
        fields.append(score)
        unreachable += [(idx, s) for s in missing]
        total += spec.weight * score
    return CentralityField(total, fields, unreachable)


def _candidates(graph: Graph, template: InterdictionPlan, budget: int) -> list[int]:
    template.validate(graph)
    fixed = {graph.edge_id(e) for e in template.interdicted}
    cands = [k for k in graph.interdictable() if k not in fixed]
    if budget < 0:
        raise GraphError("budget must be nonnegative")
    if budget > len(cands):
        raise GraphError(f"budget {budget} exceeds the {len(cands)} interdictable edges")
    return cands


def _base(template: InterdictionPlan) -> InterdictionPlan:
    return InterdictionPlan(
        interdicted=template.interdicted,
        default_increment=template.default_increment,
        increments=template.increments,
        evasion_factor=template.evasion_factor,
    )


class _Tracker:
    def __init__(self, name, graph, specs):
        self.name = name
        self.graph = graph
        self.specs = specs
        self.evaluations = 0
        self.t0 = time.perf_counter()
        self.chosen, self.traj, self.elapsed, self.evals = [], [], [], []

    def evaluate(self, plan):
        self.evaluations += 1
        return evaluate_plan(self.graph, self.specs, plan)

    def record(self, value, edge=None):
        if edge is not None:
            self.chosen.append(edge)
        self.traj.append(value)
        self.elapsed.append(time.perf_counter() - self.t0)
        self.evals.append(self.evaluations)

    def report(self):
        return SolverReport(
            solver=self.name,
            chosen=self.chosen,
            objective_trajectory=self.traj,
            evaluations=self.evaluations,
            wall_time=time.perf_counter() - self.t0,
            elapsed=self.elapsed,
            evaluations_at=self.evals,
        )


def betweenness_solver(graph: Graph, specs: Sequence[EvaderSpec], template: InterdictionPlan, budget: int) -> SolverReport:
    """Repeatedly interdict the edge of highest centrality, recomputing the
    centrality after each pick.  The objective is evaluated only for the
    report."""
    cands = _candidates(graph, template, budget)
    plan = _base(template)
    tr = _Tracker("betweenness", graph, specs)
    tr.record(tr.evaluate(plan))
    free = np.zeros(graph.n_edges, dtype=bool)
    free[cands] = True
    for _ in range(budget):
        scores = np.where(free, centrality(graph, specs, plan).scores, -np.inf)
        k = int(np.argmax(scores))
        free[k] = False
        edge = graph.edge(k)
        plan = plan.with_edges([edge])
        tr.record(tr.evaluate(plan), edge)
    return tr.report()


def greedy_solver(
    graph: Graph,
    specs: Sequence[EvaderSpec],
    template: InterdictionPlan,
    budget: int,
    require_positive_gain: bool = False,
    workers: int | None = None,
) -> SolverReport:
    """Add, one at a time, the edge whose interdiction raises the objective most.

    With `require_positive_gain` the solver stops as soon as no edge gives a
    strictly positive gain, so the reported objective never decreases.
    Candidate evaluations are independent and run on `workers` threads
    when given.
    """
    cands = _candidates(graph, template, budget)
    plan = _base(template)
    tr = _Tracker("greedy+" if require_positive_gain else "greedy", graph, specs)
    current = tr.evaluate(plan)
    tr.record(current)
    free = list(cands)
    pool = ThreadPoolExecutor(workers) if workers and workers > 1 else None
    try:
        for _ in range(budget):
            trials = [plan.with_edges([graph.edge(k)]) for k in free]
            if pool is None:
                values = [tr.evaluate(p) for p in trials]
            else:
                values = list(pool.map(lambda p: evaluate_plan(graph, specs, p), trials))
                tr.evaluations += len(trials)
            best = int(np.argmax(values))
            if require_positive_gain and values[best] - current <= 0:
                break
            k = free.pop(best)
            edge = graph.edge(k)
            plan = plan.with_edges([edge])
            current = values[best]
            tr.record(current, edge)
    finally:
        if pool is not None:
            pool.shutdown()
    return tr.report()


def exhaustive_solver(
    graph: Graph,
    specs: Sequence[EvaderSpec],
    template: InterdictionPlan,
    budget: int,
    cap: int = EXHAUSTIVE_CAP,
) -> SolverReport:
    """Evaluate every interdiction set of exactly `budget` edges.

    The trajectory after the optimum is found reports the objective of the
    optimal set's prefixes in edge-index order.
    """
    cands = _candidates(graph, template, budget)
    count = math.comb(len(cands), budget)
    if count > cap:
        raise EnumerationLimitError(f"{count} subsets exceed the enumeration cap {cap}", count)
    plan = _base(template)
    tr = _Tracker("exhaustive", graph, specs)
    best_val, best_set = -math.inf, ()
    for subset in itertools.combinations(cands, budget):
        val = tr.evaluate(plan.with_edges(graph.edge(k) for k in subset))
        if val > best_val:
            best_val, best_set = val, subset
    tr.record(tr.evaluate(plan))
    for b, k in enumerate(best_set, 1):
        edge = graph.edge(k)
        if b == len(best_set):
            tr.record(best_val, edge)
        else:
            plan = plan.with_edges([edge])
            tr.record(tr.evaluate(plan), edge)
    return tr.report()


def random_solver(graph: Graph, specs: Sequence[EvaderSpec], template: InterdictionPlan, budget: int, seed) -> SolverReport:
    """Uniformly random interdiction set of size `budget` (seeded baseline)."""
    cands = _candidates(graph, template, budget)
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(cands), size=budget, replace=False) if budget else []
    plan = _base(template)
    tr = _Tracker("random", graph, specs)
    tr.record(tr.evaluate(plan))
    for i in picks:
        edge = graph.edge(cands[int(i)])
        plan = plan.with_edges([edge])
        tr.record(tr.evaluate(plan), edge)
    return tr.report()


SOLVERS = {
    "greedy": greedy_solver,
    "betweenness": betweenness_solver,
    "exhaustive": exhaustive_solver,
    "random": random_solver,
}
