"""Experiment drivers: lambda sweeps, budget sweeps and the four-path demo.

Configuration files are flat ``key value...`` lines (``#`` comments) with
optional ``evader`` blocks in the scenario-file syntax::

    grid 10 10 10              # rows cols shortcuts (or: graph path/to.edges)
    weight_range 0.5 1.5
    seed 7
    random_evaders 2 5         # evaders, sources each (ignored if blocks given)
    evader_model least-cost
    lambdas 0.1 1 3 10
    budgets 0:20               # a:b is inclusive; 'max' = all interdictable edges
    delta 4.5
    solvers greedy betweenness
    out results

Output CSV columns are fixed by :data:`BUDGET_FIELDS` and
:func:`lambda_fields`.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .evaders import EvaderBlock, EvaderSpec, finish_blocks, model_name, parse_model
from .evaluate import evaluate_plan, expected_cost
from .evaders import build_chain
from .exceptions import GraphError, ModelError
from .graph import Graph, InterdictionPlan, distances_to_target, read_edgelist
from .instances import FIG1_SOURCE, FIG1_TARGET, gen_fig1_instance, gen_grid_instance, random_evaders
from .oracles import oracle_expected_cost, simple_path_ensemble
from .solvers import (
    SolverReport,
    betweenness_solver,
    exhaustive_solver,
    greedy_solver,
    random_solver,
)

DEFAULT_DELTA = 4.5

#: Grid size used to exhibit a decreasing greedy step at lambda = 0.1, and
#: the first seed (searched upwards from 0) on which it occurs.
NONMONOTONE_GRID = (4, 4, 2)
NONMONOTONE_LAMBDA = 0.1
NONMONOTONE_SEED = 0

SOLVER_NAMES = ("greedy", "greedy+", "betweenness", "exhaustive", "random")

BUDGET_FIELDS = ["solver", "lambda", "budget", "objective", "wall_time", "evaluations", "interdicted"]


def lambda_fields(n_evaders: int) -> list[str]:
    return ["lambda", "objective"] + [f"cost_{k}" for k in range(n_evaders)]


@dataclass
class ExperimentConfig:
    graph_path: str | None = None
    grid: tuple[int, int, int] | None = None
    weight_range: tuple[float, float] = (0.5, 1.5)
    evaders: list[EvaderSpec] | None = None
    random_evaders: tuple[int, int] = (2, 5)
    evader_model: tuple[str, ...] = ("least-cost",)
    lambdas: list[float] = field(default_factory=lambda: [0.0])
    budgets: list = field(default_factory=lambda: [0])
    delta: float = DEFAULT_DELTA
    solvers: list[str] = field(default_factory=lambda: ["greedy", "betweenness"])
    seed: int | None = None
    out: str = "results"
    workers: int | None = None

    def __post_init__(self):
        if (self.graph_path is None) == (self.grid is None):
            raise ModelError("config needs exactly one of 'graph' or 'grid'")
        if any(not lam >= 0 for lam in self.lambdas):
            raise ModelError("lambda values must be >= 0")
        if self.seed is None and (self.grid is not None or self.evaders is None):
            raise ModelError("generated instances need a 'seed'")
        for s in self.solvers:
            if s not in SOLVER_NAMES:
                raise ModelError(f"unknown solver {s!r}; choose from {SOLVER_NAMES}")
        if self.delta < 0 or not math.isfinite(self.delta):
            raise ModelError("delta must be finite and >= 0")

    def plan_template(self) -> InterdictionPlan:
        return InterdictionPlan(default_increment=self.delta)

    def build_instance(self) -> tuple[Graph, list[EvaderSpec]]:
        """Graph and evaders; generated parts draw from independent streams of `seed`."""
        graph_seq, evader_seq = np.random.SeedSequence(self.seed).spawn(2)
        if self.grid is not None:
            graph = gen_grid_instance(*self.grid, weight_range=self.weight_range, seed=graph_seq)
        else:
            graph = read_edgelist(self.graph_path)
        if self.evaders is not None:
            specs = list(self.evaders)
        else:
            model = parse_model(self.evader_model, 1.0)
            specs = random_evaders(graph, *self.random_evaders, seed=evader_seq, model=model)
        return graph, specs

    def resolve_budgets(self, graph: Graph) -> list[int]:
        limit = len(graph.interdictable())
        out = sorted({limit if b == "max" else int(b) for b in self.budgets})
        if out and (out[0] < 0 or out[-1] > limit):
            raise GraphError(f"budgets must lie in 0..{limit}")
        return out


def _parse_budgets(args: Sequence[str]) -> list:
    out = []
    for tok in args:
        if tok == "max":
            out.append("max")
        elif ":" in tok:
            lo, hi = map(int, tok.split(":"))
            out += list(range(lo, hi + 1))
        else:
            out.append(int(tok))
    return out


_TOP_KEYS = {
    "graph": lambda a: {"graph_path": a[0]},
    "grid": lambda a: {"grid": tuple(map(int, a))},
    "weight_range": lambda a: {"weight_range": tuple(map(float, a))},
    "random_evaders": lambda a: {"random_evaders": tuple(map(int, a))},
    "evader_model": lambda a: {"evader_model": tuple(a)},
    "lambdas": lambda a: {"lambdas": [float(x) for x in a]},
    "budgets": lambda a: {"budgets": _parse_budgets(a)},
    "delta": lambda a: {"delta": float(a[0])},
    "solvers": lambda a: {"solvers": list(a)},
    "seed": lambda a: {"seed": int(a[0])},
    "out": lambda a: {"out": a[0]},
    "workers": lambda a: {"workers": int(a[0])},
}
_ARITY = {"graph": 1, "grid": 3, "weight_range": 2, "random_evaders": 2, "delta": 1, "seed": 1, "out": 1, "workers": 1}


def parse_config(lines: Iterable[str], base_dir: str | os.PathLike | None = None) -> ExperimentConfig:
    kwargs: dict = {}
    blocks: list[EvaderBlock] = []
    for lineno, raw in enumerate(lines, 1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        key, args = words[0], words[1:]
        if key == "evader":
            blocks.append(EvaderBlock(lineno))
            continue
        if key in EvaderBlock.KEYS:
            if not blocks:
                raise ModelError(f"line {lineno}: '{key}' outside an evader block")
            blocks[-1].feed(key, args, lineno)
            continue
        if key not in _TOP_KEYS:
            raise ModelError(f"line {lineno}: unknown config key {key!r}")
        if key in kwargs or (key == "graph" and "graph_path" in kwargs):
            raise ModelError(f"line {lineno}: '{key}' given twice")
        if not args or (key in _ARITY and len(args) != _ARITY[key]):
            raise ModelError(f"line {lineno}: wrong number of values for '{key}'")
        try:
            kwargs.update(_TOP_KEYS[key](args))
        except ValueError as exc:
            raise ModelError(f"line {lineno}: bad value for '{key}': {exc}") from None
    if blocks:
        kwargs["evaders"] = finish_blocks(blocks)
    if base_dir is not None and kwargs.get("graph_path"):
        kwargs["graph_path"] = str(Path(base_dir, kwargs["graph_path"]))
    return ExperimentConfig(**kwargs)


def read_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh, base_dir=Path(path).parent)


def weighted_shortest_cost(graph: Graph, specs: Sequence[EvaderSpec], plan: InterdictionPlan | None = None) -> float:
    """The objective of perfectly informed evaders (the large-lambda limit)."""
    plan = plan or InterdictionPlan()
    total = 0.0
    for s in specs:
        d = distances_to_target(graph, s.target, plan).dist
        total += s.weight * sum(p * d[node] for node, p in s.sources.items())
    return total


def run_lambda_sweep(config: ExperimentConfig, instance=None) -> list[dict]:
    """Objective without interdiction for every lambda in the config."""
    graph, specs = instance or config.build_instance()
    rows = []
    for lam in sorted(config.lambdas):
        sp = [s.with_lambda(lam) for s in specs]
        costs = [expected_cost(build_chain(graph, s), s, with_edges=False).expected_cost for s in sp]
        row = {"lambda": lam, "objective": math.fsum(s.weight * c for s, c in zip(sp, costs))}
        row.update({f"cost_{k}": c for k, c in enumerate(costs)})
        rows.append(row)
    return rows


def run_solver(name: str, graph, specs, template, budget, seed=None, workers=None) -> SolverReport:
    if name == "greedy":
        return greedy_solver(graph, specs, template, budget, workers=workers)
    if name == "greedy+":
        return greedy_solver(graph, specs, template, budget, require_positive_gain=True, workers=workers)
    if name == "betweenness":
        return betweenness_solver(graph, specs, template, budget)
    if name == "exhaustive":
        return exhaustive_solver(graph, specs, template, budget)
    if name == "random":
        return random_solver(graph, specs, template, budget, seed)
    raise ModelError(f"unknown solver {name!r}")


def _edges_str(edges) -> str:
    return ";".join(f"{u}-{v}" for u, v in edges)


def run_budget_sweep(config: ExperimentConfig, instance=None) -> list[dict]:
    """One row per (solver, lambda, budget).

    Incremental solvers run once up to the largest budget and every
    smaller budget is read off their trajectory; ``wall_time`` and
    ``evaluations`` are then cumulative up to that budget.  The exhaustive
    solver is rerun for each budget.
    """
    graph, specs = instance or config.build_instance()
    budgets = config.resolve_budgets(graph)
    template = config.plan_template()
    rows = []
    for name in config.solvers:
        for lam in sorted(config.lambdas):
            sp = [s.with_lambda(lam) for s in specs]
            if name == "exhaustive":
                for b in budgets:
                    rep = run_solver(name, graph, sp, template, b)
                    rows.append(_row(name, lam, b, rep.objective, rep.wall_time, rep.evaluations, rep.chosen))
                continue
            rep = run_solver(name, graph, sp, template, max(budgets), seed=config.seed, workers=config.workers)
            for b in budgets:
                i = min(b, len(rep.chosen))
                rows.append(
                    _row(name, lam, b, rep.objective_trajectory[i], rep.elapsed[i], rep.evaluations_at[i], rep.chosen[:i])
                )
    return rows


def _row(name, lam, b, obj, wall, evals, chosen) -> dict:
    return {
        "solver": name,
        "lambda": lam,
        "budget": b,
        "objective": obj,
        "wall_time": wall,
        "evaluations": evals,
        "interdicted": _edges_str(chosen),
    }


def write_csv(rows: Sequence[dict], path: str | os.PathLike, fields: Sequence[str]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="raise", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})


def run_fig1_demo(lam: float = 10.0, delta: float = 1000.0) -> dict:
    """Four-path example: path-uniform evader versus the Markov objective.

    Part ``uniform_paths`` deletes single edges and averages over the
    remaining simple paths.  Part ``markov`` raises the cost of a single
    edge by `delta` for a least-cost-guided evader with parameter `lam`
    and reports every choice plus the best one.
    """
    graph, spec = gen_fig1_instance()
    s, t = FIG1_SOURCE, FIG1_TARGET

    def uniform(g):
        return oracle_expected_cost(simple_path_ensemble(g, s, t))

    removal = {_edges_str([e]): uniform(graph.without_edges([e])) for e in graph.edges()}
    spec = spec.with_lambda(lam)
    template = InterdictionPlan(default_increment=delta)
    per_edge = {_edges_str([e]): evaluate_plan(graph, [spec], template.with_edges([e])) for e in graph.edges()}
    best = exhaustive_solver(graph, [spec], template, 1)
    d0 = distances_to_target(graph, t).dist[s]
    return {
        "uniform_paths": {
            "baseline": uniform(graph),
            "remove": removal,
        },
        "least_cost_path": {
            "baseline": float(d0),
            "remove": {
                k: float(distances_to_target(graph.without_edges([e]), t).dist[s])
                for k, e in zip(removal, graph.edges())
            },
        },
        "markov": {
            "lambda": lam,
            "delta": delta,
            "model": model_name(spec.model),
            "baseline": evaluate_plan(graph, [spec], template),
            "interdict": per_edge,
            "best_edge": list(best.chosen[0]),
            "best_objective": best.objective,
        },
    }


def find_nonmonotone_seed(
    rows: int = NONMONOTONE_GRID[0],
    cols: int = NONMONOTONE_GRID[1],
    shortcuts: int = NONMONOTONE_GRID[2],
    lam: float = NONMONOTONE_LAMBDA,
    max_seeds: int = 50,
    delta: float = DEFAULT_DELTA,
):
    """First seed whose plain greedy trajectory (full budget) has a decreasing step.

    Returns ``(seed, report, step)`` where the objective drops going from
    ``step`` to ``step + 1`` interdicted edges, or ``None``.
    """
    for seed in range(max_seeds):
        cfg = ExperimentConfig(grid=(rows, cols, shortcuts), seed=seed, lambdas=[lam], delta=delta)
        graph, specs = cfg.build_instance()
        specs = [s.with_lambda(lam) for s in specs]
        rep = greedy_solver(graph, specs, cfg.plan_template(), len(graph.interdictable()))
        drops = np.flatnonzero(np.diff(rep.objective_trajectory) < 0)
        if len(drops):
            return seed, rep, int(drops[0])
    return None
