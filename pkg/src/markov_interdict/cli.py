"""Command line entry point (``markov-interdict``)."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .evaders import build_chain, format_scenario, read_scenario
from .evaluate import evaluate_plan, expected_cost
from .exceptions import GraphError, InterdictionError
from .experiments import (
    BUDGET_FIELDS,
    DEFAULT_DELTA,
    SOLVER_NAMES,
    ExperimentConfig,
    lambda_fields,
    read_config,
    run_budget_sweep,
    run_fig1_demo,
    run_lambda_sweep,
    run_solver,
    write_csv,
)
from .graph import InterdictionPlan, read_edgelist, write_edgelist
from .instances import gen_grid_instance, random_evaders


def _edge(text: str) -> tuple[int, int]:
    try:
        u, v = text.replace("-", ",").split(",")
        return int(u), int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"edge must look like 'u,v', got {text!r}") from None


def read_plan(path, delta: float) -> InterdictionPlan:
    """Plan file: one ``tail head [increment]`` per line."""
    edges, incs = [], {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            words = raw.split("#", 1)[0].split()
            if not words:
                continue
            if len(words) not in (2, 3):
                raise GraphError(f"{path}:{lineno}: expected 'tail head [increment]'")
            e = (int(words[0]), int(words[1]))
            edges.append(e)
            if len(words) == 3:
                incs[e] = float(words[2])
    return InterdictionPlan(frozenset(edges), default_increment=delta, increments=incs)


def _load(args):
    """Graph, evaders and (possibly overridden) config from CLI flags."""
    cfg = None
    if args.config:
        cfg = read_config(args.config)
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        graph, specs = cfg.build_instance()
    elif args.graph and args.scenario:
        graph, specs = read_edgelist(args.graph), read_scenario(args.scenario)
    else:
        raise GraphError("give --config, or both --graph and --scenario")
    lam = getattr(args, "lam", None)
    if lam:
        specs = [s.with_lambda(lam[0]) for s in specs]
    return graph, specs, cfg


def _delta(args, cfg):
    if args.delta is not None:
        return args.delta
    return cfg.delta if cfg else DEFAULT_DELTA


def _emit(obj, out_dir, name):
    text = json.dumps(obj, indent=2)
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / name).write_text(text + "\n")
    print(text)


def cmd_gen_grid(args):
    graph = gen_grid_instance(args.rows, args.cols, args.shortcuts, tuple(args.weight_range), seed=args.seed)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_edgelist(graph, out / "grid.edges")
    written = [str(out / "grid.edges")]
    if args.evaders:
        specs = random_evaders(graph, args.evaders, args.sources, seed=args.seed + 1 if args.seed is not None else None)
        (out / "scenario.txt").write_text(format_scenario(specs))
        written.append(str(out / "scenario.txt"))
    print(json.dumps({"nodes": graph.n_nodes, "edges": graph.n_edges, "files": written}))


def cmd_fig1_demo(args):
    lam = args.lam[0] if args.lam else 10.0
    delta = args.delta if args.delta is not None else 1000.0
    _emit(run_fig1_demo(lam, delta), args.out, "fig1_demo.json")


def _sweep_config(args) -> ExperimentConfig:
    cfg = read_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out = args.out
    if getattr(args, "lam", None):
        cfg.lambdas = list(args.lam)
    if getattr(args, "budget", None):
        cfg.budgets = list(args.budget)
    if getattr(args, "solver", None):
        cfg.solvers = list(args.solver)
    if getattr(args, "delta", None) is not None:
        cfg.delta = args.delta
    return cfg


def cmd_lambda_sweep(args):
    cfg = _sweep_config(args)
    instance = cfg.build_instance()
    rows = run_lambda_sweep(cfg, instance)
    path = Path(cfg.out) / "lambda_sweep.csv"
    write_csv(rows, path, lambda_fields(len(instance[1])))
    print(path)


def cmd_budget_sweep(args):
    cfg = _sweep_config(args)
    rows = run_budget_sweep(cfg)
    path = Path(cfg.out) / "budget_sweep.csv"
    write_csv(rows, path, BUDGET_FIELDS)
    print(path)


def cmd_eval(args):
    graph, specs, cfg = _load(args)
    delta = _delta(args, cfg)
    plan = read_plan(args.plan, delta) if args.plan else InterdictionPlan(default_increment=delta)
    plan = plan.with_edges(args.interdict or [])
    plan.validate(graph)
    evaders = []
    for s in specs:
        res = expected_cost(build_chain(graph, s, plan), s)
        evaders.append({"target": s.target, "weight": s.weight, **res.to_dict()})
    report = {
        "objective": evaluate_plan(graph, specs, plan),
        "interdicted": sorted(list(e) for e in plan.interdicted),
        "evaders": evaders,
    }
    _emit(report, args.out, "eval.json")


def cmd_solve(args):
    graph, specs, cfg = _load(args)
    template = InterdictionPlan(default_increment=_delta(args, cfg))
    budget = args.budget[0] if args.budget else 1
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else None)
    rep = run_solver(args.solver[0] if args.solver else "greedy", graph, specs, template, budget, seed=seed)
    _emit(rep.to_dict(), args.out, "solve.json")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="markov-interdict", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, instance=False):
        if config:
            sp.add_argument("--config", required=not instance, help="experiment config file")
        if instance:
            sp.add_argument("--graph", help="edge-list file")
            sp.add_argument("--scenario", help="scenario (evader) file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")

    g = sub.add_parser("gen-grid", help="write a random grid instance")
    g.add_argument("--rows", type=int, default=10)
    g.add_argument("--cols", type=int, default=10)
    g.add_argument("--shortcuts", type=int, default=10)
    g.add_argument("--weight-range", type=float, nargs=2, default=[0.5, 1.5])
    g.add_argument("--evaders", type=int, default=0, help="also write a scenario with this many evaders")
    g.add_argument("--sources", type=int, default=5)
    common(g, config=False)
    g.set_defaults(func=cmd_gen_grid)

    f = sub.add_parser("fig1-demo", help="four-path example network report")
    f.add_argument("--lambda", dest="lam", type=float, nargs=1)
    f.add_argument("--delta", type=float)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fig1_demo)

    ls = sub.add_parser("lambda-sweep", help="objective versus lambda (CSV)")
    common(ls)
    ls.add_argument("--lambda", dest="lam", type=float, nargs="+")
    ls.set_defaults(func=cmd_lambda_sweep)

    bs = sub.add_parser("budget-sweep", help="solver objective versus budget (CSV)")
    common(bs)
    bs.add_argument("--lambda", dest="lam", type=float, nargs="+")
    bs.add_argument("--budget", type=int, nargs="+")
    bs.add_argument("--solver", nargs="+", choices=SOLVER_NAMES)
    bs.add_argument("--delta", type=float)
    bs.set_defaults(func=cmd_budget_sweep)

    ev = sub.add_parser("eval", help="evaluate one interdiction plan (JSON)")
    common(ev, instance=True)
    ev.add_argument("--plan", help="plan file: 'tail head [increment]' lines")
    ev.add_argument("--interdict", type=_edge, action="append", help="edge 'u,v' (repeatable)")
    ev.add_argument("--lambda", dest="lam", type=float, nargs=1)
    ev.add_argument("--delta", type=float)
    ev.set_defaults(func=cmd_eval)

    so = sub.add_parser("solve", help="run one solver at one budget (JSON)")
    common(so, instance=True)
    so.add_argument("--solver", nargs=1, choices=SOLVER_NAMES)
    so.add_argument("--budget", type=int, nargs=1)
    so.add_argument("--lambda", dest="lam", type=float, nargs=1)
    so.add_argument("--delta", type=float)
    so.set_defaults(func=cmd_solve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (InterdictionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
