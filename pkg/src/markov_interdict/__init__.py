"""Edge interdiction against evaders that move as guided random walks."""

from .evaders import (
    AbsorbingChain,
    EvaderSpec,
    LeastCostGuided,
    LeastRiskGuided,
    NonRetreating,
    apply_non_retreating,
    build_chain,
    build_least_cost_chain,
    build_least_risk_chain,
    parse_scenario,
    scenario_chains,
)
from .evaluate import EvalResult, evaluate_plan, expected_cost, scenario_objective, solve_visit_vector
from .exceptions import ChainError, EnumerationLimitError, GraphError, InterdictionError, ModelError
from .graph import (
    DistanceField,
    Graph,
    InterdictionPlan,
    check_target_access,
    distances_to_target,
    effective_cost,
    read_edgelist,
)
from .instances import gen_fig1_instance, gen_grid_instance, random_evaders
from .oracles import PathEnsemble, enumerate_paths, oracle_expected_cost, simulate_walks
from .solvers import (
    CentralityField,
    SolverReport,
    betweenness_solver,
    centrality,
    exhaustive_solver,
    greedy_solver,
    random_solver,
)

__version__ = "0.1.0"
