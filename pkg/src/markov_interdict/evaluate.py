"""Closed-form expected cost and edge visits of an absorbing chain.

With fundamental matrix ``N = (I - M_hat)^-1`` and start distribution
``a``, the expected number of visits to each transient state is ``aN``;
the expected number of traversals of edge ``(i, j)`` is
``F_ij = (aN)_i * M_ij`` and the expected cost is ``sum_ij C_ij F_ij``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .evaders import AbsorbingChain, EvaderSpec, check_weights, scenario_chains
from .exceptions import ChainError
from .graph import NO_INTERDICTION, Graph, InterdictionPlan
from .tolerances import DENSE_SOLVE_MAX, ITER_MAX, ITER_TOL


@dataclass(frozen=True)
class EvalResult:
    """Expected cost, per-state visits and per-edge traversals.

    ``edge_visits`` is keyed by graph ``(tail, head)`` and only contains
    edges the evader can actually take.
    """

    expected_cost: float
    visit_vector: np.ndarray
    edge_visits: dict
    ordering: np.ndarray

    def node_visits(self) -> dict[int, float]:
        return {int(n): float(x) for n, x in zip(self.ordering[:-1], self.visit_vector)}

    def to_dict(self) -> dict:
        return {
            "expected_cost": float(self.expected_cost),
            "node_visits": {str(k): v for k, v in self.node_visits().items()},
            "edge_visits": [
                {"tail": int(u), "head": int(v), "visits": float(f)}
                for (u, v), f in sorted(self.edge_visits.items())
            ],
        }


def _solve_dense(M: np.ndarray, a: np.ndarray) -> np.ndarray:
    A = np.eye(len(a)) - M
    try:
        x = np.linalg.solve(A.T, a)
    except np.linalg.LinAlgError as exc:
        raise ChainError(f"I - M_hat is singular ({exc}); the target is not accessible") from None
    if not np.all(np.isfinite(x)):
        raise ChainError("visit vector is not finite; the target is not accessible")
    return x


def _solve_iterative(M: np.ndarray, a: np.ndarray, tol=ITER_TOL, max_iter=ITER_MAX) -> np.ndarray:
    x = a.copy()
    term = a.copy()
    for _ in range(max_iter):
        term = term @ M
        x += term
        if np.abs(term).sum() <= tol * max(1.0, np.abs(x).sum()):
            return x
    raise ChainError(f"fixed-point iteration did not converge in {max_iter} steps")


def _solve_triangular(M: np.ndarray, a: np.ndarray) -> np.ndarray:
    # x (I - M) = a  <=>  (I - M)^T x^T = a^T with I - M unit lower triangular
    return solve_triangular(-M, a, lower=True, trans="T", unit_diagonal=True, check_finite=False)


def solve_visit_vector(chain: AbsorbingChain, start, method: str = "auto") -> np.ndarray:
    """Expected visits ``aN`` to every transient state.

    `method` is ``"dense"``, ``"triangular"``, ``"iterative"`` or ``"auto"``
    (triangular substitution when the chain is flagged triangular, dense LU
    up to :data:`DENSE_SOLVE_MAX` states, fixed-point iteration beyond).
    """
    a = chain.start_vector(start)
    M = chain.transient
    if len(a) == 0:
        return a
    if method == "auto":
        if chain.triangular:
            method = "triangular"
        elif len(a) <= DENSE_SOLVE_MAX:
            method = "dense"
        else:
            method = "iterative"
    if method == "dense":
        return _solve_dense(M, a)
    if method == "triangular":
        if not chain.triangular:
            raise ChainError("triangular solve requested for a chain not flagged triangular")
        return _solve_triangular(M, a)
    if method == "iterative":
        return _solve_iterative(M, a)
    raise ValueError(f"unknown solve method {method!r}")


def step_costs(chain: AbsorbingChain) -> np.ndarray:
    """Expected cost of one step out of each transient state.

    This is the diagonal of ``M_hat C_hat^T + R S^T``.
    """
    return np.einsum("ij,ij->i", chain.transient, chain.transient_costs) + chain.absorb * chain.absorb_costs


def edge_visits(chain: AbsorbingChain, visits: np.ndarray) -> dict:
    nodes = chain.ordering
    F = {}
    rows, cols = np.nonzero(chain.transient)
    vals = visits[rows] * chain.transient[rows, cols]
    for i, j, f in zip(nodes[rows].tolist(), nodes[cols].tolist(), vals.tolist()):
        F[(i, j)] = f
    (rows,) = np.nonzero(chain.absorb)
    t = chain.target
    for i, f in zip(nodes[rows].tolist(), (visits[rows] * chain.absorb[rows]).tolist()):
        F[(i, t)] = f
    return F


def expected_cost(chain: AbsorbingChain, start, method: str = "auto", with_edges: bool = True) -> EvalResult:
    x = solve_visit_vector(chain, start, method)
    cost = float(x @ step_costs(chain))
    F = edge_visits(chain, x) if with_edges else {}
    return EvalResult(expected_cost=cost, visit_vector=x, edge_visits=F, ordering=chain.ordering)


def scenario_objective(chains: Sequence[AbsorbingChain], specs: Sequence[EvaderSpec], starts=None) -> float:
    """Probability-weighted sum of each evader's expected cost.

    Start distributions are taken from the specs unless `starts` is given.
    """
    if len(chains) != len(specs):
        raise ValueError("need one chain per evader")
    check_weights(specs)
    if starts is None:
        starts = specs
    total = 0.0
    for chain, spec, start in zip(chains, specs, starts):
        if spec.weight == 0:
            continue
        x = solve_visit_vector(chain, start)
        total += spec.weight * float(x @ step_costs(chain))
    return total


def evaluate_plan(graph: Graph, specs: Sequence[EvaderSpec], plan: InterdictionPlan = NO_INTERDICTION) -> float:
    """Interdiction objective: rebuild every evader's chain under `plan` and
    return the weighted expected cost."""
    return scenario_objective(scenario_chains(graph, specs, plan), specs)
