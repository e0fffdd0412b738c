import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _instances import random_dag, random_graph, random_spec
from markov_interdict import (
    AbsorbingChain,
    ChainError,
    EnumerationLimitError,
    InterdictionPlan,
    build_chain,
    enumerate_paths,
    expected_cost,
    oracle_expected_cost,
    simulate_walks,
)
from markov_interdict.oracles import PathEnsemble, simple_path_ensemble

seeds = st.integers(0, 2**32 - 1)


class TestEnumeration:
    def test_fig1_uniform(self, fig1):
        g, s = fig1
        ens = enumerate_paths(build_chain(g, s.with_lambda(0.0)), s)
        assert len(ens) == 4
        assert all(p == 0.25 for _, p, _ in ens.paths)
        assert sorted(c for _, _, c in ens.paths) == [8.0, 8.0, 8.01, 9.0]
        assert oracle_expected_cost(ens) == pytest.approx(8.2525, rel=1e-15)

    def test_cyclic_floor(self):
        c = AbsorbingChain.from_matrices([[0, 1], [0.5, 0]], [0, 0.5])
        ens = enumerate_paths(c, [1, 0], mass_floor=1e-9)
        assert ens.total_mass >= 1 - 1e-6
        assert oracle_expected_cost(ens, renormalize=True) == pytest.approx(4.0, rel=1e-6)

    def test_convergence_as_floor_drops(self):
        c = AbsorbingChain.from_matrices([[0.2, 0.5], [0.4, 0.1]], [0.3, 0.5])
        exact = expected_cost(c, [1, 0]).expected_cost
        errs = [abs(oracle_expected_cost(enumerate_paths(c, [1, 0], mass_floor=f)) - exact) for f in (1e-3, 1e-5, 1e-7)]
        assert errs[0] > errs[1] > errs[2]

    def test_limit(self):
        c = AbsorbingChain.from_matrices([[0, 1], [0.5, 0]], [0, 0.5])
        with pytest.raises(EnumerationLimitError):
            enumerate_paths(c, [1, 0], mass_floor=1e-12, max_paths=5)

    def test_empty(self):
        with pytest.raises(ValueError):
            oracle_expected_cost(PathEnsemble([]))

    @settings(max_examples=60, deadline=None)
    @given(seeds)
    def test_matches_closed_form_on_dags(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 9))
        g = random_dag(rng, n)
        spec = random_spec(rng, n)
        c = build_chain(g, spec)
        ens = enumerate_paths(c, spec)
        assert ens.total_mass == pytest.approx(1.0, abs=1e-12)
        assert oracle_expected_cost(ens) == pytest.approx(expected_cost(c, spec).expected_cost, rel=1e-10)


class TestSimplePaths:
    def test_interdiction_shifts_costs(self, fig1_graph):
        plan = InterdictionPlan(frozenset({(4, 5)}), default_increment=1000.0)
        assert oracle_expected_cost(simple_path_ensemble(fig1_graph, 0, 5, plan)) == pytest.approx(758.2525, rel=1e-12)

    @pytest.mark.parametrize(
        "edges, value",
        [
            ((), 8.2525),
            (((4, 5),), 8.01),
            (((0, 2),), 8.33666666666666),
            (((0, 1),), 8.00333333333333),
        ],
    )
    def test_fig1_edge_removed(self, fig1_graph, edges, value):
        g = fig1_graph.without_edges(edges)
        assert oracle_expected_cost(simple_path_ensemble(g, 0, 5)) == pytest.approx(value, rel=1e-12)


class TestSimulation:
    def test_deterministic_walk(self):
        c = AbsorbingChain.from_matrices([[0, 1], [0, 0]], [0, 1])
        st_ = simulate_walks(c, [1, 0], 100, seed=1)
        assert st_.mean_cost == 2.0 and st_.stderr == 0.0 and st_.censored == 0

    def test_two_state_cycle(self):
        c = AbsorbingChain.from_matrices([[0, 1], [0.5, 0]], [0, 0.5])
        st_ = simulate_walks(c, [1, 0], 200_000, seed=7)
        assert abs(st_.mean_cost - 4.0) <= 4 * st_.stderr
        for e, f in {(0, 1): 2.0, (1, 0): 1.0, (1, 2): 1.0}.items():
            assert abs(st_.edge_visits[e] - f) <= 4 * st_.edge_stderr[e]

    def test_reproducible(self, fig1):
        g, s = fig1
        c = build_chain(g, s.with_lambda(0.5))
        a = simulate_walks(c, s, 1000, seed=3)
        b = simulate_walks(c, s, 1000, seed=3)
        assert a.mean_cost == b.mean_cost

    def test_all_censored(self):
        c = AbsorbingChain.from_matrices([[0, 1], [0.999, 0]], [0, 0.001])
        with pytest.raises(ChainError, match="censored"):
            simulate_walks(c, [1, 0], 10, seed=0, step_cap=1)

    @settings(max_examples=10, deadline=None)
    @given(seeds)
    def test_agrees_with_closed_form(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 8))
        g = random_graph(rng, n)
        spec = random_spec(rng, n)
        c = build_chain(g, spec)
        st_ = simulate_walks(c, spec, 20_000, seed=seed)
        exact = expected_cost(c, spec).expected_cost
        assert abs(st_.mean_cost - exact) <= 5 * st_.stderr + 1e-12
