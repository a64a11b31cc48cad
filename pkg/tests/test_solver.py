import itertools
from fractions import Fraction

import numpy as np
import pytest

from fairsd.core import FairSDError, Problem, ProblemError
from fairsd.distributions import DistributionSpec, PositionMarginals, marginals_of
from fairsd.evaluation import expected_envy_exact
from fairsd.solver import (
    MAX_ORDERS,
    SizeCapError,
    evaluate_objective,
    known_ranking_order,
    solve,
    solve_exact,
    solve_local_search,
    solve_subset_dp,
)
from fairsd.weights import (
    build_weights,
    constant_weights,
    marginal_weights,
    independent_weights,
    capacity_weights,
)

from conftest import random_problem, rng_for, to_zero_based


def kendall_disagreements(problem, order):
    return sum(
        problem.beats[s, order[u], order[t]]
        for s in range(problem.m)
        for t in range(problem.n)
        for u in range(t + 1, problem.n)
    )


def brute_force(problem, weights):
    values = {o: evaluate_objective(problem, weights, o) for o in itertools.permutations(range(problem.n))}
    best = min(values.values())
    return best, {o for o, v in values.items() if v == best}


def random_marginals(rng, n):
    """Mixture of a few permutation matrices, so it is doubly stochastic and exact."""
    p = np.full((n, n), Fraction(0), dtype=object)
    raw = [int(x) for x in rng.integers(1, 5, size=3)]
    for w in raw:
        perm = rng.permutation(n)
        for t, s in enumerate(perm):
            p[s, t] += Fraction(w, sum(raw))
    return PositionMarginals(p)


def test_five_agent_kemeny_is_unique(five_agents):
    result = solve_exact(five_agents, constant_weights(5, 5))
    assert result.best_orders == (to_zero_based("2,1,3,4,5"),)
    assert result.objective == 18
    assert kendall_disagreements(five_agents, result.best_orders[0]) == 18


def test_exact_matches_brute_force_kendall():
    rng = rng_for(31, 0)
    for _ in range(30):
        n = int(rng.integers(2, 7))
        problem = random_problem(rng, n)
        w = constant_weights(n, n)
        best, argmin = brute_force(problem, w)
        result = solve_exact(problem, w)
        assert result.objective == best
        assert set(result.best_orders) == argmin
        assert all(kendall_disagreements(problem, o) == best for o in argmin)


@pytest.mark.parametrize("builder", ["prop2", "prop3"])
def test_exact_matches_brute_force_on_position_dependent_weights(builder):
    rng = rng_for(31, 1 if builder == "prop2" else 2)
    for _ in range(15):
        if builder == "prop2":
            n = int(rng.integers(2, 7))
            problem, w = random_problem(rng, n), independent_weights(n)
        else:
            caps = [int(q) for q in rng.integers(1, 3, size=int(rng.integers(2, 4)))]
            problem = random_problem(rng, sum(caps), caps)
            w = capacity_weights(problem)
        best, argmin = brute_force(problem, w)
        result = solve_exact(problem, w)
        assert result.objective == best and set(result.best_orders) == argmin


def test_subset_dp_agrees_with_branch_and_bound():
    rng = rng_for(31, 3)
    for k in range(100):
        n = int(rng.integers(2, 9))
        problem = random_problem(rng, n)
        w = constant_weights(n, n) if k % 2 == 0 else marginal_weights(random_marginals(rng, n))
        a, b = solve_exact(problem, w), solve_subset_dp(problem, w)
        assert a.objective == b.objective
        assert set(a.best_orders) == set(b.best_orders)


def test_subset_dp_refuses_later_position_weights():
    problem = random_problem(rng_for(31, 4), 4)
    with pytest.raises(FairSDError):
        solve_subset_dp(problem, independent_weights(4))
    with pytest.raises(FairSDError):
        solve(problem, independent_weights(4), "dp")


@pytest.mark.parametrize("factor", [Fraction(1, 7), 3, Fraction(22, 5)])
def test_argmin_invariant_under_positive_scaling(factor):
    rng = rng_for(31, 5)
    for _ in range(10):
        problem = random_problem(rng, 5)
        w = independent_weights(5)
        base, scaled = solve_exact(problem, w), solve_exact(problem, w.scaled(factor))
        assert set(base.best_orders) == set(scaled.best_orders)
        assert scaled.objective == base.objective * factor
        assert scaled.expected_envy == base.expected_envy


def test_ties_beyond_limit_keep_lexicographic_first():
    problem = random_problem(rng_for(31, 6), 7)
    zero = constant_weights(7, 7, Fraction(0))
    for result in (solve_exact(problem, zero), solve_subset_dp(problem, zero)):
        assert result.truncated
        assert result.best_orders == (tuple(range(7)),)
    ties = solve_exact(random_problem(rng_for(31, 6), 6), constant_weights(6, 6, Fraction(0)))
    assert not ties.truncated and len(ties.best_orders) == 720 <= MAX_ORDERS


def test_size_caps(monkeypatch):
    problem = random_problem(rng_for(31, 7), 9)
    monkeypatch.setenv("FAIRSD_EXACT_CAP", "8")
    with pytest.raises(SizeCapError):
        solve_exact(problem, constant_weights(9, 9))
    # auto falls back to the DP, which has its own, larger cap
    assert solve(problem, constant_weights(9, 9)).solver_used == "dp"
    assert solve(problem, independent_weights(9)).solver_used == "local"


def test_local_search_close_to_optimum():
    rng = rng_for(31, 8)
    within = 0
    for k in range(100):
        problem = random_problem(rng, 8)
        w = constant_weights(8, 8)
        exact = solve_exact(problem, w).objective
        heuristic = solve_local_search(problem, w, seed=k).objective
        assert heuristic >= exact
        within += heuristic <= exact * Fraction(105, 100)
    assert within >= 95


def test_local_search_finds_optimum_on_small_examples(five_agents, dominance):
    for problem in (five_agents, dominance):
        w = constant_weights(problem.m, problem.n)
        exact = solve_exact(problem, w)
        local = solve_local_search(problem, w, seed=0)
        assert local.objective == exact.objective
        assert local.best_orders[0] in exact.best_orders


def test_local_search_is_seed_deterministic():
    problem = random_problem(rng_for(31, 9), 10)
    w = independent_weights(10)
    assert solve_local_search(problem, w, seed=4) == solve_local_search(problem, w, seed=4)


def test_float_weights_fall_back_to_floats():
    problem = random_problem(rng_for(31, 10), 3)
    p = np.array([[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]])
    w = marginal_weights(PositionMarginals(p))
    result = solve_exact(problem, w)
    best, argmin = brute_force(problem, w)
    assert isinstance(result.objective, float)
    assert abs(result.objective - best) <= 1e-12 * max(1.0, abs(best))
    assert set(result.best_orders) == argmin


def test_known_ranking_order_has_zero_envy():
    rng = rng_for(31, 11)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        problem = random_problem(rng, n)
        ranking = tuple(int(s) for s in rng.permutation(n))
        spec = DistributionSpec.identical_explicit([(ranking, 1)])
        order = known_ranking_order(problem, ranking)
        assert expected_envy_exact(problem, order, spec).mean == 0
        w = build_weights("prop1", problem, spec)
        result = solve(problem, w)
        assert result.objective == 0 and order in result.best_orders


def test_known_ranking_order_needs_unit_square():
    problem = Problem.from_matrix([[0, 1, 2], [1, 2, 0]], [2, 1])
    with pytest.raises(ProblemError):
        known_ranking_order(problem, (0, 1))


def test_objective_is_expected_envy_for_uniform_weights(five_agents):
    spec = DistributionSpec.identical_uniform()
    w = build_weights("thm1", five_agents, spec)
    for order in [(0, 1, 2, 3, 4), to_zero_based("2,1,3,4,5"), (4, 3, 2, 1, 0)]:
        assert evaluate_objective(five_agents, w, order) == expected_envy_exact(five_agents, order, spec).mean
    assert marginals_of(spec, five_agents).exact
