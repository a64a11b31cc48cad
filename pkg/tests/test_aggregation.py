import itertools

import pytest

from fairsd.aggregation import (
    AggregationMethod,
    aggregate,
    borda_order,
    borda_scores,
    coombs_order,
    copeland_order,
    copeland_scores,
    instant_runoff_order,
    kemeny_order,
    plurality_order,
)
from fairsd.core import Problem

from conftest import random_problem, rng_for, to_zero_based

GOLDEN = {
    AggregationMethod.PLURALITY: "2,3,1,4,5",
    AggregationMethod.INSTANT_RUNOFF: "2,1,4,5,3",
    AggregationMethod.COOMBS: "1,3,4,2,5",
    AggregationMethod.COPELAND: "1,2,3,4,5",
    AggregationMethod.BORDA: "1,2,4,3,5",
    AggregationMethod.KEMENY: "2,1,3,4,5",
}


@pytest.mark.parametrize("method", list(AggregationMethod))
def test_five_agent_golden_orders(five_agents, method):
    assert aggregate(method, five_agents) == to_zero_based(GOLDEN[method])
    assert aggregate(method.value, five_agents) == to_zero_based(GOLDEN[method])


def test_five_agent_scores(five_agents):
    assert copeland_scores(five_agents) == [3, 3, 2, 2, 0]
    assert borda_scores(five_agents) == [12, 12, 10, 11, 5]


def test_dominant_agent_goes_first(dominance):
    for method in AggregationMethod:
        assert aggregate(method, dominance)[0] == 1


@pytest.mark.parametrize("method", list(AggregationMethod))
def test_unanimous_priorities_are_reproduced(method):
    rng = rng_for(41, 0)
    for _ in range(10):
        n = int(rng.integers(2, 7))
        ranking = [int(a) for a in rng.permutation(n)]
        problem = Problem.from_matrix([ranking] * n)
        assert aggregate(method, problem) == tuple(ranking)


def test_ties_favour_earlier_agents():
    # two objects with reversed priorities: every count ties
    problem = Problem.from_matrix([[0, 1], [1, 0]])
    assert plurality_order(problem) == (0, 1)
    assert instant_runoff_order(problem) == (0, 1)
    assert coombs_order(problem) == (0, 1)
    assert copeland_order(problem) == (0, 1)
    assert borda_order(problem) == (0, 1)
    assert kemeny_order(problem) == (0, 1)


def test_kemeny_matches_brute_force():
    rng = rng_for(41, 1)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        problem = random_problem(rng, n)

        def cost(order):
            return sum(problem.beats[s, order[u], order[t]]
                       for s in range(n) for t in range(n) for u in range(t + 1, n))

        best = min(itertools.permutations(range(n)), key=lambda o: (cost(o), o))
        assert kemeny_order(problem) == best


def test_outputs_are_permutations():
    rng = rng_for(41, 2)
    for _ in range(20):
        m, n = int(rng.integers(1, 6)), int(rng.integers(1, 7))
        caps = [n] + [1] * (m - 1)
        problem = random_problem(rng, n, caps)
        for method in AggregationMethod:
            assert sorted(aggregate(method, problem)) == list(range(n))


def test_borda_scores_from_ranks():
    rng = rng_for(41, 3)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        problem = random_problem(rng, n)
        from_ranks = [sum(n - 1 - int(problem.priority_rank[s, i]) for s in range(n)) for i in range(n)]
        assert borda_scores(problem) == from_ranks


@pytest.mark.parametrize("prio, expected", [
    ([[1, 0], [1, 0], [0, 1]], (1, 0)),
    ([[0, 1], [1, 0]], (0, 1)),
    ([[1, 0]], (1, 0)),
])
def test_copeland_two_agents_is_majority(prio, expected):
    problem = Problem.from_matrix(prio, [2] + [1] * (len(prio) - 1))
    assert copeland_order(problem) == expected
