"""Rank-aggregation baselines over the objects' priority rankings.

Ties always favour the agent listed earlier in the problem: it wins a
Plurality selection, survives an Instant-Runoff (after the lower-place
comparison described there) or Coombs elimination,
sits higher on a Copeland/Borda score tie, and Kemeny reports the
lexicographically smallest optimal order.
"""

from __future__ import annotations

import enum

from .core import Problem, SerialOrder


class AggregationMethod(str, enum.Enum):
    PLURALITY = "plurality"
    INSTANT_RUNOFF = "instant_runoff"
    COOMBS = "coombs"
    COPELAND = "copeland"
    BORDA = "borda"
    KEMENY = "kemeny"


def _restricted(problem: Problem, left: set[int]) -> list[list[int]]:
    return [[a for a in prio if a in left] for prio in problem.priorities]


def _tally(rankings: list[list[int]], left: set[int], position: int) -> dict[int, int]:
    counts = {a: 0 for a in left}
    for r in rankings:
        counts[r[position]] += 1
    return counts


def plurality_order(problem: Problem) -> SerialOrder:
    """Repeatedly seat the agent ranked first most often among those left."""
    left = set(range(problem.n))
    order = []
    while left:
        counts = _tally(_restricted(problem, left), left, 0)
        pick = min(left, key=lambda a: (-counts[a], a))
        order.append(pick)
        left.discard(pick)
    return tuple(order)


def instant_runoff_order(problem: Problem) -> SerialOrder:
    """Repeatedly send the agent ranked first least often to the bottom.

    Agents tied on first places are compared on second places, then third,
    and only then by index.  First places alone cannot separate the agents
    below the top when every object shares one priority ranking.
    """
    left = set(range(problem.n))
    bottom = []
    while left:
        rankings = _restricted(problem, left)
        counts = {a: [0] * len(left) for a in left}
        for r in rankings:
            for place, a in enumerate(r):
                counts[a][place] += 1
        out = min(left, key=lambda a: (counts[a], -a))
        bottom.append(out)
        left.discard(out)
    return tuple(reversed(bottom))


def coombs_order(problem: Problem) -> SerialOrder:
    """Repeatedly send the agent ranked last most often to the bottom."""
    left = set(range(problem.n))
    bottom = []
    while left:
        counts = _tally(_restricted(problem, left), left, -1)
        out = max(left, key=lambda a: (counts[a], a))
        bottom.append(out)
        left.discard(out)
    return tuple(reversed(bottom))


def copeland_scores(problem: Problem) -> list[int]:
    # strict majority of objects; an exact split gives neither agent a point
    wins = problem.beats.sum(axis=0)
    m = problem.m
    return [sum(1 for j in range(problem.n) if j != i and 2 * wins[i, j] > m) for i in range(problem.n)]


def copeland_order(problem: Problem) -> SerialOrder:
    scores = copeland_scores(problem)
    return tuple(sorted(range(problem.n), key=lambda a: (-scores[a], a)))


def borda_scores(problem: Problem) -> list[int]:
    """Number of (object, lower-priority agent) pairs below each agent."""
    below = problem.beats.sum(axis=(0, 2))
    return [int(x) for x in below]


def borda_order(problem: Problem) -> SerialOrder:
    scores = borda_scores(problem)
    return tuple(sorted(range(problem.n), key=lambda a: (-scores[a], a)))


def kemeny_order(problem: Problem) -> SerialOrder:
    from .solver import DP_CAP, solve_local_search, solve_subset_dp
    from .weights import constant_weights

    weights = constant_weights(problem.m, problem.n)
    if problem.n <= DP_CAP:
        return solve_subset_dp(problem, weights).best_orders[0]
    return solve_local_search(problem, weights).best_orders[0]


_METHODS = {
    AggregationMethod.PLURALITY: plurality_order,
    AggregationMethod.INSTANT_RUNOFF: instant_runoff_order,
    AggregationMethod.COOMBS: coombs_order,
    AggregationMethod.COPELAND: copeland_order,
    AggregationMethod.BORDA: borda_order,
    AggregationMethod.KEMENY: kemeny_order,
}


def aggregate(method: AggregationMethod | str, problem: Problem) -> SerialOrder:
    return _METHODS[AggregationMethod(method)](problem)
