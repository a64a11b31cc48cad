"""Expected justified envy of a serial order: exact enumeration, Monte Carlo, oracles.

Everything here runs serial dictatorship on whole batches of profiles at
once (``sd_batch``).  The batched path is checked against the scalar
``run_sd`` / ``count_justified_envy`` pair in the test suite.

Parallel runs split work by index range and reduce in index order, so
results do not depend on the number of workers.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import InfeasibleError, Problem, ProblemError, SerialOrder, check_order
from .distributions import (
    BLOCK_SIZE,
    DistributionSpec,
    Kind,
    sample_block,
    support_arrays,
)
from .solver import SizeCapError, solve_exact
from .weights import build_weights, select_scheme

ORACLE_ORDER_CAP = 8


class Method(str, enum.Enum):
    EXACT = "exact"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class ExpectationResult:
    mean: Fraction | float
    standard_error: float
    method: Method
    samples: int


@dataclass(frozen=True)
class OracleReport:
    oracle_argmin: frozenset[SerialOrder]
    oracle_value: Fraction
    solver_argmin: frozenset[SerialOrder]
    solver_value: Fraction
    scheme: str

    @property
    def agree(self) -> bool:
        return self.oracle_argmin == self.solver_argmin and self.oracle_value == self.solver_value


def sd_batch(problem: Problem, order: Sequence[int], prefs: np.ndarray):
    """Serial dictatorship on every profile of ``prefs`` (``K x n x m``).

    Returns ``(assigned, pref_rank)`` where ``assigned[k, t]`` is the object
    taken at position ``t`` and ``pref_rank[k, i, s]`` is the place of ``s``
    in agent ``i``'s ranking.
    """
    K, n, m = prefs.shape
    pref_rank = np.argsort(prefs, axis=2).astype(np.int64)
    caps = np.tile(np.asarray(problem.capacities, dtype=np.int64), (K, 1))
    assigned = np.empty((K, n), dtype=np.int64)
    rows = np.arange(K)
    for t, agent in enumerate(order):
        r = np.where(caps > 0, pref_rank[:, agent, :], m + 1)
        choice = r.argmin(axis=1)
        if np.any(r[rows, choice] > m):
            raise InfeasibleError(t, agent)
        caps[rows, choice] -= 1
        assigned[:, t] = choice
    return assigned, pref_rank


def _envy_events(problem: Problem, order: Sequence[int], assigned, pref_rank):
    """Yield ``(t, u, envy, justified)`` boolean arrays for every position pair ``t < u``."""
    rows = np.arange(assigned.shape[0])
    prio = problem.priority_rank
    n = len(order)
    for t in range(n):
        j = order[t]
        s_t = assigned[:, t]
        for u in range(t + 1, n):
            i = order[u]
            envy = pref_rank[rows, i, s_t] < pref_rank[rows, i, assigned[:, u]]
            justified = prio[s_t, i] < prio[s_t, j]
            yield t, u, envy, justified


def envy_counts(problem: Problem, order: Sequence[int], prefs: np.ndarray) -> np.ndarray:
    """Number of justified-envy triplets in the SD matching of each profile."""
    assigned, pref_rank = sd_batch(problem, order, prefs)
    counts = np.zeros(prefs.shape[0], dtype=np.int64)
    for _, _, envy, justified in _envy_events(problem, order, assigned, pref_rank):
        counts += envy & justified
    return counts


def _chunks(total: int, size: int):
    return [(a, min(a + size, total)) for a in range(0, total, size)]


def _pool_map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _weighted_sum(values: np.ndarray, weights: np.ndarray) -> int:
    ws = weights.tolist()
    if len(set(ws)) == 1:
        return int(values.sum()) * int(ws[0])
    return sum(int(v) * int(w) for v, w in zip(values.tolist(), ws))


def expected_envy_exact(
    problem: Problem,
    order: Sequence[int],
    spec: DistributionSpec,
    cap: int | None = None,
    workers: int = 1,
) -> ExpectationResult:
    """Exact ``E[N]`` by running SD on every profile in the support."""
    check_order(problem, order)
    prefs, weights, total = support_arrays(spec, problem, cap)
    parts = _pool_map(
        lambda ab: envy_counts(problem, order, prefs[ab[0]:ab[1]]),
        _chunks(len(prefs), 65536),
        workers,
    )
    counts = np.concatenate(parts)
    mean = Fraction(_weighted_sum(counts, weights), total)
    return ExpectationResult(mean, 0.0, Method.EXACT, len(prefs))


def _mc_blocks(problem, spec, seed, samples, fn, workers):
    blocks = range(math.ceil(samples / BLOCK_SIZE))

    def run(b):
        prefs = sample_block(spec, problem, seed, b)
        keep = min(BLOCK_SIZE, samples - b * BLOCK_SIZE)
        return fn(prefs[:keep])

    return _pool_map(run, list(blocks), workers)


def expected_envy_mc(
    problem: Problem,
    order: Sequence[int],
    spec: DistributionSpec,
    samples: int,
    seed: int,
    workers: int = 1,
) -> ExpectationResult:
    """Monte Carlo ``E[N]`` over trials ``0..samples-1`` of the seeded stream."""
    check_order(problem, order)
    if samples < 1:
        raise ProblemError("Monte Carlo needs at least one sample")
    spec.validate(problem)
    parts = _mc_blocks(problem, spec, seed, samples,
                       lambda p: envy_counts(problem, order, p), workers)
    counts = np.concatenate(parts)
    s1 = int(counts.sum())
    s2 = int((counts * counts).sum())
    mean = s1 / samples
    if samples > 1:
        var = Fraction(s2 * samples - s1 * s1, samples * samples * (samples - 1))
        se = math.sqrt(float(var))
    else:
        se = 0.0
    return ExpectationResult(mean, se, Method.MONTE_CARLO, samples)


def match_probability_check(
    problem: Problem,
    order: Sequence[int],
    spec: DistributionSpec,
    samples: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Empirical ``P[s(t) = s]`` over seeded SD runs, shape ``n x m`` (position, object)."""
    check_order(problem, order)
    if spec.kind not in (Kind.IDENTICAL_UNIFORM, Kind.INDEPENDENT_UNIFORM):
        raise ProblemError("match probabilities are checked for uniform distributions only")
    n, m = problem.n, problem.m

    def tally(prefs):
        assigned, _ = sd_batch(problem, order, prefs)
        out = np.zeros((n, m), dtype=np.int64)
        for t in range(n):
            out[t] = np.bincount(assigned[:, t], minlength=m)
        return out

    parts = _mc_blocks(problem, spec, seed, samples, tally, workers)
    return np.sum(parts, axis=0) / samples


@lru_cache(maxsize=8192)
def _joint_envy_counts(spec: DistributionSpec, capacities: tuple[int, ...], n: int, m: int,
                       order: SerialOrder) -> tuple[np.ndarray, int]:
    # Priorities play no part in SD or in (unjustified) envy, so one table
    # serves every problem of this shape.
    shell = Problem.from_matrix([list(range(n))] * m, capacities)
    prefs, weights, total = support_arrays(spec, shell)
    assigned, pref_rank = sd_batch(shell, order, prefs)
    w = np.array(weights.tolist(), dtype=np.int64)
    num = np.zeros((m, n, n), dtype=np.int64)
    for t, u, envy, _ in _envy_events(shell, order, assigned, pref_rank):
        np.add.at(num[:, t, u], assigned[envy, t], w[envy])
    num.flags.writeable = False
    return num, total


def _joint_table(problem: Problem, order: Sequence[int], spec: DistributionSpec):
    """Integer numerators ``num[s, t, u]`` and denominator of the joint envy probabilities."""
    if spec.kind is Kind.FIXED:
        key_order = tuple(order)
    else:
        # exchangeable across agents: the position-level law of SD does not
        # depend on which agent holds which position
        key_order = tuple(range(problem.n))
    return _joint_envy_counts(spec, problem.capacities, problem.n, problem.m, key_order)


def envy_probability_oracle(
    problem: Problem, order: Sequence[int], spec: DistributionSpec
) -> np.ndarray:
    """Exact ``P[agent at u envies the match of agent at t, and that match is s]``.

    Indexed ``[s, t, u]`` (0-based), zero for ``t >= u``.  Computed by running
    SD on the whole support; no weight formula is involved.
    """
    check_order(problem, order)
    spec.validate(problem)
    num, total = _joint_table(problem, order, spec)
    out = np.empty(num.shape, dtype=object)
    for idx, v in np.ndenumerate(num):
        out[idx] = Fraction(int(v), total)
    return out


def expected_envy_by_events(problem: Problem, order: Sequence[int], spec: DistributionSpec) -> Fraction:
    """``E[N]`` summed event by event: joint envy probability times the priority indicator."""
    check_order(problem, order)
    spec.validate(problem)
    num, total = _joint_table(problem, order, spec)
    idx = np.asarray(order)
    # later agent (position u) beats earlier agent (position t) at s
    later_wins = problem.beats[:, idx][:, :, idx].transpose(0, 2, 1)
    return Fraction(int((num * later_wins).sum()), total)


def oracle_optimal_orders(
    problem: Problem, spec: DistributionSpec, scheme: str = "auto"
) -> OracleReport:
    """Brute-force argmin of exact expected envy over all ``n!`` orders, next to the solver's."""
    n = problem.n
    if n > ORACLE_ORDER_CAP:
        raise SizeCapError("order enumeration", n, ORACLE_ORDER_CAP)
    if scheme == "auto":
        scheme = select_scheme(problem, spec)
    values = {
        order: expected_envy_by_events(problem, order, spec)
        for order in itertools.permutations(range(n))
    }
    best = min(values.values())
    oracle = frozenset(o for o, v in values.items() if v == best)
    weights = build_weights(scheme, problem, spec)
    result = solve_exact(problem, weights)
    return OracleReport(
        oracle_argmin=oracle,
        oracle_value=best,
        solver_argmin=frozenset(result.best_orders),
        solver_value=result.expected_envy,
        scheme=scheme,
    )
