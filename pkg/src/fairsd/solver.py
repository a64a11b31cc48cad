"""Minimise the weighted pairwise-disagreement objective over serial orders.

Objective for an order ``rho`` (0-based positions)::

    sum_s sum_{t < u} w(s, t, u) * [rho(u) beats rho(t) at s]

Exact ``Fraction`` weights are rescaled to integers by their common
denominator, so ties and argmin sets are decided in exact arithmetic.
Float weights fall back to comparisons at 1e-12 relative tolerance.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import FairSDError, Problem, ProblemError, SerialOrder, check_order
from .weights import WeightClass, WeightMatrix

DEFAULT_EXACT_CAP = 12
DP_CAP = 20
DP_ENUMERATE_CAP = 12
MAX_ORDERS = 1000
REL_TOL = 1e-12


def exact_cap() -> int:
    return int(os.environ.get("FAIRSD_EXACT_CAP", DEFAULT_EXACT_CAP))


class SizeCapError(FairSDError):
    def __init__(self, what: str, n: int, cap: int, hint: str = ""):
        self.n = n
        self.cap = cap
        super().__init__(f"{what}: n={n} exceeds cap {cap}{'; ' + hint if hint else ''}")


@dataclass(frozen=True)
class SolveResult:
    best_orders: tuple[SerialOrder, ...]
    objective: Fraction | float
    solver_used: str
    nodes_explored: int
    truncated: bool = False
    envy_scale: Fraction | float = Fraction(1)

    @property
    def expected_envy(self):
        """Objective converted to expected justified envy (see ``WeightMatrix.envy_scale``)."""
        return self.objective * self.envy_scale


class _CostModel:
    """Integer (or float) copy of the weights plus the priority comparison tensor."""

    def __init__(self, problem: Problem, weights: WeightMatrix):
        if (weights.m, weights.n) != (problem.m, problem.n):
            raise ProblemError(
                f"weights are sized for m={weights.m}, n={weights.n} but the problem has "
                f"m={problem.m}, n={problem.n}"
            )
        self.n, self.m = problem.n, problem.m
        vals = weights.values()
        self.exact = all(isinstance(x, (int, Fraction)) for x in vals.flat)
        if self.exact:
            fr = [Fraction(x) for x in vals.flat]
            denom = math.lcm(*(x.denominator for x in fr)) if fr else 1
            ints = [x.numerator * (denom // x.denominator) for x in fr]
            bound = max(ints, default=0) * max(1, self.m * self.n * self.n)
            dtype = np.int64 if bound < 2**62 else object
            self.W = np.array(ints, dtype=dtype).reshape(vals.shape)
            self.scale = Fraction(1, denom)
        else:
            self.W = np.array([float(x) for x in vals.flat], dtype=float).reshape(vals.shape)
            self.scale = 1.0
        self.D = problem.beats

    def raw(self, order: Sequence[int]):
        idx = np.asarray(order)
        dp = self.D[:, idx][:, :, idx]  # dp[s, a, b]: agent at a beats agent at b
        total = (self.W * dp.transpose(0, 2, 1)).sum()
        return int(total) if self.exact else float(total)

    def real(self, raw):
        return raw * self.scale if self.exact else float(raw)

    def tol(self, ref) -> float:
        return 0 if self.exact else REL_TOL * max(1.0, abs(ref))

    def pair_costs(self) -> np.ndarray:
        """``C[t, u, x, y]``: cost of agent ``x`` at ``t`` and ``y`` at ``u`` (zero unless t < u)."""
        n = self.n
        C = np.zeros((n, n, n, n), dtype=self.W.dtype)
        for s in range(self.m):
            C = C + self.W[s][:, :, None, None] * self.D[s].T[None, None, :, :].astype(self.W.dtype)
        return C


def evaluate_objective(problem: Problem, weights: WeightMatrix, order: Sequence[int]):
    """Weighted disagreement of ``order``: a ``Fraction`` for exact weights, else ``float``."""
    check_order(problem, order)
    model = _CostModel(problem, weights)
    return model.real(model.raw(order))


def solve_exact(
    problem: Problem,
    weights: WeightMatrix,
    cap: int | None = None,
    max_orders: int = MAX_ORDERS,
) -> SolveResult:
    """Depth-first branch and bound over prefixes; returns every optimal order.

    Admissible bound at a node with positions ``0..k-1`` filled: the prefix
    cost, plus for each unordered pair of unplaced agents the cheapest
    orientation over free position pairs, plus for each (placed, unplaced)
    pair the cheapest free later position.  When more than ``max_orders``
    optima exist only the lexicographically smallest is kept.
    """
    n = problem.n
    cap = exact_cap() if cap is None else cap
    if n > cap:
        raise SizeCapError("exact search", n, cap, "use the local-search solver")
    model = _CostModel(problem, weights)
    C = model.pair_costs()

    big = np.iinfo(np.int64).max // 4 if model.W.dtype == np.int64 else math.inf
    valid = np.triu(np.ones((n, n), dtype=bool), 1)
    masked = np.where(valid[:, :, None, None], C, big)
    both = np.minimum(masked, masked.transpose(0, 1, 3, 2))
    # pair_lb[k][x][y]: cheapest placement of the pair {x, y} within positions >= k
    pair_lb = []
    for k in range(n + 1):
        sub = both[k:, k:]
        pair_lb.append(sub.min(axis=(0, 1)).tolist() if sub.size and n - k >= 2 else None)
    # cross_lb[t][k][x][y]: x fixed at t, y somewhere in positions >= k
    suffix = np.minimum.accumulate(masked[:, ::-1], axis=1)[:, ::-1]
    cross_lb = suffix.tolist()
    Cl = C.tolist()

    best = [model.raw(sorted(range(n)))]  # any order is a valid upper bound
    found: list[tuple[int, ...]] = []
    truncated = [False]
    nodes = [0]
    prefix: list[int] = []

    def bound_rest(k: int, remaining: list[int]):
        lb = 0
        if len(remaining) >= 2:
            pl = pair_lb[k]
            for a_i, a in enumerate(remaining):
                row = pl[a]
                for b in remaining[a_i + 1 :]:
                    lb += row[b]
        if remaining:
            for t, x in enumerate(prefix):
                row = cross_lb[t][k][x]
                for y in remaining:
                    lb += row[y]
        return lb

    def dfs(cost, remaining: list[int]):
        nodes[0] += 1
        k = len(prefix)
        if not remaining:
            tol = model.tol(best[0])
            if cost < best[0] - tol:
                best[0] = cost
                found.clear()
                found.append(tuple(prefix))
                truncated[0] = False
            elif cost <= best[0] + tol and not truncated[0]:
                found.append(tuple(prefix))
                if len(found) > max_orders:
                    del found[1:]
                    truncated[0] = True
            return
        for x in list(remaining):
            inc = 0
            for t, a in enumerate(prefix):
                inc += Cl[t][k][a][x]
            rest = [y for y in remaining if y != x]
            prefix.append(x)
            lb = cost + inc + bound_rest(k + 1, rest)
            tol = model.tol(best[0])
            if lb > best[0] + tol or (truncated[0] and lb >= best[0] - tol):
                prefix.pop()
                continue
            dfs(cost + inc, rest)
            prefix.pop()

    dfs(0, list(range(n)))
    return SolveResult(
        best_orders=tuple(found),
        objective=model.real(best[0]),
        solver_used="exact",
        nodes_explored=nodes[0],
        truncated=truncated[0],
        envy_scale=weights.envy_scale,
    )


def solve_subset_dp(
    problem: Problem,
    weights: WeightMatrix,
    enumerate_all: bool = True,
    max_orders: int = MAX_ORDERS,
) -> SolveResult:
    """Exact DP over the set of already-placed agents.

    Only valid when ``w(s, t, u)`` does not depend on ``u``: placing agent
    ``i`` at position ``t = |A|`` then costs ``sum_s w(s, t) * #{j not in A,
    j != i : j beats i at s}``, a function of ``(A, i)`` alone.
    """
    if weights.weight_class not in (WeightClass.CONSTANT, WeightClass.EARLIER_POSITION):
        raise FairSDError(
            f"subset DP is unsound for {weights.weight_class.value} weights "
            "(cost depends on the later position); use the exact solver"
        )
    n, m = problem.n, problem.m
    if n > DP_CAP:
        raise SizeCapError("subset DP", n, DP_CAP, "use the local-search solver")
    model = _CostModel(problem, weights)
    dtype = model.W.dtype
    early = np.zeros((m, n), dtype=dtype)
    if n >= 2:
        early[:, : n - 1] = model.W[:, np.arange(n - 1), np.arange(1, n)]
    above = np.zeros((m, n), dtype=np.int64)  # above[s, i]: bitmask of agents beating i at s
    for s in range(m):
        for i in range(n):
            above[s, i] = sum(1 << j for j in range(n) if model.D[s, j, i])

    size = 1 << n
    full = size - 1
    masks = np.arange(size, dtype=np.int64)
    popcount = np.zeros(size, dtype=np.int64)
    for b in range(n):
        popcount += (masks >> b) & 1
    layers = [masks[popcount == k] for k in range(n + 1)]

    def inc_vec(sel: np.ndarray, i: int, k: int):
        out = np.zeros(len(sel), dtype=dtype)
        free = ~sel & full
        for s in range(m):
            w = early[s, k]
            if w:
                out = out + w * popcount[above[s, i] & free]
        return out

    g = np.zeros(size, dtype=dtype)  # optimal cost to complete from placed set
    if dtype == object:
        g[...] = 0
        sentinel = 10**100
    elif dtype == np.int64:
        sentinel = np.iinfo(np.int64).max
    else:
        sentinel = np.inf
    for k in range(n - 1, -1, -1):
        layer = layers[k]
        cur = np.full(len(layer), sentinel, dtype=dtype)
        for i in range(n):
            free_i = ((layer >> i) & 1) == 0
            sel = layer[free_i]
            val = inc_vec(sel, i, k) + g[sel | (1 << i)]
            cur[free_i] = np.minimum(cur[free_i], val)
        g[layer] = cur

    def inc_one(mask: int, i: int):
        k = bin(mask).count("1")
        free = ~mask & full
        total = 0
        for s in range(m):
            total += early[s, k] * bin(int(above[s, i]) & free).count("1")
        return total

    optimum = g[0].item() if hasattr(g[0], "item") else g[0]
    orders: list[tuple[int, ...]] = []
    truncated = False
    limit = max_orders if enumerate_all and n <= DP_ENUMERATE_CAP else 1

    def walk(mask: int, prefix: list[int]):
        nonlocal truncated
        if len(orders) > limit:
            return
        if mask == full:
            orders.append(tuple(prefix))
            return
        target = g[mask]
        tol = model.tol(target)
        for i in range(n):
            if mask >> i & 1:
                continue
            if abs(inc_one(mask, i) + g[mask | 1 << i] - target) <= tol:
                prefix.append(i)
                walk(mask | 1 << i, prefix)
                prefix.pop()
                if len(orders) > limit:
                    return

    walk(0, [])
    if len(orders) > limit:
        truncated = limit > 1
        orders = orders[:1]
    return SolveResult(
        best_orders=tuple(orders),
        objective=model.real(int(optimum) if model.exact else optimum),
        solver_used="dp",
        nodes_explored=size,
        truncated=truncated,
        envy_scale=weights.envy_scale,
    )


def _insertion_descent(model: _CostModel, order: list[int], evals: list[int]):
    n = len(order)
    cur = model.raw(order)
    evals[0] += 1
    improved = True
    while improved:
        improved = False
        for a in range(n):
            agent = order[a]
            base = order[:a] + order[a + 1 :]
            for b in range(n):
                if b == a:
                    continue
                cand = base[:b] + [agent] + base[b:]
                val = model.raw(cand)
                evals[0] += 1
                if val < cur - model.tol(cur):
                    order, cur = cand, val
                    improved = True
                    break
            if improved:
                break
    return order, cur


def solve_local_search(
    problem: Problem, weights: WeightMatrix, seed: int = 0, restarts: int = 5
) -> SolveResult:
    """First-improvement insertion search from the Borda order plus ``restarts`` random orders."""
    from .aggregation import borda_order

    model = _CostModel(problem, weights)
    n = problem.n
    starts = [list(borda_order(problem))]
    for r in range(restarts):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), r])))
        starts.append([int(x) for x in rng.permutation(n)])
    evals = [0]
    best_order, best_val = None, None
    for start in starts:
        order, val = _insertion_descent(model, start, evals)
        if best_val is None or val < best_val - model.tol(best_val) or (
            abs(val - best_val) <= model.tol(best_val) and tuple(order) < best_order
        ):
            best_order, best_val = tuple(order), val
    return SolveResult(
        best_orders=(best_order,),
        objective=model.real(best_val),
        solver_used="local",
        nodes_explored=evals[0],
        envy_scale=weights.envy_scale,
    )


def solve(problem: Problem, weights: WeightMatrix, solver: str = "auto", seed: int = 0,
          restarts: int = 5) -> SolveResult:
    if solver == "auto":
        if weights.weight_class in (WeightClass.CONSTANT, WeightClass.EARLIER_POSITION) and problem.n <= DP_CAP:
            solver = "dp"
        elif problem.n <= exact_cap():
            solver = "exact"
        else:
            solver = "local"
    if solver == "exact":
        return solve_exact(problem, weights)
    if solver == "dp":
        return solve_subset_dp(problem, weights)
    if solver == "local":
        return solve_local_search(problem, weights, seed=seed, restarts=restarts)
    raise ValueError(f"unknown solver {solver!r}")


def known_ranking_order(problem: Problem, ranking: Sequence[int]) -> SerialOrder:
    """Zero-envy order when every agent shares the known ranking ``ranking`` of objects.

    Step ``t`` seats the highest-priority remaining agent of the ``t``-th object.
    """
    if not problem.unit_capacities or problem.m != problem.n:
        raise ProblemError("the known-ranking construction needs unit capacities and m == n")
    placed: list[int] = []
    left = set(range(problem.n))
    for s in ranking:
        pick = next(a for a in problem.priorities[s] if a in left)
        placed.append(pick)
        left.discard(pick)
    return tuple(placed)
