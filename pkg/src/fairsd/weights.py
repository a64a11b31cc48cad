"""Weight matrices for the weighted pairwise-disagreement objective.

A weight ``w(s, t, u)`` (positions ``t < u``, 0-based) is charged whenever
the agent placed at ``u`` has higher priority at object ``s`` than the
agent placed at ``t``.  Four builders cover the settings where the weighted
objective is proven to track expected justified envy:

* ``uniform_weights`` -- identical, uniformly drawn preferences, unit seats;
* ``marginal_weights`` -- identical preferences with known position marginals;
* ``independent_weights`` -- independent uniform preferences, unit seats;
* ``capacity_weights`` -- identical uniform preferences, arbitrary capacities.

All builders return exact ``Fraction`` weights.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator

import numpy as np

from .core import FairSDError, Problem
from .distributions import DistributionSpec, Kind, PositionMarginals, marginals_of

DENSE_CAP = 64


class WeightSchemeError(FairSDError):
    """A weight scheme was requested outside the setting it is valid for."""


class WeightClass(str, enum.Enum):
    CONSTANT = "constant"
    EARLIER_POSITION = "earlier_position"  # depends on (s, t) only
    PAIRWISE_POSITION = "pairwise_position"  # depends on (t, u) only
    FULL = "full"


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Nonnegative weights over (object, earlier position, later position).

    ``envy_scale`` reconciles objective values with expected envy:
    ``E[N] = envy_scale * objective``.
    """

    m: int
    n: int
    weight_class: WeightClass
    scheme: str
    envy_scale: Fraction
    cell_fn: Callable[[int, int, int], Fraction] = field(repr=False)
    _dense: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._spot_check()

    def cell(self, s: int, t: int, u: int) -> Fraction:
        if not (0 <= s < self.m and 0 <= t < u < self.n):
            raise IndexError(f"no weight cell ({s}, {t}, {u}) for m={self.m}, n={self.n}")
        if self._dense:
            return self._dense[0][s, t, u]
        return self.cell_fn(s, t, u)

    def values(self) -> np.ndarray:
        """Dense ``m x n x n`` object array; entries with ``t >= u`` are zero."""
        if self._dense:
            return self._dense[0]
        arr = np.zeros((self.m, self.n, self.n), dtype=object)
        arr[...] = Fraction(0)
        for s in range(self.m):
            for t in range(self.n):
                for u in range(t + 1, self.n):
                    arr[s, t, u] = self.cell_fn(s, t, u)
        if self.n <= DENSE_CAP:
            self._dense.append(arr)
        return arr

    @property
    def exact(self) -> bool:
        return all(isinstance(x, (int, Fraction)) for x in self.values().flat)

    def rows(self) -> Iterator[tuple[int, int, int, Fraction]]:
        """``(object, t, u, weight)`` with 1-based positions, for tabular export."""
        vals = self.values()
        for s in range(self.m):
            for t in range(self.n):
                for u in range(t + 1, self.n):
                    yield s, t + 1, u + 1, vals[s, t, u]

    def _spot_check(self) -> None:
        if self.n <= DENSE_CAP:
            self.values()
        cells = [
            (s, t, u)
            for s in range(self.m)
            for t in range(self.n)
            for u in range(t + 1, self.n)
        ]
        if len(cells) > 500:
            step = len(cells) // 500 + 1
            cells = cells[::step]
        if not cells:
            return
        ref = self.cell(*cells[0])
        for s, t, u in cells:
            w = self.cell(s, t, u)
            if w < 0:
                raise WeightSchemeError(f"negative weight at ({s}, {t}, {u})")
            if self.weight_class is WeightClass.CONSTANT:
                ok = w == ref
            elif self.weight_class is WeightClass.EARLIER_POSITION:
                ok = w == self.cell(s, t, t + 1)
            elif self.weight_class is WeightClass.PAIRWISE_POSITION:
                ok = w == self.cell(0, t, u)
            else:
                ok = True
            if not ok:
                raise WeightSchemeError(
                    f"weight at ({s}, {t}, {u}) contradicts declared class {self.weight_class.value}"
                )

    def scaled(self, factor) -> "WeightMatrix":
        factor = Fraction(factor) if not isinstance(factor, float) else factor
        vals = self.values()
        return WeightMatrix(
            self.m, self.n, self.weight_class, self.scheme, self.envy_scale / factor,
            lambda s, t, u: vals[s, t, u] * factor,
        )


def _require_unit_square(problem: Problem, scheme: str) -> None:
    if not problem.unit_capacities or problem.m != problem.n:
        raise WeightSchemeError(
            f"{scheme} weights need unit capacities and as many objects as agents; "
            "use the capacity-aware scheme (prop3) instead"
        )


def constant_weights(m: int, n: int, value=Fraction(1)) -> WeightMatrix:
    """Plain Kemeny weights: every disagreement costs ``value``."""
    return WeightMatrix(m, n, WeightClass.CONSTANT, "kemeny", Fraction(1),
                        lambda s, t, u: value)


def uniform_weights(problem: Problem) -> WeightMatrix:
    """Constant weight ``1/n``: every disagreement is equally likely to become justified envy."""
    _require_unit_square(problem, "thm1")
    w = Fraction(1, problem.n)
    return WeightMatrix(problem.m, problem.n, WeightClass.CONSTANT, "thm1", Fraction(1),
                        lambda s, t, u: w)


def marginal_weights(marginals: PositionMarginals) -> WeightMatrix:
    """Weight ``p(s, t)``: the chance object ``s`` is the ``t``-th entry of the common ranking."""
    p = marginals.p
    m = n = p.shape[0]
    return WeightMatrix(m, n, WeightClass.EARLIER_POSITION, "prop1", Fraction(1),
                        lambda s, t, u: p[s, t])


def independent_envy_probability(n: int, t: int, u: int) -> Fraction:
    """Probability that the agent at ``u`` envies the match of the agent at ``t`` (0-based, t < u).

    Sum over ``k`` of the ways the agent's ``k`` favourite remaining objects
    get absorbed by the ``u - t - 1`` intermediate dictators before that agent.
    """
    def left(pos: int) -> int:  # |S_pos| with 0-based pos
        return n - pos

    gap = u - t - 1
    total = Fraction(1)
    for k in range(1, gap + 1):
        total += Fraction(math.comb(gap, k) * math.factorial(k),
                          math.prod(left(t + i) for i in range(1, k + 1)))
    return total / left(t)


def independent_weights(n: int) -> WeightMatrix:
    """Envy probabilities ``p(u, t)``; the constant ``1/n`` match probability is factored out."""
    if n < 1:
        raise WeightSchemeError("independent weights need n >= 1")
    table = {(t, u): independent_envy_probability(n, t, u) for t in range(n) for u in range(t + 1, n)}
    return WeightMatrix(n, n, WeightClass.PAIRWISE_POSITION, "prop2", Fraction(1, n),
                        lambda s, t, u: table[t, u])


def subset_counts(capacities: list[int]) -> list[dict[int, int]]:
    """``counts[k][Q]``: number of ``k``-subsets of ``capacities`` with capacity sum ``Q``."""
    counts: list[dict[int, int]] = [dict() for _ in range(len(capacities) + 1)]
    counts[0][0] = 1
    for q in capacities:
        for k in range(len(capacities) - 1, -1, -1):
            for total, c in list(counts[k].items()):
                counts[k + 1][total + q] = counts[k + 1].get(total + q, 0) + c
    return counts


def _capacity_tables(problem: Problem):
    m = problem.m
    for s in range(m):
        others = [q for r, q in enumerate(problem.capacities) if r != s]
        counts = subset_counts(others)
        # (probability that s is the (k+1)-th ranked object behind this particular
        # set of predecessors) summed over predecessor sets with capacity total Q
        yield s, [
            (Q, Fraction(c, m * math.comb(m - 1, k)))
            for k, row in enumerate(counts)
            for Q, c in sorted(row.items())
        ]


def capacity_weights(problem: Problem) -> WeightMatrix:
    """Capacity-aware weights ``P[s(t) = s and s is full before u]`` under identical uniform preferences.

    Object ``s`` is taken at (1-based) position ``t`` iff the capacity ``Q`` of
    the objects ranked above it satisfies ``Q < t <= Q + q_s``; the agent at
    ``u`` then envies iff ``s`` filled up before that agent picks, ``Q + q_s < u``.
    Predecessor sets are aggregated by (size, capacity sum) instead of being
    enumerated.
    """
    n, m = problem.n, problem.m
    arr = np.zeros((m, n, n), dtype=object)
    arr[...] = Fraction(0)
    for s, terms in _capacity_tables(problem):
        q = problem.capacities[s]
        for Q, prob in terms:
            full = Q + q  # 1-based position of the last seat of s
            for t1 in range(Q + 1, min(full, n) + 1):
                for u1 in range(max(full + 1, t1 + 1), n + 1):
                    arr[s, t1 - 1, u1 - 1] += prob
    return WeightMatrix(m, n, WeightClass.FULL, "prop3", Fraction(1),
                        lambda s, t, u: arr[s, t, u])


def capacity_match_probability(problem: Problem) -> np.ndarray:
    """``P[s(t) = s]`` under identical uniform preferences, shape ``m x n``."""
    out = np.zeros((problem.m, problem.n), dtype=object)
    out[...] = Fraction(0)
    for s, terms in _capacity_tables(problem):
        q = problem.capacities[s]
        for Q, prob in terms:
            for t1 in range(Q + 1, min(Q + q, problem.n) + 1):
                out[s, t1 - 1] += prob
    return out


SCHEMES = ("thm1", "prop1", "prop2", "prop3")


def select_scheme(problem: Problem, spec: DistributionSpec) -> str:
    """The weight scheme whose optimality result covers ``(spec, capacities)``."""
    square_unit = problem.unit_capacities and problem.m == problem.n
    if spec.kind is Kind.IDENTICAL_UNIFORM:
        return "thm1" if square_unit else "prop3"
    if spec.kind is Kind.IDENTICAL_EXPLICIT and square_unit:
        return "prop1"
    if spec.kind is Kind.INDEPENDENT_UNIFORM and square_unit:
        return "prop2"
    raise WeightSchemeError(
        f"no weight scheme covers a {spec.kind.value} distribution with "
        f"{'unit' if problem.unit_capacities else 'non-unit'} capacities and "
        f"m={problem.m}, n={problem.n}"
    )


def build_weights(scheme: str, problem: Problem, spec: DistributionSpec) -> WeightMatrix:
    """Build ``scheme`` weights, refusing schemes that do not match the distribution."""
    if scheme == "auto":
        scheme = select_scheme(problem, spec)
    expected = {
        "thm1": (Kind.IDENTICAL_UNIFORM,),
        "prop1": (Kind.IDENTICAL_EXPLICIT, Kind.IDENTICAL_UNIFORM),
        "prop2": (Kind.INDEPENDENT_UNIFORM,),
        "prop3": (Kind.IDENTICAL_UNIFORM,),
    }
    if scheme not in expected:
        raise WeightSchemeError(f"unknown weight scheme {scheme!r}")
    if spec.kind not in expected[scheme]:
        raise WeightSchemeError(
            f"{scheme} weights do not apply to distribution kind {spec.kind.value}"
        )
    if scheme == "thm1":
        return uniform_weights(problem)
    if scheme == "prop1":
        _require_unit_square(problem, "prop1")
        return marginal_weights(marginals_of(spec, problem))
    if scheme == "prop2":
        _require_unit_square(problem, "prop2")
        return independent_weights(problem.n)
    return capacity_weights(problem)
