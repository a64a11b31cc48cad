"""Preference distributions: seeded samplers, exact enumerators, position marginals.

Randomness is counter based.  Trials are grouped into fixed blocks of
``BLOCK_SIZE``; block ``b`` of root seed ``seed`` draws from a Philox stream
keyed by ``SeedSequence([seed, b])``.  A trial's profile therefore depends
only on ``(seed, trial)``, never on how trials are split across workers.
"""

from __future__ import annotations

import enum
import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .core import FairSDError, PreferenceProfile, Problem, ProblemError

BLOCK_SIZE = 4096
DEFAULT_SUPPORT_CAP = 2_000_000


def support_cap() -> int:
    return int(os.environ.get("FAIRSD_SUPPORT_CAP", DEFAULT_SUPPORT_CAP))


class SupportTooLargeError(FairSDError):
    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"support size {size:,} exceeds the enumeration cap {cap:,}")


class Kind(str, enum.Enum):
    IDENTICAL_UNIFORM = "identical_uniform"
    IDENTICAL_EXPLICIT = "identical_explicit"
    INDEPENDENT_UNIFORM = "independent_uniform"
    FIXED = "fixed"


def to_fraction(value) -> Fraction:
    """Exact probability from an int, string (``"1/3"``, ``"0.25"``) or float (decimal repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value))


@dataclass(frozen=True)
class DistributionSpec:
    kind: Kind
    rankings: tuple[tuple[tuple[int, ...], Fraction], ...] = ()
    profile: PreferenceProfile | None = None

    @classmethod
    def identical_uniform(cls) -> "DistributionSpec":
        return cls(Kind.IDENTICAL_UNIFORM)

    @classmethod
    def independent_uniform(cls) -> "DistributionSpec":
        return cls(Kind.INDEPENDENT_UNIFORM)

    @classmethod
    def identical_explicit(cls, rankings: Iterable[tuple[Sequence[int], object]]) -> "DistributionSpec":
        pairs = tuple((tuple(int(s) for s in r), to_fraction(p)) for r, p in rankings)
        return cls(Kind.IDENTICAL_EXPLICIT, rankings=pairs)

    @classmethod
    def fixed(cls, profile: PreferenceProfile) -> "DistributionSpec":
        return cls(Kind.FIXED, profile=profile)

    def validate(self, problem: Problem) -> None:
        if self.kind is Kind.IDENTICAL_EXPLICIT:
            if not self.rankings:
                raise ProblemError("identical_explicit distribution needs at least one ranking")
            seen = set()
            for ranking, p in self.rankings:
                if sorted(ranking) != list(range(problem.m)):
                    raise ProblemError("explicit ranking is not a permutation of the objects")
                if ranking in seen:
                    raise ProblemError("explicit rankings must be distinct")
                seen.add(ranking)
                if p < 0:
                    raise ProblemError("ranking probabilities must be nonnegative")
            total = sum(p for _, p in self.rankings)
            if abs(total - 1) > Fraction(1, 10**12):
                raise ProblemError(f"ranking probabilities sum to {float(total)!r}, not 1")
        elif self.kind is Kind.FIXED:
            if self.profile is None:
                raise ProblemError("fixed distribution needs a profile")
            self.profile.validate(problem)

    @property
    def identical(self) -> bool:
        return self.kind in (Kind.IDENTICAL_UNIFORM, Kind.IDENTICAL_EXPLICIT)


@dataclass(frozen=True, eq=False)
class PositionMarginals:
    """``p[s, t]``: probability object ``s`` sits at position ``t`` of the common ranking.

    Built either from a distribution (``marginals_of``) or from a raw matrix.
    A raw matrix does not determine a distribution, so marginals are only
    ever used to build weights, never to sample.
    """

    p: np.ndarray

    def __post_init__(self):
        p = self.p
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ProblemError("position marginals must be a square objects x positions matrix")
        tol = 1e-12
        vals = np.vectorize(float, otypes=[float])(p)
        if np.any(vals < -tol) or np.any(vals > 1 + tol):
            raise ProblemError("position marginals must lie in [0, 1]")
        rows = [sum(p[s, :]) for s in range(p.shape[0])]
        cols = [sum(p[:, t]) for t in range(p.shape[1])]
        if any(abs(float(x) - 1) > tol for x in rows + cols):
            raise ProblemError("position marginals are not doubly stochastic")

    @classmethod
    def from_matrix(cls, matrix) -> "PositionMarginals":
        rows = [[to_fraction(x) for x in row] for row in matrix]
        arr = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=object)
        for s, row in enumerate(rows):
            arr[s, :] = row
        return cls(arr)

    @property
    def exact(self) -> bool:
        return all(isinstance(x, (int, Fraction)) for x in self.p.flat)


def _pref_dtype(m: int):
    return np.int8 if m <= 127 else np.int16


def support_size(spec: DistributionSpec, problem: Problem) -> int:
    if spec.kind is Kind.IDENTICAL_UNIFORM:
        return math.factorial(problem.m)
    if spec.kind is Kind.INDEPENDENT_UNIFORM:
        return math.factorial(problem.m) ** problem.n
    if spec.kind is Kind.IDENTICAL_EXPLICIT:
        return len(spec.rankings)
    return 1


def _check_cap(spec: DistributionSpec, problem: Problem, cap: int | None) -> int:
    size = support_size(spec, problem)
    cap = support_cap() if cap is None else cap
    if size > cap:
        raise SupportTooLargeError(size, cap)
    return size


def support_arrays(
    spec: DistributionSpec, problem: Problem, cap: int | None = None
) -> tuple[np.ndarray, np.ndarray, int]:
    """Exact support as arrays.

    Returns ``(prefs, weights, total)``: ``prefs[k, i]`` is agent ``i``'s
    ranking in profile ``k`` (shape ``K x n x m``) and profile ``k`` has
    probability ``weights[k] / total`` (python ints, so exact).
    """
    spec.validate(problem)
    size = _check_cap(spec, problem, cap)
    n, m = problem.n, problem.m
    if spec.kind is Kind.IDENTICAL_UNIFORM:
        perms = np.array(list(itertools.permutations(range(m))), dtype=_pref_dtype(m))
        prefs = np.repeat(perms[:, None, :], n, axis=1)
        return prefs, np.ones(size, dtype=object), size
    if spec.kind is Kind.INDEPENDENT_UNIFORM:
        perms = np.array(list(itertools.permutations(range(m))), dtype=_pref_dtype(m))
        idx = np.indices((len(perms),) * n).reshape(n, -1).T
        return perms[idx], np.ones(size, dtype=object), size
    if spec.kind is Kind.IDENTICAL_EXPLICIT:
        probs = [p for _, p in spec.rankings]
        total = math.lcm(*(p.denominator for p in probs))
        weights = np.array([p.numerator * (total // p.denominator) for p in probs], dtype=object)
        perms = np.array([r for r, _ in spec.rankings], dtype=_pref_dtype(m))
        # normalising by the weight sum absorbs the 1e-12 slack validate() allows
        return np.repeat(perms[:, None, :], n, axis=1), weights, int(sum(weights))
    prefs = np.array(spec.profile.prefs, dtype=_pref_dtype(m))[None]
    return prefs, np.ones(1, dtype=object), 1


def enumerate_support(
    spec: DistributionSpec, problem: Problem, cap: int | None = None
) -> list[tuple[PreferenceProfile, Fraction]]:
    prefs, weights, total = support_arrays(spec, problem, cap)
    return [
        (PreferenceProfile(tuple(tuple(int(s) for s in r) for r in prof)), Fraction(int(w), total))
        for prof, w in zip(prefs, weights)
    ]


def marginals_of(spec: DistributionSpec, problem: Problem) -> PositionMarginals:
    m = problem.m
    if spec.kind is Kind.IDENTICAL_UNIFORM:
        p = np.full((m, m), Fraction(1, m), dtype=object)
        return PositionMarginals(p)
    if spec.kind is Kind.IDENTICAL_EXPLICIT:
        spec.validate(problem)
        p = np.full((m, m), Fraction(0), dtype=object)
        for ranking, prob in spec.rankings:
            for t, s in enumerate(ranking):
                p[s, t] += prob
        return PositionMarginals(p)
    raise ProblemError(f"position marginals are undefined for {spec.kind.value} distributions")


def _block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def sample_block(spec: DistributionSpec, problem: Problem, seed: int, block: int) -> np.ndarray:
    """Profiles for trials ``block*BLOCK_SIZE .. (block+1)*BLOCK_SIZE - 1``, shape ``B x n x m``."""
    n, m = problem.n, problem.m
    rng = _block_generator(seed, block)
    if spec.kind is Kind.IDENTICAL_UNIFORM:
        base = np.tile(np.arange(m, dtype=_pref_dtype(m)), (BLOCK_SIZE, 1))
        perms = rng.permuted(base, axis=1)
        return np.repeat(perms[:, None, :], n, axis=1)
    if spec.kind is Kind.INDEPENDENT_UNIFORM:
        base = np.tile(np.arange(m, dtype=_pref_dtype(m)), (BLOCK_SIZE * n, 1))
        return rng.permuted(base, axis=1).reshape(BLOCK_SIZE, n, m)
    if spec.kind is Kind.IDENTICAL_EXPLICIT:
        perms = np.array([r for r, _ in spec.rankings], dtype=_pref_dtype(m))
        cum = np.cumsum([float(p) for _, p in spec.rankings])
        idx = np.searchsorted(cum, rng.random(BLOCK_SIZE) * cum[-1], side="right")
        idx = np.minimum(idx, len(perms) - 1)
        return np.repeat(perms[idx][:, None, :], n, axis=1)
    prof = np.array(spec.profile.prefs, dtype=_pref_dtype(m))
    return np.repeat(prof[None], BLOCK_SIZE, axis=0)


def sample_profiles(
    spec: DistributionSpec, problem: Problem, seed: int, start: int, count: int
) -> np.ndarray:
    """Profiles for trials ``start .. start+count-1`` as a ``count x n x m`` array."""
    spec.validate(problem)
    if count <= 0:
        return np.empty((0, problem.n, problem.m), dtype=_pref_dtype(problem.m))
    first, last = start // BLOCK_SIZE, (start + count - 1) // BLOCK_SIZE
    chunks = [sample_block(spec, problem, seed, b) for b in range(first, last + 1)]
    offset = start - first * BLOCK_SIZE
    return np.concatenate(chunks)[offset : offset + count]


def sample_profile(spec: DistributionSpec, problem: Problem, seed: int, trial: int) -> PreferenceProfile:
    if spec.kind is Kind.FIXED:
        spec.validate(problem)
        return spec.profile
    arr = sample_profiles(spec, problem, seed, trial, 1)[0]
    return PreferenceProfile(tuple(tuple(int(s) for s in r) for r in arr))
