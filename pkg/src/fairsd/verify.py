"""Randomised equivalence suites: brute-force optimal orders against the weighted solver.

Each trial draws its instance from ``SeedSequence([seed, suite, trial])``,
so a report depends only on ``(max_n, trials, seed)`` and not on the number
of workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import Problem
from .distributions import DistributionSpec
from .evaluation import (
    expected_envy_exact,
    expected_envy_mc,
    match_probability_check,
    oracle_optimal_orders,
)
from .problem_file import dump_problem

SUITES = ("uniform", "marginal", "independent", "capacity", "match_probability", "mc_calibration")
MC_SAMPLES = 2000
MATCH_SAMPLES = 100_000


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    failures: int = 0
    required_pass_rate: float = 1.0
    counterexample: str | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        if self.checks == 0:
            return False
        return (self.checks - self.failures) >= self.required_pass_rate * self.checks

    def as_dict(self) -> dict:
        return {
            "suite": self.name,
            "passed": self.passed,
            "checks": self.checks,
            "failures": self.failures,
            "required_pass_rate": self.required_pass_rate,
            "first_counterexample": self.counterexample,
            "notes": self.notes,
        }


def _rng(seed: int, suite: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, suite, trial])))


def random_problem(rng: np.random.Generator, n: int, capacities=None) -> Problem:
    m = len(capacities) if capacities is not None else n
    prio = [[int(a) for a in rng.permutation(n)] for _ in range(m)]
    return Problem.from_matrix(prio, capacities)


def random_explicit_spec(rng: np.random.Generator, m: int, max_support: int = 6) -> DistributionSpec:
    size = int(rng.integers(1, max_support + 1))
    rankings: list[tuple[int, ...]] = []
    while len(rankings) < size:
        r = tuple(int(s) for s in rng.permutation(m))
        if r not in rankings:
            rankings.append(r)
        if len(rankings) == np.prod(range(1, m + 1)):
            break
    raw = [int(x) for x in rng.integers(1, 10, size=len(rankings))]
    total = sum(raw)
    return DistributionSpec.identical_explicit([(r, Fraction(w, total)) for r, w in zip(rankings, raw)])


def _equivalence_trial(suite: str, seed: int, trial: int, max_n: int):
    idx = SUITES.index(suite)
    rng = _rng(seed, idx, trial)
    if suite == "uniform":
        problem, spec, scheme = random_problem(rng, max_n), DistributionSpec.identical_uniform(), "thm1"
    elif suite == "marginal":
        problem = random_problem(rng, max_n)
        spec, scheme = random_explicit_spec(rng, max_n), "prop1"
    elif suite == "independent":
        n = min(max_n, 4)
        problem, spec, scheme = random_problem(rng, n), DistributionSpec.independent_uniform(), "prop2"
    else:
        while True:
            m = int(rng.integers(2, 4))
            caps = [int(q) for q in rng.integers(1, 4, size=m)]
            if 2 <= sum(caps) <= 6:
                break
        problem = random_problem(rng, sum(caps), caps)
        spec, scheme = DistributionSpec.identical_uniform(), "prop3"
    report = oracle_optimal_orders(problem, spec, scheme)
    return report.agree, (problem, spec)


def _mc_trial(seed: int, trial: int, max_n: int):
    rng = _rng(seed, SUITES.index("mc_calibration"), trial)
    problem = random_problem(rng, max_n)
    order = tuple(int(a) for a in rng.permutation(max_n))
    spec = DistributionSpec.identical_uniform() if trial % 2 == 0 else DistributionSpec.independent_uniform()
    exact = expected_envy_exact(problem, order, spec).mean
    mc = expected_envy_mc(problem, order, spec, MC_SAMPLES, seed=int(rng.integers(2**31)))
    if mc.standard_error == 0:
        ok = Fraction(mc.mean) == exact
    else:
        ok = abs(mc.mean - float(exact)) <= 3 * mc.standard_error
    return ok, (problem, spec)


def match_probability_cases(seed: int) -> list[tuple[Problem, DistributionSpec, int]]:
    """The two match-probability instances and the sampling seed each one uses."""
    idx = SUITES.index("match_probability")
    cases = [
        (Problem.from_matrix([list(range(5))] * 5), DistributionSpec.independent_uniform()),
        (Problem.from_matrix([list(range(6))] * 3, [2, 2, 2]), DistributionSpec.identical_uniform()),
    ]
    return [
        (problem, spec, int(np.random.SeedSequence([seed, idx, case]).generate_state(1)[0]))
        for case, (problem, spec) in enumerate(cases)
    ]


def match_probability_z(problem: Problem, spec: DistributionSpec, case_seed: int, workers: int = 1) -> np.ndarray:
    """Per-cell deviation from ``1/m`` in binomial standard errors."""
    freq = match_probability_check(problem, tuple(range(problem.n)), spec, MATCH_SAMPLES, case_seed, workers)
    p = 1 / problem.m
    return (freq - p) / (p * (1 - p) / MATCH_SAMPLES) ** 0.5


def _match_probability_checks(seed: int, workers: int) -> list[tuple[bool, Problem, DistributionSpec]]:
    out = []
    for problem, spec, case_seed in match_probability_cases(seed):
        z = match_probability_z(problem, spec, case_seed, workers)
        out.append((bool(np.all(np.abs(z) <= 3)), problem, spec))
    return out


def _run_trials(fn, trials: int, workers: int):
    if workers <= 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


def run_suite(name: str, max_n: int = 4, trials: int = 100, seed: int = 1, workers: int = 1) -> SuiteResult:
    if name == "match_probability":
        result = SuiteResult(name)
        for ok, problem, spec in _match_probability_checks(seed, workers):
            result.checks += 1
            if not ok:
                result.failures += 1
                result.counterexample = result.counterexample or dump_problem(problem, spec)
        return result
    if name == "mc_calibration":
        outcomes = _run_trials(lambda t: _mc_trial(seed, t, max_n), trials, workers)
        result = SuiteResult(name, required_pass_rate=0.99)
    else:
        outcomes = _run_trials(lambda t: _equivalence_trial(name, seed, t, max_n), trials, workers)
        result = SuiteResult(name)
    for ok, (problem, spec) in outcomes:
        result.checks += 1
        if not ok:
            result.failures += 1
            if result.counterexample is None:
                result.counterexample = dump_problem(problem, spec)
    return result


def run_verify(max_n: int = 4, trials: int = 100, seed: int = 1, workers: int = 1) -> list[SuiteResult]:
    return [run_suite(name, max_n, trials, seed, workers) for name in SUITES]
