from pathlib import Path

import numpy as np
import pytest

from fairsd.core import Problem

ROOT = Path(__file__).resolve().parent.parent
PROBLEMS = ROOT / "problems"

# agent indices (0-based), best first, one row per object a..e
FIVE_AGENT_PRIORITIES = [
    [0, 3, 2, 1, 4],
    [4, 0, 2, 3, 1],
    [1, 2, 3, 0, 4],
    [1, 2, 0, 3, 4],
    [3, 1, 0, 4, 2],
]
DOMINANCE_PRIORITIES = [
    [1, 2, 0],
    [1, 0, 2],
    [1, 0, 2],
]


def to_zero_based(names: str) -> tuple[int, ...]:
    return tuple(int(x) - 1 for x in names.split(","))


@pytest.fixture
def five_agents() -> Problem:
    return Problem.from_matrix(FIVE_AGENT_PRIORITIES)


@pytest.fixture
def dominance() -> Problem:
    return Problem.from_matrix(DOMINANCE_PRIORITIES)


def rng_for(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def random_problem(rng, n, capacities=None) -> Problem:
    m = len(capacities) if capacities is not None else n
    return Problem.from_matrix([rng.permutation(n).tolist() for _ in range(m)], capacities)
