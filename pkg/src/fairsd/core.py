"""Priority-based matching problems, serial dictatorship and justified envy.

Agents and objects are referred to by dense indices ``0..n-1`` / ``0..m-1``
everywhere inside the library; names only appear at the boundary (problem
files, CLI reports).  Serial-order positions are 0-based in Python and
rendered 1-based in every serialized report.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

SerialOrder = tuple[int, ...]


class FairSDError(Exception):
    """Base class for all library errors."""


class ProblemError(FairSDError, ValueError):
    """Malformed problem, profile or order."""


class InfeasibleError(FairSDError):
    """Serial dictatorship ran out of capacity before every agent was matched."""

    def __init__(self, position: int, agent: int):
        self.position = position
        self.agent = agent
        super().__init__(
            f"no object has remaining capacity at position {position + 1} (agent index {agent})"
        )


@dataclass(frozen=True)
class Problem:
    """A matching problem ``(I, S, priorities, capacities)``.

    ``priorities[s]`` lists agent indices from highest to lowest priority at
    object ``s``.
    """

    agents: tuple[str, ...]
    objects: tuple[str, ...]
    capacities: tuple[int, ...]
    priorities: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        n, m = len(self.agents), len(self.objects)
        if n == 0 or m == 0:
            raise ProblemError("problem needs at least one agent and one object")
        if len(set(self.agents)) != n:
            raise ProblemError("duplicate agent identifiers")
        if len(set(self.objects)) != m:
            raise ProblemError("duplicate object identifiers")
        if len(self.capacities) != m or len(self.priorities) != m:
            raise ProblemError("capacities and priorities must have one entry per object")
        for s, q in enumerate(self.capacities):
            if int(q) != q or q < 1:
                raise ProblemError(f"capacity of object {self.objects[s]!r} must be an integer >= 1")
        for s, prio in enumerate(self.priorities):
            if sorted(prio) != list(range(n)):
                raise ProblemError(
                    f"priority of object {self.objects[s]!r} is not a strict ranking of all agents"
                )
        if sum(self.capacities) < n:
            raise ProblemError(
                f"total capacity {sum(self.capacities)} is below the number of agents {n}"
            )

    @classmethod
    def from_names(
        cls,
        agents: Sequence[str],
        objects: Sequence[str],
        priorities: Mapping[str, Sequence[str]],
        capacities: Mapping[str, int] | None = None,
    ) -> "Problem":
        agents = tuple(str(a) for a in agents)
        objects = tuple(str(o) for o in objects)
        index = {a: i for i, a in enumerate(agents)}
        if set(priorities) != set(objects):
            raise ProblemError("priorities must be given for exactly the listed objects")
        prio = []
        for o in objects:
            try:
                prio.append(tuple(index[str(a)] for a in priorities[o]))
            except KeyError as exc:
                raise ProblemError(f"priority of object {o!r} names unknown agent {exc.args[0]!r}")
        caps = tuple(int((capacities or {}).get(o, 1)) for o in objects)
        return cls(agents, objects, caps, tuple(prio))

    @classmethod
    def from_matrix(cls, priorities: Sequence[Sequence[int]], capacities: Sequence[int] | None = None):
        """Build a problem with agents ``"1".."n"`` and objects ``"s1".."sm"``."""
        m, n = len(priorities), len(priorities[0])
        caps = tuple(capacities) if capacities is not None else (1,) * m
        return cls(
            tuple(str(i + 1) for i in range(n)),
            tuple(f"s{k + 1}" for k in range(m)),
            caps,
            tuple(tuple(int(a) for a in row) for row in priorities),
        )

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return len(self.objects)

    @property
    def unit_capacities(self) -> bool:
        return all(q == 1 for q in self.capacities)

    @cached_property
    def priority_rank(self) -> np.ndarray:
        """``priority_rank[s, i]`` is agent ``i``'s 0-based place in object ``s``'s ranking."""
        rank = np.empty((self.m, self.n), dtype=np.int64)
        for s, prio in enumerate(self.priorities):
            rank[s, list(prio)] = np.arange(self.n)
        return rank

    @cached_property
    def beats(self) -> np.ndarray:
        """Boolean ``beats[s, i, j]``: agent ``i`` has higher priority than ``j`` at ``s``."""
        r = self.priority_rank
        return r[:, :, None] < r[:, None, :]

    def agent_index(self, name: str) -> int:
        try:
            return self.agents.index(str(name))
        except ValueError:
            raise ProblemError(f"unknown agent {name!r}") from None

    def object_index(self, name: str) -> int:
        try:
            return self.objects.index(str(name))
        except ValueError:
            raise ProblemError(f"unknown object {name!r}") from None

    def order_from_names(self, names: Iterable[str]) -> SerialOrder:
        order = tuple(self.agent_index(a) for a in names)
        check_order(self, order)
        return order

    def order_names(self, order: Sequence[int]) -> list[str]:
        return [self.agents[i] for i in order]


@dataclass(frozen=True)
class PreferenceProfile:
    """One strict ranking of all objects (object indices, best first) per agent."""

    prefs: tuple[tuple[int, ...], ...]

    @classmethod
    def identical(cls, ranking: Sequence[int], n: int) -> "PreferenceProfile":
        return cls(tuple(tuple(ranking) for _ in range(n)))

    def validate(self, problem: Problem) -> None:
        if len(self.prefs) != problem.n:
            raise ProblemError(f"profile has {len(self.prefs)} rankings for {problem.n} agents")
        for i, ranking in enumerate(self.prefs):
            if sorted(ranking) != list(range(problem.m)):
                raise ProblemError(
                    f"preference of agent {problem.agents[i]!r} is not a strict ranking of all objects"
                )

    def rank(self) -> np.ndarray:
        """``rank[i, s]``: 0-based place of object ``s`` in agent ``i``'s ranking."""
        p = np.asarray(self.prefs, dtype=np.int64)
        out = np.empty_like(p)
        rows = np.arange(p.shape[0])[:, None]
        out[rows, p] = np.arange(p.shape[1])
        return out

    def prefers(self, agent: int, a: int, b: int) -> bool:
        """Strict preference ``a P_agent b``."""
        ranking = self.prefs[agent]
        return ranking.index(a) < ranking.index(b)


@dataclass(frozen=True)
class Matching:
    """``assignment[i]`` is the object index matched to agent ``i``."""

    assignment: tuple[int, ...]

    def __getitem__(self, agent: int) -> int:
        return self.assignment[agent]

    def is_feasible(self, problem: Problem) -> bool:
        load = np.bincount(self.assignment, minlength=problem.m)
        return len(self.assignment) == problem.n and bool(np.all(load <= problem.capacities))


@dataclass(frozen=True)
class EnvyReport:
    """Justified-envy triplets ``(envier i, envied j, object s = mu(j))``."""

    triplets: tuple[tuple[int, int, int], ...]

    @property
    def count(self) -> int:
        return len(self.triplets)


def check_order(problem: Problem, order: Sequence[int]) -> None:
    if sorted(order) != list(range(problem.n)):
        missing = sorted(set(range(problem.n)) - set(order))
        detail = f"; missing {', '.join(problem.agents[i] for i in missing)}" if missing else ""
        raise ProblemError(f"serial order is not a permutation of the agents{detail}")


def run_sd(problem: Problem, profile: PreferenceProfile, order: Sequence[int]) -> Matching:
    """Serial dictatorship: each agent in ``order`` takes their favourite object with seats left."""
    check_order(problem, order)
    profile.validate(problem)
    remaining = list(problem.capacities)
    assignment = [-1] * problem.n
    for t, agent in enumerate(order):
        for s in profile.prefs[agent]:
            if remaining[s] > 0:
                remaining[s] -= 1
                assignment[agent] = s
                break
        else:
            raise InfeasibleError(t, agent)
    return Matching(tuple(assignment))


def count_justified_envy(
    problem: Problem, profile: PreferenceProfile, matching: Matching
) -> EnvyReport:
    # Plain double loop over ordered pairs; serves as the reference the batched
    # evaluators are checked against.
    rank = problem.priority_rank
    triplets = []
    for i in range(problem.n):
        own = matching[i]
        for j in range(problem.n):
            s = matching[j]
            if i == j or s == own:
                continue
            if profile.prefers(i, s, own) and rank[s, i] < rank[s, j]:
                triplets.append((i, j, s))
    return EnvyReport(tuple(triplets))


def non_dominated_agents(
    problem: Problem, remaining_agents: Iterable[int], remaining_objects: Iterable[int]
) -> set[int]:
    """Agents not priority-dominated by another remaining agent.

    ``j`` dominates ``i`` when every remaining object ranks ``j`` above ``i``.
    """
    agents = sorted(set(remaining_agents))
    objects = sorted(set(remaining_objects))
    if not agents or not objects:
        raise ProblemError("remaining agents and objects must be nonempty")
    beats = problem.beats[objects]
    return {
        i
        for i in agents
        if not any(beats[:, j, i].all() for j in agents if j != i)
    }
