"""Problem files: YAML (or JSON) documents describing a problem and a preference distribution.

Example::

    agents: ["1", "2", "3"]
    objects:
      - {name: a, capacity: 1}
      - {name: b, capacity: 1}
      - {name: c, capacity: 1}
    priorities:
      a: ["2", "3", "1"]
      b: ["2", "1", "3"]
      c: ["2", "1", "3"]
    distribution:
      kind: identical_explicit
      rankings:
        - {ranking: [a, b, c], prob: "1/2"}
        - {ranking: [c, b, a], prob: "1/2"}

``distribution`` defaults to ``{kind: identical_uniform}``.  Other kinds:
``independent_uniform`` and ``fixed`` (with ``profiles: {agent: [objects...]}``).
"""

from __future__ import annotations

from pathlib import Path

import jsonschema
import yaml

from .core import FairSDError, PreferenceProfile, Problem, ProblemError
from .distributions import DistributionSpec, Kind

_NAME = {"type": ["string", "integer"]}
_NAMES = {"type": "array", "items": _NAME}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["agents", "objects", "priorities"],
    "properties": {
        "agents": {**_NAMES, "minItems": 1},
        "objects": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name"],
                "properties": {"name": _NAME, "capacity": {"type": "integer", "minimum": 1}},
            },
        },
        "priorities": {"type": "object", "additionalProperties": _NAMES},
        "distribution": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": [k.value for k in Kind]},
                "rankings": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["ranking", "prob"],
                        "properties": {"ranking": _NAMES, "prob": {"type": ["string", "number"]}},
                    },
                },
                "profiles": {"type": "object", "additionalProperties": _NAMES},
            },
        },
    },
}


class ProblemFileError(FairSDError):
    """The document does not describe a valid problem; the message names the field."""


class _StrictLoader(yaml.SafeLoader):
    pass


def _no_duplicate_keys(loader, node, deep=False):
    seen = set()
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            raise ProblemFileError(f"duplicate key {key!r} (line {key_node.start_mark.line + 1})")
        seen.add(key)
    return loader.construct_mapping(node, deep)


_StrictLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _no_duplicate_keys)


def _stringify_keys(obj):
    if isinstance(obj, dict):
        return {str(k): _stringify_keys(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_stringify_keys(v) for v in obj]
    return obj


def parse_problem(text: str) -> tuple[Problem, DistributionSpec]:
    try:
        doc = yaml.load(text, Loader=_StrictLoader)
    except yaml.YAMLError as exc:
        raise ProblemFileError(f"not valid YAML/JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ProblemFileError("top level must be a mapping")
    doc = _stringify_keys(doc)
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ProblemFileError(f"field {where}: {exc.message}") from None

    agents = [str(a) for a in doc["agents"]]
    objects = [str(o["name"]) for o in doc["objects"]]
    capacities = {str(o["name"]): int(o.get("capacity", 1)) for o in doc["objects"]}
    priorities = {k: [str(a) for a in v] for k, v in doc["priorities"].items()}
    for field, names in (("agents", agents), ("objects", objects)):
        dupes = sorted({x for x in names if names.count(x) > 1})
        if dupes:
            raise ProblemFileError(f"field {field}: duplicate name(s) {', '.join(dupes)}")
    unknown = sorted(set(priorities) - set(objects))
    missing = sorted(set(objects) - set(priorities))
    if unknown or missing:
        raise ProblemFileError(
            f"field priorities: unknown objects {unknown}, missing objects {missing}"
        )
    for obj, ranking in priorities.items():
        if sorted(ranking) != sorted(agents):
            raise ProblemFileError(f"field priorities/{obj}: must list every agent exactly once")
    try:
        problem = Problem.from_names(agents, objects, priorities, capacities)
    except ProblemError as exc:
        raise ProblemFileError(str(exc)) from None
    spec = _parse_distribution(doc.get("distribution", {"kind": "identical_uniform"}), problem)
    return problem, spec


def _object_ranking(problem: Problem, names, field: str) -> tuple[int, ...]:
    try:
        ranking = tuple(problem.object_index(str(x)) for x in names)
    except ProblemError as exc:
        raise ProblemFileError(f"field {field}: {exc}") from None
    if sorted(ranking) != list(range(problem.m)):
        raise ProblemFileError(f"field {field}: must rank every object exactly once")
    return ranking


def _parse_distribution(doc: dict, problem: Problem) -> DistributionSpec:
    kind = Kind(doc["kind"])
    extra = {"rankings", "profiles"} & set(doc)
    allowed = {Kind.IDENTICAL_EXPLICIT: {"rankings"}, Kind.FIXED: {"profiles"}}.get(kind, set())
    if extra - allowed:
        raise ProblemFileError(
            f"field distribution: {', '.join(sorted(extra - allowed))} not allowed for kind {kind.value}"
        )
    if kind is Kind.IDENTICAL_EXPLICIT:
        if "rankings" not in doc:
            raise ProblemFileError("field distribution/rankings: required for identical_explicit")
        pairs = []
        for k, entry in enumerate(doc["rankings"]):
            ranking = _object_ranking(problem, entry["ranking"], f"distribution/rankings/{k}/ranking")
            pairs.append((ranking, entry["prob"]))
        try:
            spec = DistributionSpec.identical_explicit(pairs)
        except (ValueError, ZeroDivisionError) as exc:
            raise ProblemFileError(f"field distribution/rankings: bad probability ({exc})") from None
    elif kind is Kind.FIXED:
        if "profiles" not in doc:
            raise ProblemFileError("field distribution/profiles: required for fixed")
        spec = DistributionSpec.fixed(parse_profile(doc["profiles"], problem, "distribution/profiles"))
    else:
        spec = DistributionSpec(kind)
    try:
        spec.validate(problem)
    except ProblemError as exc:
        raise ProblemFileError(f"field distribution: {exc}") from None
    return spec


def parse_profile(doc: dict, problem: Problem, field: str = "profile") -> PreferenceProfile:
    """A mapping agent name -> ranked list of object names."""
    if not isinstance(doc, dict):
        raise ProblemFileError(f"field {field}: must map agent names to rankings")
    doc = _stringify_keys(doc)
    unknown = sorted(set(doc) - set(problem.agents))
    missing = [a for a in problem.agents if a not in doc]
    if unknown or missing:
        raise ProblemFileError(f"field {field}: unknown agents {unknown}, missing agents {missing}")
    prefs = tuple(_object_ranking(problem, doc[a], f"{field}/{a}") for a in problem.agents)
    return PreferenceProfile(prefs)


def load_profile(path: str | Path, problem: Problem) -> PreferenceProfile:
    try:
        doc = yaml.load(Path(path).read_text(), Loader=_StrictLoader)
    except (OSError, yaml.YAMLError) as exc:
        raise ProblemFileError(f"cannot read profile: {exc}") from None
    return parse_profile(doc, problem)


def load_problem(path: str | Path) -> tuple[Problem, DistributionSpec]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read problem file: {exc}") from None
    return parse_problem(text)


def problem_document(problem: Problem, spec: DistributionSpec | None = None) -> dict:
    doc = {
        "agents": list(problem.agents),
        "objects": [{"name": o, "capacity": q} for o, q in zip(problem.objects, problem.capacities)],
        "priorities": {
            o: [problem.agents[a] for a in prio] for o, prio in zip(problem.objects, problem.priorities)
        },
    }
    if spec is not None:
        dist: dict = {"kind": spec.kind.value}
        if spec.kind is Kind.IDENTICAL_EXPLICIT:
            dist["rankings"] = [
                {"ranking": [problem.objects[s] for s in r], "prob": str(p)} for r, p in spec.rankings
            ]
        elif spec.kind is Kind.FIXED:
            dist["profiles"] = {
                a: [problem.objects[s] for s in r] for a, r in zip(problem.agents, spec.profile.prefs)
            }
        doc["distribution"] = dist
    return doc


def dump_problem(problem: Problem, spec: DistributionSpec | None = None) -> str:
    """Canonical YAML text; ``parse_problem`` reads it back to an identical problem."""
    return yaml.safe_dump(problem_document(problem, spec), sort_keys=False, default_flow_style=None)
