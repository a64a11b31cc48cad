"""Command-line interface.

Exit codes: 0 success, 1 verification failure, 2 invalid input,
3 incompatible flags / weight scheme, 4 size or support cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

from .aggregation import AggregationMethod, aggregate
from .core import FairSDError, PreferenceProfile, ProblemError, count_justified_envy, run_sd
from .distributions import SupportTooLargeError
from .evaluation import expected_envy_exact, expected_envy_mc
from .problem_file import ProblemFileError, load_problem, load_profile
from .solver import SizeCapError, solve
from .verify import run_verify
from .weights import SCHEMES, WeightSchemeError, build_weights

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_INVALID, EXIT_INCOMPATIBLE, EXIT_CAP = 0, 1, 2, 3, 4


class UsageError(FairSDError):
    pass


def number(x) -> dict:
    """Exact fraction (when available) plus decimal rendering."""
    if isinstance(x, (int, Fraction)):
        x = Fraction(x)
        return {"fraction": f"{x.numerator}/{x.denominator}", "decimal": float(x)}
    return {"fraction": None, "decimal": float(x)}


def _emit(report, output: str | None) -> None:
    text = report if isinstance(report, str) else json.dumps(report, indent=2, sort_keys=True) + "\n"
    if output and output != "-":
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _order_arg(problem, text: str):
    names = [x.strip() for x in text.split(",") if x.strip()]
    return problem.order_from_names(names)


def cmd_solve(args) -> int:
    problem, spec = load_problem(args.problem)
    weights = build_weights(args.weights, problem, spec)
    try:
        result = solve(problem, weights, args.solver, seed=args.seed, restarts=args.restarts)
    except FairSDError as exc:
        if isinstance(exc, SizeCapError):
            raise
        raise WeightSchemeError(str(exc)) from None
    _emit({
        "command": "solve",
        "scheme": weights.scheme,
        "weight_class": weights.weight_class.value,
        "solver": result.solver_used,
        "orders": [problem.order_names(o) for o in result.best_orders],
        "truncated": result.truncated,
        "objective": number(result.objective),
        "envy_scale": number(result.envy_scale),
        "expected_envy": number(result.expected_envy),
        "nodes_explored": result.nodes_explored,
    }, args.output)
    return EXIT_OK


def cmd_run(args) -> int:
    problem, spec = load_problem(args.problem)
    order = _order_arg(problem, args.order)
    if args.profile:
        profile = load_profile(args.profile, problem)
    elif args.ranking:
        names = [x.strip() for x in args.ranking.split(",")]
        try:
            ranking = [problem.object_index(x) for x in names]
        except ProblemError as exc:
            raise ProblemFileError(f"field ranking: {exc}") from None
        profile = PreferenceProfile.identical(ranking, problem.n)
    elif spec.profile is not None:
        profile = spec.profile
    else:
        raise UsageError("run needs --profile, --ranking or a fixed distribution in the problem file")
    profile.validate(problem)
    matching = run_sd(problem, profile, order)
    envy = count_justified_envy(problem, profile, matching)
    _emit({
        "command": "run",
        "order": problem.order_names(order),
        "matching": {problem.agents[i]: problem.objects[s] for i, s in enumerate(matching.assignment)},
        "envy": {
            "count": envy.count,
            "triplets": [
                {"envier": problem.agents[i], "envied": problem.agents[j], "object": problem.objects[s]}
                for i, j, s in envy.triplets
            ],
        },
    }, args.output)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    problem, spec = load_problem(args.problem)
    order = _order_arg(problem, args.order)
    if args.method == "exact":
        result = expected_envy_exact(problem, order, spec, workers=args.workers)
    else:
        if args.samples is None or args.seed is None:
            raise UsageError("--method mc requires --samples and --seed")
        result = expected_envy_mc(problem, order, spec, args.samples, args.seed, workers=args.workers)
    _emit({
        "command": "evaluate",
        "order": problem.order_names(order),
        "distribution": spec.kind.value,
        "method": result.method.value,
        "mean": number(result.mean),
        "standard_error": result.standard_error,
        "samples": result.samples,
        "seed": args.seed,
    }, args.output)
    return EXIT_OK


def cmd_baselines(args) -> int:
    problem, spec = load_problem(args.problem)
    rows = []
    for method in AggregationMethod:
        order = aggregate(method, problem)
        try:
            envy = number(expected_envy_exact(problem, order, spec).mean)
        except SupportTooLargeError:
            envy = None
        rows.append({"method": method.value, "order": problem.order_names(order), "expected_envy": envy})
    _emit({"command": "baselines", "distribution": spec.kind.value, "baselines": rows}, args.output)
    return EXIT_OK


def cmd_weights(args) -> int:
    problem, spec = load_problem(args.problem)
    weights = build_weights(args.weights, problem, spec)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["object", "t", "t_prime", "weight", "decimal"])
    for s, t, u, w in weights.rows():
        writer.writerow([problem.objects[s], t, u, str(w), repr(float(w))])
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if not 2 <= args.max_n <= 8:
        raise UsageError("--max-n must be between 2 and 8")
    suites = run_verify(args.max_n, args.trials, args.seed, args.workers)
    ok = all(s.passed for s in suites)
    _emit({
        "command": "verify",
        "max_n": args.max_n,
        "trials": args.trials,
        "seed": args.seed,
        "all_passed": ok,
        "suites": [s.as_dict() for s in suites],
    }, args.output)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairsd", description="Justified-envy-minimising serial orders for serial dictatorship."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, problem=True):
        if problem:
            p.add_argument("problem", help="problem file (YAML or JSON)")
        p.add_argument("-o", "--output", help="write the report here instead of stdout")

    p = sub.add_parser("solve", help="optimal serial order(s) under a weight scheme")
    common(p)
    p.add_argument("--weights", choices=[*SCHEMES, "auto"], default="auto")
    p.add_argument("--solver", choices=["exact", "dp", "local", "auto"], default="auto")
    p.add_argument("--seed", type=int, default=0, help="local-search seed")
    p.add_argument("--restarts", type=int, default=5, help="local-search random restarts")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("run", help="run SD on one profile and list justified envy")
    common(p)
    p.add_argument("--order", required=True, help="comma-separated agent names")
    p.add_argument("--profile", help="file mapping agent -> ranked objects")
    p.add_argument("--ranking", help="comma-separated objects, shared by every agent")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="expected justified envy of an order")
    common(p)
    p.add_argument("--order", required=True, help="comma-separated agent names")
    p.add_argument("--method", choices=["exact", "mc"], default="exact")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baselines", help="the six rank-aggregation orders and their expected envy")
    common(p)
    p.set_defaults(func=cmd_baselines)

    p = sub.add_parser("weights", help="export a weight matrix as CSV (object, t, t_prime, weight)")
    common(p)
    p.add_argument("--weights", choices=[*SCHEMES, "auto"], default="auto")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("verify", help="run the randomised oracle-vs-solver suites")
    common(p, problem=False)
    p.add_argument("--max-n", type=int, default=4)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except WeightSchemeError as exc:
        code = EXIT_INCOMPATIBLE
        msg = exc
    except (SizeCapError, SupportTooLargeError) as exc:
        code = EXIT_CAP
        msg = exc
    except (ProblemFileError, ProblemError, UsageError) as exc:
        code = EXIT_INVALID
        msg = exc
    except FairSDError as exc:
        code = EXIT_INVALID
        msg = exc
    print(f"fairsd {args.command}: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
