"""Command-line entry point: ``corrprophet {gen,run,scan,repro,oracle}``.

Exit status is 0 on success, 1 when a reproduction check fails and 2 on
usage errors (bad flags, unknown names, malformed inputs).
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

from .harness import (
    ALGORITHMS,
    GENERATORS,
    ExperimentSpec,
    build_source,
    run_experiment,
    scan_csv,
    scan_thresholds,
    write_csv,
)
from .model import LinearInstance, load_instance
from .oracle import DP_CAP, best_fixed_threshold, exact_online_optimum, exact_prophet_value
from .suites import SUITE_ALIASES, SUITES, reproduce


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _source_from_args(args) -> dict:
    if args.instance and args.gen:
        raise UsageError("pass either --instance or --gen, not both")
    if args.instance:
        return {"instance": load_instance(args.instance).to_dict()}
    if args.gen:
        return {"generator": args.gen, "params": json.loads(args.params or "{}")}
    raise UsageError("an instance is required (--instance PATH or --gen NAME --params JSON)")


def _cmd_gen(args) -> int:
    params = json.loads(args.params or "{}")
    if args.seed is not None and args.generator == "random-sparse":
        params.setdefault("seed", args.seed)
    made = build_source({"generator": args.generator, "params": params})
    if not isinstance(made, LinearInstance):
        raise UsageError(f"generator {args.generator!r} does not produce a linear instance")
    _emit(made.to_json(), args.out)
    return 0


def _cmd_run(args) -> int:
    params = json.loads(args.algo_params or "{}")
    if args.epsilon is not None:
        params["epsilon"] = args.epsilon
    if args.eps_prime is not None:
        params["eps_prime"] = args.eps_prime
    if args.tau is not None:
        params["tau"] = args.tau
    spec = ExperimentSpec(
        source=_source_from_args(args), algorithm=args.algo, params=params, r=args.r,
        num_samples=args.samples, seed=args.seed or 0, oracle=args.oracle,
        online_opt=args.online_opt,
    )
    report = run_experiment(spec)
    _emit(report.to_csv() if args.format == "csv" else report.to_json(args.timing), args.out)
    return 0


def _cmd_scan(args) -> int:
    source = build_source(_source_from_args(args))
    grid = None if args.grid is None else [float(v) for v in args.grid.split(",")]
    rows = scan_thresholds(source, grid, args.oracle, args.samples, args.seed or 0)
    if args.format == "csv":
        text = scan_csv(rows)
    else:
        text = json.dumps([{"tau": t, **e.to_dict()} for t, e in rows], indent=2)
    _emit(text, args.out)
    return 0


def _cmd_repro(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = [reproduce(name, "quick" if args.quick else "full") for name in names]
    rows = [row for res in results for row in res.rows()]
    if args.format == "csv":
        text = write_csv(rows)
    else:
        text = json.dumps({"passed": all(r.passed for r in results), "checks": rows}, indent=2)
    _emit(text, args.out)
    return 0 if all(r.passed for r in results) else 1


def _cmd_oracle(args) -> int:
    source = build_source(_source_from_args(args))
    out = {"prophet": exact_prophet_value(source, args.r).to_dict()}
    if args.online:
        out["online_optimum"] = exact_online_optimum(source, args.r, DP_CAP).to_dict()
    if args.r == 1:
        tau, value = best_fixed_threshold(source)
        out["best_fixed_threshold"] = {"tau": tau, **value.to_dict()}
    if args.format == "csv":
        rows = [{"quantity": k, "tau": v.get("tau", ""), "mean": v["mean"]} for k, v in out.items()]
        text = write_csv([{k: (f"{x:.17g}" if isinstance(x, float) else x) for k, x in row.items()}
                          for row in rows])
    else:
        text = json.dumps(out, indent=2)
    _emit(text, args.out)
    return 0


def _add_common(p, formats=("json", "csv"), default="json"):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="write here instead of stdout")
    p.add_argument("--format", choices=formats, default=default)


def _add_source(p):
    p.add_argument("--instance", help="instance JSON file")
    p.add_argument("--gen", choices=sorted(GENERATORS), help="build the instance from a generator")
    p.add_argument("--params", help="generator parameters as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corrprophet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a generated instance as JSON")
    p.add_argument("generator", choices=sorted(k for k in GENERATORS if k != "permutation"))
    p.add_argument("--params", help="generator parameters as JSON")
    _add_common(p, ("json",))
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("run", help="evaluate one algorithm against the prophet benchmark")
    _add_source(p)
    p.add_argument("--algo", choices=sorted(ALGORITHMS), required=True)
    p.add_argument("--algo-params", help="algorithm parameters as JSON")
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--samples", type=int, default=10**5)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--eps-prime", type=float)
    p.add_argument("--tau", type=float, help="threshold for --algo threshold")
    p.add_argument("--oracle", choices=("exact", "mc", "auto"), default="auto")
    p.add_argument("--online-opt", action="store_true", help="also solve the online optimum")
    p.add_argument("--timing", action="store_true", help="include wall time in JSON output")
    _add_common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("scan", help="value of every fixed threshold")
    _add_source(p)
    p.add_argument("--grid", help="comma-separated thresholds (default: every achievable value)")
    p.add_argument("--samples", type=int, default=10**5)
    p.add_argument("--oracle", choices=("exact", "mc", "auto"), default="auto")
    _add_common(p, default="csv")
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("repro", help="run a reproduction suite")
    p.add_argument("suite", choices=[*SUITES, *SUITE_ALIASES, "all"])
    p.add_argument("--quick", action="store_true", help="reduced sizes for a fast look")
    _add_common(p, default="csv")
    p.set_defaults(func=_cmd_repro)

    p = sub.add_parser("oracle", help="exact benchmark values for an instance")
    _add_source(p)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--online", action="store_true", help="include the online optimum")
    _add_common(p)
    p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (UsageError, ValueError, KeyError, TypeError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"corrprophet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
