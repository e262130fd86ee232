"""Command-line interface.

Commands mirror the library surface: validate and calibrate instances,
solve with the approximation scheme, evaluate plans exactly, simulate,
verify surrogate feasibility, build set-cover reductions, and run sweeps.
JSON results carry a schema_version field; exit code 0 means success, 1 a
domain failure (invalid instance, infeasibility, blown budget), 2 a usage
error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments, setcover
from .exact import exact_error_table, exact_opt
from .instances import (
    SCHEMA_VERSION,
    calibrate,
    instance_to_dict,
    load_instance,
    read_calibration_log,
    validate,
)
from .bounds import is_surrogate_feasible
from .likelihood import TIE_POLICIES
from .planner import run_afptas
from .simulate import simulate_error


def _emit(payload: dict, output: str | None) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    text = json.dumps(payload, indent=2) + "\n"
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_plan(text: str) -> list[int]:
    if text.startswith("@"):
        with open(text[1:]) as fh:
            data = json.load(fh)
        if isinstance(data, dict):
            data = data.get("plan")
    else:
        data = json.loads(text)
    if not isinstance(data, list) or not all(isinstance(c, int) for c in data):
        raise ValueError("plan must be a JSON array of integers")
    return data


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", help="write JSON/CSV here instead of stdout")


def _cmd_validate(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance, renormalize=args.renormalize)
    result = validate(inst)
    _emit(result.to_dict(), args.output)
    return 0 if result.ok else 1


def _cmd_calibrate(args: argparse.Namespace) -> int:
    records = read_calibration_log(args.log)
    labels = args.labels.split(",") if args.labels else None
    alphabets = None
    if args.alphabets:
        with open(args.alphabets) as fh:
            alphabets = json.load(fh)
    fragment = calibrate(
        records, smoothing=args.smoothing, labels=labels, alphabets=alphabets
    )
    _emit(fragment, args.output)
    return 0


def _cmd_solve(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance, renormalize=args.renormalize)
    result = validate(inst)
    if not result.ok:
        _emit(result.to_dict(), args.output)
        return 1
    cert = run_afptas(
        inst,
        args.epsilon,
        mode=args.mode,
        check_optimal=args.check_optimal,
        dp_mode=args.dp_mode,
    )
    _emit(cert.to_dict(), args.output)
    return 0


def _cmd_exact(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance, renormalize=args.renormalize)
    if (args.plan is None) == (args.opt is None):
        raise ValueError("pass exactly one of --plan or --opt")
    if args.plan is not None:
        table = exact_error_table(inst, _parse_plan(args.plan), args.tie_policy)
        _emit(table.to_dict(), args.output)
    else:
        result = exact_opt(
            inst,
            problem=args.opt,
            tie_policy=args.tie_policy,
            cost_cap=args.cost_cap,
        )
        _emit(result.to_dict(), args.output)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance, renormalize=args.renormalize)
    est = simulate_error(
        inst,
        _parse_plan(args.plan),
        args.label,
        trials=args.trials,
        seed=args.seed,
        tie_policy=args.tie_policy,
    )
    _emit(est.to_dict(), args.output)
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance, renormalize=args.renormalize)
    report = is_surrogate_feasible(inst, _parse_plan(args.plan))
    _emit(report.to_dict(), args.output)
    return 0 if report.feasible else 1


def _cmd_reduce_setcover(args: argparse.Namespace) -> int:
    sc = setcover.load_setcover(args.sets)
    if args.universe is not None and args.universe != sc.n:
        raise ValueError(
            f"--universe {args.universe} does not match the file's n={sc.n}"
        )
    red = setcover.reduce(
        sc,
        args.epsilon,
        delta_prime=args.delta_prime,
        delta_dprime=args.delta_dprime,
        eta=args.eta,
    )
    payload = red.to_dict()
    if args.check:
        payload["equivalence"] = setcover.verify_equivalence(
            sc,
            args.epsilon,
            delta_prime=args.delta_prime,
            delta_dprime=args.delta_dprime,
            eta=args.eta,
        )
        if not payload["equivalence"]["equivalent"]:
            _emit(payload, args.output)
            return 1
    _emit(payload, args.output)
    return 0


def _cmd_sweep_tightness(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance, renormalize=args.renormalize)
    rows = experiments.tightness_sweep(
        inst, _parse_floats(args.alphas), tie_policy=args.tie_policy
    )
    if args.output:
        experiments.write_rows(args.output, rows, experiments.TIGHTNESS_FIELDS)
    else:
        _emit({"rows": rows}, None)
    return 0


def _cmd_sweep_guarantee(args: argparse.Namespace) -> int:
    rows = experiments.guarantee_sweep(
        seed=args.seed,
        n_instances=args.instances,
        epsilons=_parse_floats(args.epsilons),
        alpha=args.alpha,
    )
    if args.output:
        experiments.write_rows(args.output, rows, experiments.GUARANTEE_FIELDS)
    else:
        _emit({"rows": rows}, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="queryplan",
        description="Minimum-cost query plans for noisy-model classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--renormalize", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("calibrate", help="estimate conditionals from a CSV log")
    p.add_argument("--log", required=True, help="CSV with model,label,response")
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--labels", help="comma-separated label order")
    p.add_argument("--alphabets", help="JSON file {model: [symbols]}")
    _add_common(p)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("solve", help="run the approximation scheme")
    p.add_argument("--instance", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--mode", choices=("auto", "search", "sweep"), default="auto")
    p.add_argument("--dp-mode", choices=("dense", "sparse"), default="dense")
    p.add_argument("--check-optimal", action="store_true")
    p.add_argument("--renormalize", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("exact", help="exact errors for a plan, or exact optimum")
    p.add_argument("--instance", required=True)
    p.add_argument("--plan", help="JSON array of counts, or @file")
    p.add_argument("--opt", choices=("surrogate", "true"))
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="lowest-index")
    p.add_argument("--cost-cap", type=float)
    p.add_argument("--renormalize", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_exact)

    p = sub.add_parser("simulate", help="Monte Carlo error estimate")
    p.add_argument("--instance", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="lowest-index")
    p.add_argument("--renormalize", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="surrogate feasibility report for a plan")
    p.add_argument("--instance", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--renormalize", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser(
        "reduce-setcover", help="embed a weighted set-cover instance"
    )
    p.add_argument("--sets", required=True, help="JSON {n, sets, weights[, budget]}")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--universe", type=int, help="expected universe size (check)")
    p.add_argument("--delta-prime", type=float)
    p.add_argument("--delta-dprime", type=float, default=setcover.DEFAULT_DELTA_DPRIME)
    p.add_argument("--eta", type=float, default=setcover.DEFAULT_ETA)
    p.add_argument("--check", action="store_true", help="verify the correspondence")
    _add_common(p)
    p.set_defaults(func=_cmd_reduce_setcover)

    p = sub.add_parser("sweep-tightness", help="opt vs surrogate-opt over alphas")
    p.add_argument("--instance", required=True)
    p.add_argument("--alphas", required=True, help="comma-separated values")
    p.add_argument("--tie-policy", choices=TIE_POLICIES, default="lowest-index")
    p.add_argument("--renormalize", action="store_true")
    _add_common(p)
    p.set_defaults(func=_cmd_sweep_tightness)

    p = sub.add_parser(
        "sweep-guarantee", help="approximation ratios on random instances"
    )
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--epsilons", default="0.1,0.5,1.0")
    p.add_argument("--alpha", type=float, default=1e-3)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep_guarantee)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
