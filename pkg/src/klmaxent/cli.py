"""Command-line entry point.

Exit codes: 0 success, 1 solver non-convergence (or validation failure), 2
input/usage errors.  Identical flags and seed give bit-identical JSON output
on one machine: reductions run in a fixed order and every random draw is
seeded.
"""

import os


def _apply_thread_env():
    # Must run before numpy is imported anywhere in the process.
    requested = os.environ.get("KLMAXENT_NUM_THREADS")
    if requested:
        for var in (
            "OMP_NUM_THREADS",
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS",
        ):
            os.environ.setdefault(var, requested)


_apply_thread_env()

import argparse
import json
import sys

import numpy as np

from . import _backend
from .bench import compare_backends, run_benchmark
from .core import (
    ElasticNet,
    GroupLasso,
    GroupPartition,
    LInf,
    PenaltySpec,
    penalty_to_dict,
)
from .data import (
    load_problem,
    load_table,
    save_problem,
    synth_problem,
    table_to_problem,
)
from .errors import ConvergenceError, NonFiniteIterateError, OracleError, TableParseError
from .path import (
    SCHEDULE_POINTS,
    custom_schedule,
    fit_path,
    path_to_json_dict,
    t_max,
    write_path_csv,
)
from .solvers import SOLVERS, SolverOptions, solver_supports


def _add_penalty_flags(sub):
    sub.add_argument("--penalty", choices=["elastic-net", "group-lasso", "linf"],
                     default="elastic-net")
    sub.add_argument("--alpha", type=float, default=None,
                     help="elastic-net mixing weight in (0,1], default 0.95")
    sub.add_argument("--groups-file", default=None,
                     help="JSON list of 0-based index lists (group lasso)")


def _add_input_flags(sub):
    src = sub.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="cell-table CSV")
    src.add_argument("--problem", help="problem JSON (penalty flags override its penalty)")
    sub.add_argument("--prior", choices=["auto", "uniform", "column"], default="auto")
    sub.add_argument("--no-scale", action="store_true", help="skip min-max feature scaling")


def _add_solver_flags(sub):
    sub.add_argument("--solver", choices=sorted(SOLVERS), default="npdhg")
    sub.add_argument("--tol", type=float, default=1e-5)
    sub.add_argument("--min-iters", type=int, default=40)
    sub.add_argument("--max-iters", type=int, default=200_000)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="klmaxent",
        description="Regularized maximum-entropy density estimation solvers.",
    )
    parser.add_argument("--backend", choices=["auto", "compiled", "python"], default="auto",
                        help="kernel backend (default: compiled when available)")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="solve one (penalty, t) instance")
    _add_input_flags(fit)
    _add_penalty_flags(fit)
    _add_solver_flags(fit)
    tgroup = fit.add_mutually_exclusive_group()
    tgroup.add_argument("--t", type=float, default=None, help="hyperparameter value")
    tgroup.add_argument("--t-frac", type=float, default=0.5,
                        help="hyperparameter as a fraction of the boundary value")
    fit.add_argument("--t-max-only", action="store_true",
                     help="print the boundary hyperparameter and exit")
    fit.add_argument("--with-p", action="store_true", help="include the distribution in JSON")
    fit.add_argument("--output", default=None, help="result JSON path (default: stdout)")
    fit.add_argument("--seed", type=int, default=0)

    path = sub.add_parser("path", help="fit a warm-started regularization path")
    _add_input_flags(path)
    _add_penalty_flags(path)
    _add_solver_flags(path)
    path.add_argument("--cold-start", action="store_true")
    path.add_argument("--schedule-points", type=int, default=SCHEDULE_POINTS)
    path.add_argument("--schedule-mid", type=float, default=0.5)
    path.add_argument("--schedule-end", type=float, default=0.05)
    path.add_argument("--output", required=True,
                      help="output prefix; writes PREFIX.json and PREFIX.csv")
    path.add_argument("--seed", type=int, default=0)

    bench = sub.add_parser("bench", help="benchmark solvers on synthetic paths")
    bench.add_argument("--n", type=int, default=2000)
    bench.add_argument("--m", type=int, default=35)
    bench.add_argument("--ratio", type=float, default=50.0)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--runs", type=int, default=5)
    bench.add_argument("--solvers", default="npdhg,fbs",
                       help="comma list from: " + ",".join(sorted(SOLVERS)))
    bench.add_argument("--penalties", default="en:0.95",
                       help="comma list of en:ALPHA, gl, linf tokens")
    bench.add_argument("--tol", type=float, default=1e-5)
    bench.add_argument("--max-iters", type=int, default=200_000)
    bench.add_argument("--compare-backends", action="store_true",
                       help="also time the compiled vs python kernels")
    bench.add_argument("--output", default=None, help="report JSON path")

    val = sub.add_parser("validate", help="run the oracle-equivalence suite")
    val.add_argument("--seed", type=int, default=0)

    synth = sub.add_parser("synth", help="write a synthetic problem JSON")
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--m", type=int, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--ratio", type=float, default=50.0)
    synth.add_argument("--alpha", type=float, default=0.95)
    synth.add_argument("--output", required=True)
    return parser


def _penalty_from_args(args, m):
    alpha = args.alpha
    groups_file = args.groups_file
    if args.penalty == "elastic-net":
        if groups_file is not None:
            raise ValueError("--groups-file applies only to --penalty group-lasso")
        return PenaltySpec(ElasticNet(0.95 if alpha is None else alpha), 0.0)
    if alpha is not None:
        raise ValueError("--alpha applies only to --penalty elastic-net")
    if args.penalty == "group-lasso":
        if groups_file is None:
            raise ValueError("--penalty group-lasso requires --groups-file")
        with open(groups_file) as stream:
            groups = json.load(stream)
        arrays = tuple(np.asarray(g, dtype=np.intp) for g in groups)
        return PenaltySpec(GroupLasso(GroupPartition(arrays, m)), 0.0)
    if groups_file is not None:
        raise ValueError("--groups-file applies only to --penalty group-lasso")
    return PenaltySpec(LInf(), 0.0)


def _problem_from_args(args):
    if args.problem:
        problem = load_problem(args.problem)
        if args.penalty != "elastic-net" or args.alpha is not None or args.groups_file:
            problem = problem.with_penalty(
                _penalty_from_args(args, problem.phi.m).with_t(problem.penalty.t)
            )
        return problem
    table = load_table(args.input)
    penalty = _penalty_from_args(args, table.m)
    return table_to_problem(table, penalty, scale=not args.no_scale, prior=args.prior)


def _opts_from_args(args):
    return SolverOptions(
        tol=args.tol,
        min_iters=getattr(args, "min_iters", 40),
        max_iters=args.max_iters,
        backend=None if args.backend == "auto" else args.backend,
    )


def _dump_json(payload, path):
    text = json.dumps(payload, sort_keys=True, indent=2)
    if path is None:
        print(text)
    else:
        with open(path, "w") as stream:
            stream.write(text + "\n")


def _run_fit(args):
    problem = _problem_from_args(args)
    boundary = t_max(problem)
    if args.t_max_only:
        print(repr(boundary))
        return 0
    t = args.t if args.t is not None else args.t_frac * boundary
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    problem = problem.with_penalty(problem.penalty.with_t(t))
    if not solver_supports(args.solver, problem.penalty):
        raise ValueError(f"solver {args.solver!r} does not support this penalty")
    opts = _opts_from_args(args)
    p, w, report = SOLVERS[args.solver](problem, opts=opts)
    payload = {
        "schema_version": 1,
        "solver": args.solver,
        "penalty": penalty_to_dict(problem.penalty),
        "t": t,
        "t_max": boundary,
        "converged": report.converged,
        "iterations": report.iterations,
        "residual": report.final_residual,
        "objective_primal": report.objective_primal,
        "objective_dual": report.objective_dual,
        "w": w.tolist(),
    }
    if args.with_p:
        payload["p"] = p.probs.tolist()
    _dump_json(payload, args.output)
    return 0 if report.converged else 1


def _run_path(args):
    problem = _problem_from_args(args)
    if not solver_supports(args.solver, problem.penalty.with_t(1.0)):
        raise ValueError(f"solver {args.solver!r} does not support this penalty")
    opts = _opts_from_args(args)
    boundary = t_max(problem)
    schedule = None
    if boundary > 0.0 and (
        args.schedule_points != SCHEDULE_POINTS
        or args.schedule_mid != 0.5
        or args.schedule_end != 0.05
    ):
        schedule = custom_schedule(
            boundary, args.schedule_points, args.schedule_mid, args.schedule_end
        )
    result = fit_path(
        problem,
        solver_choice=args.solver,
        opts=opts,
        schedule=schedule,
        warm_start=not args.cold_start,
    )
    _dump_json(path_to_json_dict(result), args.output + ".json")
    with open(args.output + ".csv", "w", newline="") as stream:
        write_path_csv(result, stream)
    failed = result.failed_points
    if failed:
        print(f"{len(failed)} path points did not converge: {failed}", file=sys.stderr)
        return 1
    return 0


def _run_bench(args):
    tokens = [tok.strip() for tok in args.penalties.split(",") if tok.strip()]
    penalties = []
    for tok in tokens:
        if tok.startswith("en:"):
            penalties.append((f"elastic-net({tok[3:]})", ElasticNet(float(tok[3:]))))
        elif tok == "gl":
            sizes = np.full(min(5, args.m), args.m // min(5, args.m))
            sizes[: args.m - int(sizes.sum())] += 1
            penalties.append(("group-lasso", GroupLasso(GroupPartition.contiguous(sizes))))
        elif tok == "linf":
            penalties.append(("linf", LInf()))
        else:
            raise ValueError(f"unknown penalty token {tok!r}")
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    problem = synth_problem(args.n, args.m, seed=args.seed, norm_ratio_target=args.ratio)
    instance = (f"synth(n={args.n},m={args.m},ratio={args.ratio:g})", problem)
    opts = SolverOptions(tol=args.tol, max_iters=args.max_iters,
                         backend=None if args.backend == "auto" else args.backend)
    report = run_benchmark([instance], solvers, penalties, runs=args.runs, opts=opts)
    print(report.format_table())
    payload = report.to_json_dict()
    if args.compare_backends:
        payload["backend_comparison"] = compare_backends(problem, opts=opts)
        print("\nbackend comparison (single solve at t = t_max/2):")
        for name, row in payload["backend_comparison"]["backends"].items():
            print(f"  {name:>9}: {row['time_median']:.4f}s  ({row['iterations']} iterations)")
    if args.output:
        _dump_json(payload, args.output)
    return 0


def _run_validate(args):
    from .validate import run_validation_suite

    results = run_validation_suite(seed=args.seed)
    width = max(len(name) for name, _, _ in results)
    ok_all = True
    for name, ok, detail in results:
        status = "pass" if ok else "FAIL"
        ok_all = ok_all and ok
        print(f"{name:<{width}}  {status}  {detail}")
    print(f"\n{'all checks passed' if ok_all else 'SOME CHECKS FAILED'}")
    return 0 if ok_all else 1


def _run_synth(args):
    problem = synth_problem(
        args.n, args.m, seed=args.seed, norm_ratio_target=args.ratio,
        penalty=PenaltySpec(ElasticNet(args.alpha), 0.0),
    )
    save_problem(problem, args.output)
    from .core import largest_singular_value, operator_norm_1to2

    op = operator_norm_1to2(problem.phi)
    sv = largest_singular_value(problem.phi)
    print(f"wrote {args.output}: n={args.n} m={args.m} "
          f"op_norm={op:.4f} sigma_max={sv:.4f} ratio={sv / op:.2f} t={problem.penalty.t!r}")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "fit": _run_fit,
        "path": _run_path,
        "bench": _run_bench,
        "validate": _run_validate,
        "synth": _run_synth,
    }
    try:
        return handlers[args.command](args)
    except (TableParseError, OracleError) as exc:
        line = getattr(exc, "line", None)
        suffix = f" (line {line})" if line else ""
        print(f"error: {exc}{suffix}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, NonFiniteIterateError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
