"""Benchmark harness: full-path timings per (solver, penalty, instance).

Iteration counts are the primary cross-machine metric; wall times are
reported (median and mean over repeated runs) but nothing binds to absolute
seconds.  Timed runs include the stepsize-constant computation (operator norm
or power iteration), which happens inside ``fit_path``.  Runs execute
sequentially for timing fidelity.
"""

import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from . import _backend
from .core import PenaltySpec, largest_singular_value, operator_norm_1to2
from .path import fit_path
from .solvers import SOLVERS, Problem, SolverOptions, solver_supports


@dataclass
class BenchRow:
    instance: str
    penalty: str
    solver: str
    supported: bool
    runs: int = 0
    times: List[float] = field(default_factory=list)
    time_mean: float = float("nan")
    time_median: float = float("nan")
    total_iterations: int = 0
    failed_points: int = 0
    diverged_runs: int = 0
    op_norm: float = float("nan")
    sigma_max: float = float("nan")


@dataclass
class BenchReport:
    rows: List[BenchRow]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "rows": [
                {
                    "instance": r.instance,
                    "penalty": r.penalty,
                    "solver": r.solver,
                    "supported": r.supported,
                    "runs": r.runs,
                    "times": r.times,
                    "time_mean": r.time_mean,
                    "time_median": r.time_median,
                    "total_iterations": r.total_iterations,
                    "failed_points": r.failed_points,
                    "diverged_runs": r.diverged_runs,
                    "op_norm": r.op_norm,
                    "sigma_max": r.sigma_max,
                }
                for r in self.rows
            ],
        }

    def format_table(self) -> str:
        solvers = sorted({r.solver for r in self.rows})
        keys = sorted({(r.instance, r.penalty) for r in self.rows})
        by_cell = {(r.instance, r.penalty, r.solver): r for r in self.rows}
        labels = {key: f"{inst} / {pen}" for key in keys for inst, pen in [key]}
        label_width = max([len(v) for v in labels.values()] + [len("instance / penalty")]) + 2
        width = 26
        head = f"{'instance / penalty':<{label_width}}" + "".join(f"{s:>{width}}" for s in solvers)
        lines = [head, "-" * len(head)]
        for key in keys:
            cells = []
            for s in solvers:
                row = by_cell.get((*key, s))
                if row is None or not row.supported:
                    cells.append(f"{'N/A':>{width}}")
                else:
                    cells.append(
                        f"{row.time_median:>14.3f}s {row.total_iterations:>8d}it"
                    )
            lines.append(f"{labels[key]:<{label_width}}" + "".join(cells))
        return "\n".join(lines)


def run_benchmark(
    instances: List[Tuple[str, Problem]],
    solvers: List[str],
    penalties: List[Tuple[str, object]],
    runs: int = 5,
    opts: Optional[SolverOptions] = None,
) -> BenchReport:
    """Time full regularization paths for every supported combination.

    ``penalties`` holds (label, kind) pairs; the path driver derives the
    hyperparameter ladder itself.  A run containing non-converged path points
    is flagged and excluded from the timing averages.  Unsupported
    (solver, penalty) pairs produce rows marked unsupported, never silent
    skips.
    """
    if runs < 1:
        raise ValueError("need at least one run")
    opts = opts if opts is not None else SolverOptions()
    rows = []
    for inst_label, problem in instances:
        op_norm = operator_norm_1to2(problem.phi)
        sigma_max = largest_singular_value(problem.phi)
        for pen_label, kind in penalties:
            spec = PenaltySpec(kind, 0.0)
            prob = problem.with_penalty(spec)
            for solver in solvers:
                if solver not in SOLVERS:
                    raise ValueError(f"unknown solver {solver!r}")
                row = BenchRow(
                    instance=inst_label, penalty=pen_label, solver=solver,
                    supported=solver_supports(solver, spec.with_t(1.0)),
                    op_norm=op_norm, sigma_max=sigma_max,
                )
                rows.append(row)
                if not row.supported:
                    continue
                clean_times = []
                for _ in range(runs):
                    started = time.perf_counter()
                    result = fit_path(prob, solver_choice=solver, opts=opts)
                    elapsed = time.perf_counter() - started
                    row.runs += 1
                    row.times.append(elapsed)
                    failed = len(result.failed_points)
                    if failed:
                        row.diverged_runs += 1
                    else:
                        clean_times.append(elapsed)
                    row.total_iterations = result.total_iterations
                    row.failed_points = failed
                usable = clean_times if clean_times else row.times
                row.time_mean = float(np.mean(usable))
                row.time_median = float(np.median(usable))
    return BenchReport(rows)


def compare_backends(problem: Problem, solver: str = "npdhg",
                     opts: Optional[SolverOptions] = None, runs: int = 3) -> dict:
    """Time one solve per available kernel backend and check they agree.

    Returns per-backend median seconds, iteration counts and the max
    absolute difference between the dual solutions.
    """
    opts = opts if opts is not None else SolverOptions()
    out = {"solver": solver, "backends": {}, "max_w_difference": 0.0}
    reference = None
    for name in _backend.available_backends():
        local = replace(opts, backend=name)
        times = []
        w = None
        iters = 0
        for _ in range(max(1, runs)):
            started = time.perf_counter()
            _, w, rep = SOLVERS[solver](problem, opts=local)
            times.append(time.perf_counter() - started)
            iters = rep.iterations
        out["backends"][name] = {
            "time_median": float(np.median(times)),
            "iterations": iters,
        }
        if reference is None:
            reference = w
        else:
            out["max_w_difference"] = float(np.abs(w - reference).max())
    return out
