"""Regularization-path driver: boundary hyperparameter, schedule, warm starts.

Path points are solved sequentially because warm starts chain them; separate
paths (different penalties) may run concurrently on shared problem data.
"""

import csv
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .core import (
    ElasticNet,
    GroupLasso,
    LInf,
    SimplexDistribution,
    model_average,
    largest_singular_value,
    operator_norm_1to2,
    penalty_to_dict,
)
from .solvers import (
    SOLVERS,
    Problem,
    SolverOptions,
    check_optimality,
    solver_supports,
)

SPARSITY_EPS = 1e-10
SCHEDULE_POINTS = 141


def t_max(problem: Problem) -> float:
    """Smallest hyperparameter whose solution degenerates to (prior, 0).

    Dispatches on the penalty and applies its boundary formula to the
    residual of the prior.  Zero means the prior already matches the
    empirical averages and the whole path is degenerate.
    """
    residual0 = problem.emp_avg - model_average(problem.phi, problem.prior)
    kind = problem.penalty.kind
    if isinstance(kind, ElasticNet):
        return float(np.abs(residual0).max()) / kind.alpha
    if isinstance(kind, GroupLasso):
        best = 0.0
        for g in kind.partition.groups:
            best = max(best, float(np.linalg.norm(residual0[g])) / math.sqrt(g.size))
        return best
    if isinstance(kind, LInf):
        return float(np.abs(residual0).sum())
    raise ValueError(f"unknown penalty kind {kind!r}")


@dataclass(frozen=True)
class PathSchedule:
    """Descending hyperparameter ladder; index 0 is the boundary value."""

    t_values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.t_values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("schedule must be a non-empty vector")
        if np.any(np.diff(arr) >= 0.0):
            raise ValueError("schedule must be strictly decreasing")
        arr.setflags(write=False)
        object.__setattr__(self, "t_values", arr)

    def __len__(self):
        return self.t_values.shape[0]


def make_schedule(t0: float) -> PathSchedule:
    """The default 141-point ladder.

    A 1%-of-t0 decrement down to t0/2 over the first 50 steps, then a 0.5%
    decrement down to 0.05*t0 at the last index.
    """
    if not t0 > 0.0:
        raise ValueError("t0 must be positive")
    values = np.empty(SCHEDULE_POINTS)
    for l in range(51):
        values[l] = (1.0 - l / 100.0) * t0
    for l in range(51, SCHEDULE_POINTS):
        values[l] = (0.5 - (l - 50) / 200.0) * t0
    return PathSchedule(values)


def custom_schedule(t0, points=SCHEDULE_POINTS, mid_frac=0.5, end_frac=0.05) -> PathSchedule:
    """Two-phase linear ladder generalizing the default.

    The first 50/140 of the steps descend linearly to ``mid_frac * t0``, the
    rest to ``end_frac * t0``; the defaults reproduce ``make_schedule``.
    """
    if not t0 > 0.0:
        raise ValueError("t0 must be positive")
    if points < 2:
        raise ValueError("need at least two points")
    if not (0.0 < end_frac < mid_frac < 1.0):
        raise ValueError("need 0 < end_frac < mid_frac < 1")
    split = round((points - 1) * 50 / 140)
    split = min(max(split, 1), points - 1)
    values = np.empty(points)
    for l in range(split + 1):
        values[l] = (1.0 - l * (1.0 - mid_frac) / split) * t0
    for l in range(split + 1, points):
        values[l] = (mid_frac - (l - split) * (mid_frac - end_frac) / (points - 1 - split)) * t0
    return PathSchedule(values)


@dataclass
class PathRecord:
    """Solution snapshot at one hyperparameter."""

    t: float
    w: np.ndarray
    p: SimplexDistribution
    iterations: int
    residual: float
    nonzero_count: int
    converged: bool
    group_active_mask: Optional[np.ndarray] = None
    history: Optional[list] = None


@dataclass
class PathResult:
    """Records along a descending hyperparameter ladder (index 0 = boundary)."""

    penalty: object
    t0: float
    solver: str
    records: List[PathRecord]
    degenerate: bool = False

    @property
    def total_iterations(self) -> int:
        return sum(r.iterations for r in self.records)

    @property
    def failed_points(self) -> List[int]:
        return [l for l, r in enumerate(self.records) if not r.converged]


def _sparsity(w, kind):
    nonzero = int(np.sum(np.abs(w) > SPARSITY_EPS))
    mask = None
    if isinstance(kind, GroupLasso):
        mask = np.array(
            [float(np.linalg.norm(w[g])) > SPARSITY_EPS for g in kind.partition.groups]
        )
    return nonzero, mask


def fit_path(
    problem: Problem,
    solver_choice: str = "npdhg",
    opts: Optional[SolverOptions] = None,
    schedule: Optional[PathSchedule] = None,
    warm_start: bool = True,
) -> PathResult:
    """Solve along the ladder, warm-starting each point from the previous dual.

    Point 0 is the known boundary pair (prior, 0); points 1.. are solved with
    ``z0 = w0 = w`` from the preceding record.  A point that fails to converge
    is flagged and the path continues.
    """
    if solver_choice not in SOLVERS:
        raise ValueError(f"unknown solver {solver_choice!r}; pick one of {sorted(SOLVERS)}")
    if not solver_supports(solver_choice, problem.penalty.with_t(1.0)):
        raise ValueError(f"solver {solver_choice!r} does not support this penalty")
    opts = opts if opts is not None else SolverOptions()
    kind = problem.penalty.kind

    t0 = t_max(problem)
    if t0 == 0.0:
        prior = problem.prior
        record = PathRecord(
            t=0.0, w=np.zeros(problem.phi.m), p=prior, iterations=0,
            residual=0.0, nonzero_count=0, converged=True,
            group_active_mask=_sparsity(np.zeros(problem.phi.m), kind)[1],
        )
        return PathResult(problem.penalty, 0.0, solver_choice, [record], degenerate=True)

    if schedule is None:
        schedule = make_schedule(t0)

    # stepsize constants are computed once and shared along the path
    norms = {}
    if solver_choice in ("npdhg", "npdhg-smooth"):
        norms["op_norm"] = operator_norm_1to2(problem.phi)
    elif solver_choice == "fbs":
        norms["sigma_max"] = largest_singular_value(problem.phi)

    w0 = np.zeros(problem.phi.m)
    res0 = problem.emp_avg - model_average(problem.phi, problem.prior)
    _, value0 = check_optimality(kind, res0, w0, float(schedule.t_values[0]), opts.tol)
    nz0, mask0 = _sparsity(w0, kind)
    records = [
        PathRecord(
            t=float(schedule.t_values[0]), w=w0, p=problem.prior, iterations=0,
            residual=value0, nonzero_count=nz0, converged=True, group_active_mask=mask0,
        )
    ]

    w_prev = w0
    for t_l in schedule.t_values[1:]:
        sub = problem.with_penalty(problem.penalty.with_t(float(t_l)))
        init = w_prev if warm_start else np.zeros(problem.phi.m)
        if solver_choice == "npdhg":
            p, w, rep = SOLVERS[solver_choice](sub, init_z=init, init_w=init, opts=opts, **norms)
        elif solver_choice == "npdhg-smooth":
            p, w, rep = SOLVERS[solver_choice](sub, init_z=init, init_w=init, opts=opts, **norms)
        elif solver_choice == "fbs":
            p, w, rep = SOLVERS[solver_choice](sub, init_w=init, opts=opts, **norms)
        else:
            p, w, rep = SOLVERS[solver_choice](sub, init_w=init, opts=opts)
        nz, mask = _sparsity(w, kind)
        records.append(
            PathRecord(
                t=float(t_l), w=w, p=p, iterations=rep.iterations,
                residual=rep.final_residual, nonzero_count=nz,
                converged=rep.converged, group_active_mask=mask,
                history=rep.history,
            )
        )
        w_prev = w

    return PathResult(problem.penalty, t0, solver_choice, records)


def feature_entry_order(path: PathResult) -> List[Tuple[int, float]]:
    """Entry order along the path: (index, first-active t) sorted by entry.

    An index counts as entered at the first point where it becomes active and
    stays active through the end of the path (transient flips from warm
    starts do not count).  For the group penalty, indices are group indices.
    """
    records = path.records
    if not records:
        return []
    if isinstance(path.penalty.kind, GroupLasso):
        active = np.stack([r.group_active_mask for r in records])
    else:
        active = np.stack([np.abs(r.w) > SPARSITY_EPS for r in records])
    n_points, n_idx = active.shape
    stays = np.flip(np.logical_and.accumulate(np.flip(active, axis=0), axis=0), axis=0)
    entries = []
    for idx in range(n_idx):
        hits = np.flatnonzero(stays[:, idx])
        if hits.size:
            entries.append((int(hits[0]), idx))
    entries.sort()
    return [(idx, records[l].t) for l, idx in entries]


def path_to_json_dict(path: PathResult) -> dict:
    return {
        "schema_version": 1,
        "penalty": penalty_to_dict(path.penalty),
        "t0": path.t0,
        "records": [
            {
                "t": r.t,
                "w": r.w.tolist(),
                "iterations": r.iterations,
                "residual": r.residual,
                "nonzero_count": r.nonzero_count,
            }
            for r in path.records
        ],
        "failed_points": path.failed_points,
    }


def write_path_csv(path: PathResult, stream):
    writer = csv.writer(stream)
    writer.writerow(["t", "iterations", "residual", "nonzero_count"])
    for r in path.records:
        writer.writerow([repr(float(r.t)), r.iterations, repr(float(r.residual)), r.nonzero_count])
