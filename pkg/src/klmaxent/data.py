"""Table ingestion, empirical-distribution construction, scaling, synthesis.

The on-disk formats are a CSV cell table (header ``cell_id, ecoregion, fire,
f_1..f_m`` plus an optional trailing ``prior`` column) and a JSON problem
file ``{m, n, phi, prior, emp_avg, penalty}`` with ``phi`` stored row-major.
"""

import csv
import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import (
    ElasticNet,
    FeatureMatrix,
    PenaltySpec,
    SimplexDistribution,
    model_average,
    largest_singular_value,
    operator_norm_1to2,
    penalty_from_dict,
    penalty_to_dict,
)
from .errors import TableParseError
from .path import t_max
from .solvers import Problem


@dataclass(frozen=True)
class CellTable:
    """Grid cells with features, a region id and a fire/occurrence flag."""

    cell_ids: tuple
    ecoregions: tuple
    fire: np.ndarray
    features: np.ndarray  # (m, n), column j belongs to cell j
    prior: Optional[np.ndarray] = None

    def __post_init__(self):
        feats = np.asfortranarray(self.features, dtype=np.float64)
        n = len(self.cell_ids)
        if feats.ndim != 2 or feats.shape[1] != n:
            raise ValueError("features must be (m, n) with one column per cell")
        fire = np.asarray(self.fire, dtype=bool)
        if fire.shape != (n,) or len(self.ecoregions) != n:
            raise ValueError("fire flags and ecoregions must have one entry per cell")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "fire", fire)
        object.__setattr__(self, "cell_ids", tuple(self.cell_ids))
        object.__setattr__(self, "ecoregions", tuple(self.ecoregions))
        if self.prior is not None:
            pr = np.asarray(self.prior, dtype=np.float64)
            if pr.shape != (n,):
                raise ValueError("prior column must have one entry per cell")
            object.__setattr__(self, "prior", pr)

    @property
    def n(self) -> int:
        return len(self.cell_ids)

    @property
    def m(self) -> int:
        return self.features.shape[0]


def build_empirical(table: CellTable) -> SimplexDistribution:
    """Region-balanced empirical distribution over fire cells.

    Each fire cell in region r carries mass 1/n_r_total, normalized by the
    sum of per-region fire-cell proportions, so regions with frequent and
    widespread fires weigh more.  Cells without fire carry zero mass.
    """
    if not np.any(table.fire):
        raise ValueError("table has no fire cells; empirical distribution undefined")
    regions = np.asarray(table.ecoregions, dtype=object)
    mass = np.zeros(table.n)
    z = 0.0
    for r in sorted(set(table.ecoregions), key=str):
        in_r = regions == r
        n_total = int(in_r.sum())
        n_fire = int(np.sum(in_r & table.fire))
        if n_fire == 0:
            continue
        z += n_fire / n_total
        mass[in_r & table.fire] = 1.0 / n_total
    mass /= z
    return SimplexDistribution(mass)


def minmax_scale(features) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map each feature row affinely onto [0, 1]; returns (scaled, mins, maxs).

    Constant features are rejected by index, since they carry no information
    and break the scaling denominator.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise ValueError("expected an (m, n) feature array")
    mins = feats.min(axis=1)
    maxs = feats.max(axis=1)
    flat = np.flatnonzero(maxs <= mins)
    if flat.size:
        raise ValueError(f"constant feature rows {flat.tolist()} cannot be min-max scaled")
    scaled = (feats - mins[:, None]) / (maxs - mins)[:, None]
    return np.asfortranarray(scaled), mins, maxs


def table_to_problem(table: CellTable, penalty: PenaltySpec, scale: bool = True,
                     prior: str = "auto") -> Problem:
    """Assemble a Problem from a cell table.

    ``prior`` is ``"uniform"``, ``"column"`` (requires the table to carry
    one) or ``"auto"`` (column when present, else uniform).
    """
    feats = table.features
    if scale:
        feats, _, _ = minmax_scale(feats)
    phi = FeatureMatrix(feats)
    if prior == "auto":
        prior = "column" if table.prior is not None else "uniform"
    if prior == "column":
        if table.prior is None:
            raise ValueError("table has no prior column")
        prior_dist = SimplexDistribution(table.prior / table.prior.sum()).require_interior()
    elif prior == "uniform":
        prior_dist = SimplexDistribution.uniform(table.n)
    else:
        raise ValueError(f"unknown prior source {prior!r}")
    emp = build_empirical(table)
    return Problem(phi, prior_dist, model_average(phi, emp), penalty)


def synth_problem(n, m, seed=0, norm_ratio_target=50.0, penalty=None) -> Problem:
    """Deterministic synthetic instance with a tunable spectral-to-column norm gap.

    Columns share a common direction (coherence drives the spectral norm up)
    but have identical Euclidean norms, so the column-wise operator norm
    stays at one.  The reachable ratio is capped by sqrt(n); a miss beyond 5%
    triggers a warning reporting the achieved value.  The empirical average
    is the feature average of a random interior distribution, the prior is
    uniform, and the default penalty is elastic net alpha=0.95 at half the
    boundary hyperparameter.
    """
    if n < 2 or m < 1:
        raise ValueError("need n >= 2 and m >= 1")
    if not norm_ratio_target >= 1.0:
        raise ValueError("norm ratio target must be at least 1")
    rng = np.random.default_rng(seed)

    if m == 1:
        values = rng.uniform(0.5, 1.5, size=(1, n))
    else:
        floor = math.sqrt(n / m) if n > m else 1.0
        if norm_ratio_target <= floor * 1.02:
            # (scaled) orthonormal columns: the flattest spectrum reachable
            basis = np.linalg.qr(rng.standard_normal((m, m)))[0]
            values = basis[:, np.arange(n) % m]
        else:
            u = np.ones(m) / math.sqrt(m)
            g = rng.standard_normal((m, n))
            g -= u[:, None] * (u @ g)
            g /= np.linalg.norm(g, axis=0)
            c = min(norm_ratio_target, math.sqrt(n) * 0.999) / math.sqrt(n)
            values = c * u[:, None] + math.sqrt(1.0 - c * c) * g
    phi = FeatureMatrix(values)

    achieved = largest_singular_value(phi) / operator_norm_1to2(phi)
    if abs(achieved - norm_ratio_target) > 0.05 * norm_ratio_target:
        warnings.warn(
            f"requested norm ratio {norm_ratio_target:g} not reachable at n={n}, m={m}; "
            f"achieved {achieved:.2f}",
            stacklevel=2,
        )

    prior = SimplexDistribution.uniform(n)
    q = rng.dirichlet(np.full(n, 2.0))
    q = np.maximum(q, 1e-12)
    q /= q.sum()
    emp = model_average(phi, SimplexDistribution(q))

    if penalty is None:
        penalty = PenaltySpec(ElasticNet(0.95), 0.0)
    problem = Problem(phi, prior, emp, penalty)
    if penalty.t == 0.0:
        problem = problem.with_penalty(penalty.with_t(0.5 * t_max(problem)))
    return problem


_FIXED_COLUMNS = ("cell_id", "ecoregion", "fire")


def load_table(path, fmt="csv") -> CellTable:
    """Parse a cell-table CSV; schema violations raise with a 1-based line number."""
    if fmt != "csv":
        raise ValueError(f"unsupported table format {fmt!r}")
    with open(path, newline="") as stream:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise TableParseError("empty file", line=1) from None
        header = [h.strip() for h in header]
        if tuple(header[:3]) != _FIXED_COLUMNS:
            raise TableParseError(
                f"header must start with {', '.join(_FIXED_COLUMNS)}; got {header[:3]}", line=1
            )
        rest = header[3:]
        has_prior = bool(rest) and rest[-1] == "prior"
        feature_names = rest[:-1] if has_prior else rest
        expected = [f"f_{i + 1}" for i in range(len(feature_names))]
        if feature_names != expected:
            bad = next(c for c, e in zip(feature_names, expected) if c != e)
            raise TableParseError(f"unknown column {bad!r} in header", line=1)
        if not feature_names:
            raise TableParseError("table needs at least one feature column", line=1)

        n_cols = len(header)
        cell_ids, regions, fires, rows, priors = [], [], [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_cols:
                raise TableParseError(
                    f"expected {n_cols} fields, got {len(row)}", line=line_no
                )
            cell_ids.append(row[0].strip())
            regions.append(row[1].strip())
            flag = row[2].strip()
            if flag not in ("0", "1"):
                raise TableParseError(f"fire flag must be 0 or 1, got {flag!r}", line=line_no)
            fires.append(flag == "1")
            try:
                vals = [float(v) for v in row[3:]]
            except ValueError as exc:
                raise TableParseError(f"non-numeric value ({exc})", line=line_no) from None
            if has_prior:
                priors.append(vals[-1])
                vals = vals[:-1]
            rows.append(vals)

    if len(rows) < 2:
        raise TableParseError("table needs at least two cells", line=len(rows) + 1)
    features = np.asfortranarray(np.array(rows, dtype=np.float64).T)
    prior = np.array(priors) if has_prior else None
    return CellTable(tuple(cell_ids), tuple(regions), np.array(fires), features, prior)


def save_table(table: CellTable, path):
    with open(path, "w", newline="") as stream:
        writer = csv.writer(stream)
        header = list(_FIXED_COLUMNS) + [f"f_{i + 1}" for i in range(table.m)]
        if table.prior is not None:
            header.append("prior")
        writer.writerow(header)
        for j in range(table.n):
            row = [table.cell_ids[j], table.ecoregions[j], int(table.fire[j])]
            row += [repr(float(v)) for v in table.features[:, j]]
            if table.prior is not None:
                row.append(repr(float(table.prior[j])))
            writer.writerow(row)


def problem_to_dict(problem: Problem) -> dict:
    return {
        "m": problem.phi.m,
        "n": problem.phi.n,
        "phi": np.ascontiguousarray(problem.phi.values).ravel().tolist(),
        "prior": problem.prior.probs.tolist(),
        "emp_avg": problem.emp_avg.tolist(),
        "penalty": penalty_to_dict(problem.penalty),
    }


def problem_from_dict(payload: dict) -> Problem:
    m, n = int(payload["m"]), int(payload["n"])
    phi = np.array(payload["phi"], dtype=np.float64).reshape(m, n)
    return Problem(
        FeatureMatrix(phi),
        SimplexDistribution(np.array(payload["prior"])),
        np.array(payload["emp_avg"], dtype=np.float64),
        penalty_from_dict(payload["penalty"], m=m),
    )


def save_problem(problem: Problem, path):
    with open(path, "w") as stream:
        json.dump(problem_to_dict(problem), stream, sort_keys=True)


def load_problem(path) -> Problem:
    with open(path) as stream:
        return problem_from_dict(json.load(stream))
