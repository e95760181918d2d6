"""Shared domain types and feature-matrix operations."""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from . import _backend
from .errors import ConvergenceError

SIMPLEX_SUM_ATOL = 1e-12
SIMPLEX_RENORM_DRIFT = 1e-9


def _as_vector(x, name):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense feature map: column ``j`` is the feature vector of outcome ``j``.

    Stored column-major (Fortran order, float64) so the Gibbs update and the
    model average stream over contiguous columns.  Immutable after
    construction and safe to share across threads.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asfortranarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {arr.shape}")
        m, n = arr.shape
        if m < 1:
            raise ValueError("need at least one feature row")
        if n < 2:
            raise ValueError("need at least two outcome columns")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature matrix entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def column(self, j) -> np.ndarray:
        return self.values[:, j]


@dataclass(frozen=True)
class SimplexDistribution:
    """Probability vector: nonnegative entries summing to one.

    Construction rejects negative entries.  A sum drifting from 1 by at most
    1e-9 is renormalized; a larger drift is an error, so type validation stays
    far below solver tolerances.
    """

    probs: np.ndarray

    def __post_init__(self):
        arr = _as_vector(self.probs, "probs")
        if arr.size < 1:
            raise ValueError("empty probability vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("probabilities must be finite")
        if np.any(arr < 0.0):
            raise ValueError("probabilities must be nonnegative")
        total = float(arr.sum())
        drift = abs(total - 1.0)
        if drift > SIMPLEX_RENORM_DRIFT:
            raise ValueError(f"probabilities sum to {total!r}, drift {drift:.3e} exceeds 1e-9")
        if drift > SIMPLEX_SUM_ATOL:
            arr = arr / total
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def is_interior(self) -> bool:
        return bool(np.all(self.probs > 0.0))

    def require_interior(self) -> "SimplexDistribution":
        if not self.is_interior:
            raise ValueError("distribution must be strictly interior (all entries > 0)")
        return self

    @classmethod
    def uniform(cls, n) -> "SimplexDistribution":
        return cls(np.full(n, 1.0 / n))


def as_probs(p) -> np.ndarray:
    """Accept a SimplexDistribution or a raw vector."""
    if isinstance(p, SimplexDistribution):
        return p.probs
    return _as_vector(p, "probability vector")


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint index groups covering ``{0, ..., m-1}`` (0-based)."""

    groups: Tuple[np.ndarray, ...]
    m: int

    def __post_init__(self):
        norm = []
        seen = np.zeros(self.m, dtype=bool)
        for g, idx in enumerate(self.groups):
            arr = np.asarray(idx, dtype=np.intp)
            if arr.ndim != 1 or arr.size == 0:
                raise ValueError(f"group {g} must be a non-empty 1-D index set")
            if np.any(arr < 0) or np.any(arr >= self.m):
                raise ValueError(f"group {g} has indices outside [0, {self.m})")
            if np.any(seen[arr]):
                raise ValueError(f"group {g} overlaps a previous group")
            seen[arr] = True
            arr.setflags(write=False)
            norm.append(arr)
        if not np.all(seen):
            missing = np.flatnonzero(~seen)
            raise ValueError(f"partition does not cover indices {missing.tolist()}")
        object.__setattr__(self, "groups", tuple(norm))

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups])

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @classmethod
    def contiguous(cls, sizes) -> "GroupPartition":
        """Partition [0..sum(sizes)) into consecutive blocks."""
        edges = np.concatenate([[0], np.cumsum(sizes)])
        groups = tuple(np.arange(a, b) for a, b in zip(edges[:-1], edges[1:]))
        return cls(groups, int(edges[-1]))


@dataclass(frozen=True)
class ElasticNet:
    """l1/l2 mixture on the dual vector; ``alpha`` in (0, 1] weights the l1 part."""

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")


@dataclass(frozen=True)
class GroupLasso:
    """Sum of size-weighted group l2 norms on the dual vector."""

    partition: GroupPartition


@dataclass(frozen=True)
class LInf:
    """Max-norm penalty on the dual vector."""


PenaltyKind = Union[ElasticNet, GroupLasso, LInf]


@dataclass(frozen=True)
class PenaltySpec:
    """A penalty kind together with its regularization weight ``t >= 0``."""

    kind: PenaltyKind
    t: float

    def __post_init__(self):
        if not isinstance(self.kind, (ElasticNet, GroupLasso, LInf)):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if not (np.isfinite(self.t) and self.t >= 0.0):
            raise ValueError(f"t must be a finite nonnegative number, got {self.t!r}")

    def with_t(self, t) -> "PenaltySpec":
        return PenaltySpec(self.kind, float(t))


def penalty_to_dict(penalty: PenaltySpec) -> dict:
    kind = penalty.kind
    if isinstance(kind, ElasticNet):
        return {"kind": "elastic_net", "alpha": kind.alpha, "t": penalty.t}
    if isinstance(kind, GroupLasso):
        groups = [g.tolist() for g in kind.partition.groups]
        return {"kind": "group_lasso", "groups": groups, "t": penalty.t}
    return {"kind": "linf", "t": penalty.t}


def penalty_from_dict(payload: dict, m: Optional[int] = None) -> PenaltySpec:
    kind = payload.get("kind")
    t = float(payload["t"])
    if kind == "elastic_net":
        return PenaltySpec(ElasticNet(float(payload["alpha"])), t)
    if kind == "group_lasso":
        groups = [np.asarray(g, dtype=np.intp) for g in payload["groups"]]
        size = m if m is not None else int(max(int(g.max()) for g in groups) + 1)
        return PenaltySpec(GroupLasso(GroupPartition(tuple(groups), size)), t)
    if kind == "linf":
        return PenaltySpec(LInf(), t)
    raise ValueError(f"unknown penalty kind {kind!r}")


@dataclass
class SolveReport:
    """Outcome of one solver run."""

    iterations: int
    final_residual: float
    converged: bool
    wall_time: float
    objective_primal: float
    objective_dual: float
    solver: str = ""
    t: float = 0.0
    history: Optional[list] = None
    max_z_inf: float = 0.0
    max_extrapolated_inf: float = 0.0
    stepsize_product: float = 0.0

    @property
    def duality_gap(self) -> float:
        return self.objective_primal - self.objective_dual


@dataclass
class SolverState:
    """Snapshot of the primal-dual iterates and stepsizes at one iteration."""

    z: np.ndarray
    p: np.ndarray
    w: np.ndarray
    w_prev: np.ndarray
    tau: float
    sigma: float
    theta: float

    def __post_init__(self):
        if not (self.tau > 0.0 and self.sigma > 0.0):
            raise ValueError("tau and sigma must be positive")
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError("theta must lie in [0, 1]")


def model_average(phi: FeatureMatrix, p) -> np.ndarray:
    """Feature average under ``p``: the vector ``sum_j p_j * phi_j``."""
    probs = as_probs(p)
    if probs.shape[0] != phi.n:
        raise ValueError(f"length {probs.shape[0]} distribution vs {phi.n} columns")
    return _backend.active().model_average(phi.values, probs)


def operator_norm_1to2(phi: FeatureMatrix) -> float:
    """Largest column norm: the l1-to-l2 induced norm of the averaging map.

    Single pass over the entries, Theta(m*n).
    """
    return float(_backend.active().max_column_norm(phi.values))


def largest_singular_value(phi: FeatureMatrix, tol: float = 1e-8, max_iters: int = 10_000) -> float:
    """Spectral norm estimate by power iteration on the Gram matrix.

    Runs until the estimate's relative change drops below ``tol``; raises
    ConvergenceError (carrying the best estimate) past ``max_iters``.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    a = phi.values
    rng = np.random.default_rng(0)
    v = rng.standard_normal(phi.n)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iters):
        u = a @ v
        sigma_new = float(np.linalg.norm(u))
        if sigma_new == 0.0:
            return 0.0
        v = a.T @ u
        v /= float(np.linalg.norm(v))
        if abs(sigma_new - sigma) <= tol * sigma_new:
            return sigma_new
        sigma = sigma_new
    raise ConvergenceError(
        f"power iteration did not converge to rel. tol {tol:g} in {max_iters} iterations",
        best_estimate=sigma,
    )
