"""Entropy and Gibbs-distribution primitives shared by every solver.

Everything here is a pure function of immutable inputs; concurrent calls are
safe.  All exponentials go through max-subtracted log-sum-exp, so large dual
vectors cannot overflow.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import (
    ElasticNet,
    FeatureMatrix,
    GroupLasso,
    LInf,
    PenaltySpec,
    SimplexDistribution,
    as_probs,
)

# Slack applied to the hard feasibility sets of the constraint-type penalties
# when evaluating the primal objective.
INDICATOR_TOL = 1e-9


@dataclass(frozen=True)
class GibbsCache:
    """Logits ``<z, phi_j> + log prior_j`` and their log-partition."""

    logits: np.ndarray
    log_partition: float


def kl_divergence(p, q) -> float:
    """Relative entropy ``sum_j p_j log(p_j / q_j)`` with ``0 log 0 = 0``.

    ``q`` must be strictly interior; a zero entry is a domain error.
    """
    pv = as_probs(p)
    qv = as_probs(q)
    if pv.shape != qv.shape:
        raise ValueError(f"dimension mismatch: {pv.shape} vs {qv.shape}")
    if np.any(qv <= 0.0):
        raise ValueError("second argument must be strictly interior")
    mask = pv > 0.0
    val = float(np.sum(pv[mask] * np.log(pv[mask] / qv[mask])))
    # tiny negatives are rounding noise near p == q
    return 0.0 if -1e-12 < val < 0.0 else val


def gibbs_distribution(prior, z, phi: FeatureMatrix):
    """Distribution ``p_j ∝ prior_j exp(<z, phi_j>)`` with its logit cache."""
    prior_v = as_probs(prior)
    z = np.ascontiguousarray(z, dtype=np.float64)
    if prior_v.shape[0] != phi.n:
        raise ValueError(f"prior length {prior_v.shape[0]} vs {phi.n} columns")
    if z.shape[0] != phi.m:
        raise ValueError(f"dual vector length {z.shape[0]} vs {phi.m} rows")
    if np.any(prior_v <= 0.0):
        raise ValueError("prior must be strictly interior")
    if not np.all(np.isfinite(z)):
        raise ValueError("dual vector must be finite")
    p, _, log_z, logits = _backend.active().gibbs_average(phi.values, z, np.log(prior_v))
    return SimplexDistribution(p), GibbsCache(logits=logits, log_partition=log_z)


def penalty_dual_value(kind, w) -> float:
    """The dual regularizer H(w) for one penalty kind (without the weight t)."""
    w = np.asarray(w, dtype=np.float64)
    if isinstance(kind, ElasticNet):
        a = kind.alpha
        return float(0.5 * (1.0 - a) * np.dot(w, w) + a * np.abs(w).sum())
    if isinstance(kind, GroupLasso):
        total = 0.0
        for g in kind.partition.groups:
            total += math.sqrt(g.size) * float(np.linalg.norm(w[g]))
        return total
    if isinstance(kind, LInf):
        return float(np.abs(w).max()) if w.size else 0.0
    raise ValueError(f"unknown penalty kind {kind!r}")


def penalty_conjugate_value(penalty: PenaltySpec, residual, slack=INDICATOR_TOL) -> float:
    """The mismatch term ``t H*(residual / t)``; +inf flags an infeasible point.

    For the constraint-type penalties (group lasso, l-infinity, elastic net at
    alpha = 1) H* is an indicator, evaluated with a 1e-9 absolute slack by
    default.  ``slack=0`` gives the strict indicator, under which weak duality
    holds exactly (a slack admits eps-infeasible points whose reported value
    undershoots the true optimum by up to ``|w*| * slack``).
    """
    r = np.asarray(residual, dtype=np.float64)
    t = penalty.t
    kind = penalty.kind
    if isinstance(kind, ElasticNet):
        a = kind.alpha
        if a < 1.0:
            if t == 0.0:
                return 0.0 if float(np.abs(r).max(initial=0.0)) <= slack else math.inf
            excess = np.maximum(0.0, np.abs(r) - t * a)
            return float(np.dot(excess, excess)) / (2.0 * t * (1.0 - a))
        return 0.0 if float(np.abs(r).max(initial=0.0)) <= t + slack else math.inf
    if isinstance(kind, GroupLasso):
        for g in kind.partition.groups:
            if float(np.linalg.norm(r[g])) > t * math.sqrt(g.size) + slack:
                return math.inf
        return 0.0
    if isinstance(kind, LInf):
        return 0.0 if float(np.abs(r).sum()) <= t + slack else math.inf
    raise ValueError(f"unknown penalty kind {kind!r}")


def primal_objective(p, prior, penalty: PenaltySpec, residual) -> float:
    """Estimation objective: KL(p || prior) plus the feature-mismatch term.

    ``residual`` must be the difference between the empirical and the model
    feature averages at ``p``.
    """
    return kl_divergence(p, prior) + penalty_conjugate_value(penalty, residual)


def dual_objective(w, prior, phi: FeatureMatrix, penalty: PenaltySpec, emp_avg) -> float:
    """Dual value ``<w, emp_avg> - t H(w) - log sum_j prior_j exp(<w, phi_j>)``."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    emp = np.asarray(emp_avg, dtype=np.float64)
    prior_v = as_probs(prior)
    if w.shape[0] != phi.m or emp.shape[0] != phi.m:
        raise ValueError("dual vector / empirical average length must equal the feature count")
    if not np.all(np.isfinite(w)):
        raise ValueError("dual vector must be finite")
    log_z = _backend.active().log_partition(phi.values, w, np.log(prior_v))
    return float(np.dot(w, emp)) - penalty.t * penalty_dual_value(penalty.kind, w) - log_z
