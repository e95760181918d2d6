"""Closed-form proximal operators for the dual update.

Each operator has a pure form (fresh output array) and accepts ``out=`` for
allocation-free use inside solver loops; tests use the pure form.  All
operators are firmly nonexpansive.
"""

import math

import numpy as np

from . import _backend
from .core import ElasticNet, GroupLasso, GroupPartition, LInf


def _prepare(w_hat, out):
    w_hat = np.asarray(w_hat, dtype=np.float64)
    if out is None:
        out = np.empty_like(w_hat)
    return w_hat, out


def shrink1(w_hat, lam, out=None):
    """Soft thresholding: shifts each entry toward zero by ``lam``, clipping at zero."""
    if lam < 0.0:
        raise ValueError("threshold must be nonnegative")
    w_hat, out = _prepare(w_hat, out)
    np.absolute(w_hat, out=out)
    out -= lam
    np.maximum(out, 0.0, out=out)
    out *= np.sign(w_hat)
    return out


def prox_elastic_net(w_hat, lam, alpha, out=None):
    """Prox of ``lam * (alpha ||.||_1 + (1-alpha)/2 ||.||^2)``; equals shrink1 at alpha=1."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    out = shrink1(w_hat, lam * alpha, out=out)
    if alpha < 1.0:
        out /= 1.0 + lam * (1.0 - alpha)
    return out


def prox_group_lasso(w_hat, lam, partition: GroupPartition, out=None):
    """Blockwise shrinkage: group g scales by ``max(0, 1 - lam*sqrt(m_g)/||w_g||)``.

    A group with norm at most ``lam*sqrt(m_g)`` maps to the zero block; the
    zero-norm block maps to zero (the limit of the scale factor).
    """
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    w_hat, out = _prepare(w_hat, out)
    if w_hat.shape[0] != partition.m:
        raise ValueError(f"vector length {w_hat.shape[0]} vs partition over {partition.m}")
    for g in partition.groups:
        block = w_hat[g]
        norm = float(np.linalg.norm(block))
        threshold = lam * math.sqrt(g.size)
        if norm <= threshold or norm == 0.0:
            out[g] = 0.0
        else:
            out[g] = (1.0 - threshold / norm) * block
    return out


def project_l1_ball(w_hat, radius, out=None):
    """Euclidean projection onto the l1 ball of the given positive radius.

    Points already inside come back unchanged.  Uses the scan-based O(m)
    algorithm; the sort-based variant lives in the oracle module for tests.
    """
    if not radius > 0.0:
        raise ValueError("radius must be positive")
    w_hat = np.ascontiguousarray(w_hat, dtype=np.float64)
    projected = _backend.active().project_l1_ball(w_hat, float(radius))
    if out is None:
        return projected
    out[...] = projected
    return out


def prox_linf(w_hat, lam, out=None):
    """Prox of ``lam * ||.||_inf`` via Moreau decomposition with the l1-ball projection."""
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    w_hat, out = _prepare(w_hat, out)
    if lam == 0.0:
        out[...] = w_hat
        return out
    out[...] = w_hat
    out -= project_l1_ball(w_hat, lam)
    return out


def dual_prox(kind, w_hat, lam, out=None):
    """Penalty-dispatched prox of ``lam * H`` used by the dual update."""
    if isinstance(kind, ElasticNet):
        return prox_elastic_net(w_hat, lam, kind.alpha, out=out)
    if isinstance(kind, GroupLasso):
        return prox_group_lasso(w_hat, lam, kind.partition, out=out)
    if isinstance(kind, LInf):
        return prox_linf(w_hat, lam, out=out)
    raise ValueError(f"unknown penalty kind {kind!r}")
