"""Pure-numpy implementations of the hot kernels.

Mirrors the compiled extension ``_fastcore``; one of the two is selected at
import time by ``_backend``.  All reductions run in a fixed order (numpy
pairwise sums, BLAS matvecs) so repeated runs on one machine are
bit-identical.
"""

import math

import numpy as np

NAME = "python"


def gibbs_average(phi, z, log_prior):
    """Gibbs weights from logits ``phi.T @ z + log_prior`` plus their feature average.

    Returns ``(p, avg, log_partition, logits)`` where ``p`` sums to one,
    ``avg = phi @ p`` and ``log_partition`` normalizes the logits.  The max
    logit is subtracted before exponentiating, so any finite input is safe.
    """
    logits = phi.T @ z
    logits += log_prior
    hi = float(logits.max())
    p = np.exp(logits - hi)
    s = float(p.sum())
    p /= s
    avg = phi @ p
    return p, avg, hi + math.log(s), logits


def log_partition(phi, w, log_prior):
    """Stabilized ``log sum_j exp(<w, phi_j> + log_prior_j)``."""
    logits = phi.T @ w
    logits += log_prior
    hi = float(logits.max())
    return hi + math.log(float(np.exp(logits - hi).sum()))


def model_average(phi, p):
    return phi @ p


def feature_dots(phi, w):
    """Per-column inner products ``<w, phi_j>``."""
    return phi.T @ w


def max_column_norm(phi):
    """Largest Euclidean column norm, one pass over the entries."""
    sq = np.einsum("ij,ij->j", phi, phi)
    return math.sqrt(float(sq.max()))


def project_l1_ball(w, radius):
    """Euclidean projection onto ``{x : ||x||_1 <= radius}`` (Condat's scan)."""
    a = np.abs(w)
    if float(a.sum()) <= radius:
        return w.copy()
    tau = _simplex_threshold(a, radius)
    return np.sign(w) * np.maximum(a - tau, 0.0)


def _simplex_threshold(y, a):
    # Scan-and-filter pass over the magnitudes; rho tracks (sum(v) - a)/|v|
    # for the current candidate support v.
    v = [float(y[0])]
    vt = []
    rho = v[0] - a
    for k in range(1, y.shape[0]):
        yk = float(y[k])
        if yk > rho:
            rho += (yk - rho) / (len(v) + 1)
            if rho > yk - a:
                v.append(yk)
            else:
                vt.extend(v)
                v = [yk]
                rho = yk - a
    for yk in vt:
        if yk > rho:
            v.append(yk)
            rho += (yk - rho) / len(v)
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(v):
            yk = v[i]
            if yk <= rho:
                v[i] = v[-1]
                v.pop()
                rho += (rho - yk) / len(v)
                changed = True
            else:
                i += 1
    return rho
