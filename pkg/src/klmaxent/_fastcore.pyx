# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: fused Gibbs update, feature averages, column norms
and the l1-ball projection scan.

Same contract as ``_pycore``.  Feature matrices must be float64 and
Fortran-ordered so that per-outcome columns are contiguous; the loops are
single-threaded on purpose, which keeps every reduction order fixed and runs
bit-reproducible.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, sqrt

cnp.import_array()

NAME = "compiled"


def gibbs_average(const double[::1, :] phi, const double[::1] z, const double[::1] log_prior):
    """Gibbs weights from logits ``phi.T @ z + log_prior`` plus their feature average.

    Returns ``(p, avg, log_partition, logits)``; the max logit is subtracted
    before exponentiating, so any finite input is safe.
    """
    cdef Py_ssize_t m = phi.shape[0]
    cdef Py_ssize_t n = phi.shape[1]
    logits_arr = np.empty(n, dtype=np.float64)
    p_arr = np.empty(n, dtype=np.float64)
    avg_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] logits = logits_arr
    cdef double[::1] p = p_arr
    cdef double[::1] avg = avg_arr
    cdef Py_ssize_t i, j
    cdef double acc, hi, s, pj

    hi = -1e308
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += z[i] * phi[i, j]
        acc += log_prior[j]
        logits[j] = acc
        if acc > hi:
            hi = acc

    s = 0.0
    for j in range(n):
        pj = exp(logits[j] - hi)
        p[j] = pj
        s += pj

    for j in range(n):
        pj = p[j] / s
        p[j] = pj
        for i in range(m):
            avg[i] += pj * phi[i, j]

    return p_arr, avg_arr, hi + log(s), logits_arr


def log_partition(const double[::1, :] phi, const double[::1] w, const double[::1] log_prior):
    """Stabilized ``log sum_j exp(<w, phi_j> + log_prior_j)``."""
    cdef Py_ssize_t m = phi.shape[0]
    cdef Py_ssize_t n = phi.shape[1]
    logits_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] logits = logits_arr
    cdef Py_ssize_t i, j
    cdef double acc, hi, s

    hi = -1e308
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += w[i] * phi[i, j]
        acc += log_prior[j]
        logits[j] = acc
        if acc > hi:
            hi = acc
    s = 0.0
    for j in range(n):
        s += exp(logits[j] - hi)
    return hi + log(s)


def model_average(const double[::1, :] phi, const double[::1] p):
    cdef Py_ssize_t m = phi.shape[0]
    cdef Py_ssize_t n = phi.shape[1]
    avg_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] avg = avg_arr
    cdef Py_ssize_t i, j
    cdef double pj
    for j in range(n):
        pj = p[j]
        for i in range(m):
            avg[i] += pj * phi[i, j]
    return avg_arr


def feature_dots(const double[::1, :] phi, const double[::1] w):
    """Per-column inner products ``<w, phi_j>``."""
    cdef Py_ssize_t m = phi.shape[0]
    cdef Py_ssize_t n = phi.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double acc
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += w[i] * phi[i, j]
        out[j] = acc
    return out_arr


def max_column_norm(const double[::1, :] phi):
    """Largest Euclidean column norm, one pass over the entries."""
    cdef Py_ssize_t m = phi.shape[0]
    cdef Py_ssize_t n = phi.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, best = 0.0
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += phi[i, j] * phi[i, j]
        if acc > best:
            best = acc
    return sqrt(best)


def project_l1_ball(const double[::1] w, double radius):
    """Euclidean projection onto ``{x : ||x||_1 <= radius}`` (Condat's scan)."""
    cdef Py_ssize_t m = w.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double total = 0.0
    for i in range(m):
        total += fabs(w[i])
    if total <= radius:
        for i in range(m):
            out[i] = w[i]
        return out_arr

    # candidate buffers for the scan; v occupies buf[:nv], the spilled set
    # occupies spill[:nspill]
    buf_arr = np.empty(m, dtype=np.float64)
    spill_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    cdef double[::1] spill = spill_arr
    cdef Py_ssize_t nv = 1, nspill = 0, k
    cdef double rho, yk, shrunk
    cdef bint changed

    buf[0] = fabs(w[0])
    rho = buf[0] - radius
    for k in range(1, m):
        yk = fabs(w[k])
        if yk > rho:
            rho += (yk - rho) / (nv + 1)
            if rho > yk - radius:
                buf[nv] = yk
                nv += 1
            else:
                for i in range(nv):
                    spill[nspill + i] = buf[i]
                nspill += nv
                buf[0] = yk
                nv = 1
                rho = yk - radius
    for k in range(nspill):
        yk = spill[k]
        if yk > rho:
            buf[nv] = yk
            nv += 1
            rho += (yk - rho) / nv
    changed = True
    while changed:
        changed = False
        i = 0
        while i < nv:
            yk = buf[i]
            if yk <= rho:
                buf[i] = buf[nv - 1]
                nv -= 1
                rho += (rho - yk) / nv
                changed = True
            else:
                i += 1

    for i in range(m):
        shrunk = fabs(w[i]) - rho
        if shrunk > 0.0:
            out[i] = shrunk if w[i] > 0.0 else -shrunk
        else:
            out[i] = 0.0
    return out_arr
