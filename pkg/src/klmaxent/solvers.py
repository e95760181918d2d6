"""Primal-dual solvers and baselines over a shared problem description.

Four solvers share the same problem type, stopping rule and report format:

* ``npdhg_nonsmooth`` -- KL-proximal primal-dual iteration with accelerating
  stepsizes; works for every penalty.
* ``npdhg_smooth`` -- constant-stepsize variant with a linear rate; needs the
  elastic-net penalty with ``alpha < 1`` (the dual regularizer is strongly
  convex).
* ``fbs_solve`` -- accelerated proximal gradient on the dual (the classical
  first-order baseline, stepsize tied to the spectral norm).
* ``structmaxent2_solve`` -- cyclic proximal coordinate descent on the dual
  with feature-range curvature bounds (elastic net only).

Each solve is one logical thread of control; distinct solves on a shared
immutable Problem may run concurrently.
"""

import math
import time
import warnings
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import _backend
from .core import (
    ElasticNet,
    FeatureMatrix,
    GroupLasso,
    LInf,
    PenaltySpec,
    SimplexDistribution,
    SolveReport,
    largest_singular_value,
    operator_norm_1to2,
)
from .errors import NonFiniteIterateError
from .gibbs import penalty_conjugate_value, penalty_dual_value
from .prox import dual_prox, prox_elastic_net


@dataclass(frozen=True)
class Problem:
    """A maximum-entropy instance: features, prior, empirical average, penalty."""

    phi: FeatureMatrix
    prior: SimplexDistribution
    emp_avg: np.ndarray
    penalty: PenaltySpec

    def __post_init__(self):
        if not isinstance(self.phi, FeatureMatrix):
            object.__setattr__(self, "phi", FeatureMatrix(self.phi))
        if not isinstance(self.prior, SimplexDistribution):
            object.__setattr__(self, "prior", SimplexDistribution(self.prior))
        self.prior.require_interior()
        emp = np.ascontiguousarray(self.emp_avg, dtype=np.float64)
        if emp.shape != (self.phi.m,):
            raise ValueError(f"emp_avg shape {emp.shape} vs feature count {self.phi.m}")
        if not np.all(np.isfinite(emp)):
            raise ValueError("emp_avg must be finite")
        emp.setflags(write=False)
        object.__setattr__(self, "emp_avg", emp)
        if self.prior.n != self.phi.n:
            raise ValueError(f"prior length {self.prior.n} vs {self.phi.n} columns")
        kind = self.penalty.kind
        if isinstance(kind, GroupLasso) and kind.partition.m != self.phi.m:
            raise ValueError(
                f"group partition over {kind.partition.m} features vs matrix with {self.phi.m}"
            )
        log_prior = np.log(self.prior.probs)
        log_prior.setflags(write=False)
        object.__setattr__(self, "_log_prior", log_prior)
        if self.phi.n <= 64 and self.phi.m <= 16:
            self._warn_if_outside_hull()

    @property
    def log_prior(self) -> np.ndarray:
        return self._log_prior

    def with_penalty(self, penalty: PenaltySpec) -> "Problem":
        return Problem(self.phi, self.prior, self.emp_avg, penalty)

    def _warn_if_outside_hull(self):
        # Cheap feasibility probe: exponentiated-gradient least squares over
        # the simplex. Warn-level only; skipped for larger instances.
        a = self.phi.values
        target = self.emp_avg
        p = np.full(self.phi.n, 1.0 / self.phi.n)
        col_norm = _backend.active().max_column_norm(a)
        if col_norm == 0.0:
            return
        step = 0.5 / col_norm**2
        for _ in range(3000):
            r = a @ p - target
            g = a.T @ r
            g -= g.max()
            p = p * np.exp(-step * g)
            p /= p.sum()
        gap = float(np.abs(a @ p - target).max())
        # coarse screen only: false alarms are worse than misses here
        if gap > 5e-2 * (1.0 + float(np.abs(target).max())):
            warnings.warn(
                f"empirical average appears to lie outside the convex hull of the "
                f"feature columns (distance ~{gap:.2e}); the dual may be unbounded "
                f"for weak penalties",
                stacklevel=3,
            )


@dataclass
class SolverOptions:
    """Stopping and bookkeeping knobs shared by all solvers."""

    tol: float = 1e-5
    min_iters: int = 40
    max_iters: int = 200_000
    check_every: int = 1
    record_history: bool = False
    history_every: int = 1
    backend: Optional[str] = None

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.min_iters < 0:
            raise ValueError("min_iters must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.check_every < 1 or self.history_every < 1:
            raise ValueError("strides must be at least 1")


def check_optimality(penalty, residual, w, t, tol=1e-5):
    """Penalty-specific stopping test against the (1+tol)-inflated threshold.

    ``residual`` is the empirical-minus-model feature average at the current
    primal iterate.  Returns ``(passed, value)`` where ``value`` is the
    measured left-hand side.
    """
    kind = penalty.kind if isinstance(penalty, PenaltySpec) else penalty
    r = np.asarray(residual, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if isinstance(kind, ElasticNet):
        a = kind.alpha
        lhs = r if a == 1.0 else r - t * (1.0 - a) * w
        value = float(np.abs(lhs).max())
        threshold = t * a * (1.0 + tol)
    elif isinstance(kind, GroupLasso):
        value = 0.0
        for g in kind.partition.groups:
            value = max(value, float(np.linalg.norm(r[g])) / math.sqrt(g.size))
        threshold = t * (1.0 + tol)
    elif isinstance(kind, LInf):
        value = float(np.abs(r).sum())
        threshold = t * (1.0 + tol)
    else:
        raise ValueError(f"unknown penalty kind {kind!r}")
    return value <= threshold, value


class _Recorder:
    """Collects per-iterate objective diagnostics on a stride."""

    def __init__(self, problem, kernels, every):
        self.kernels = kernels
        self.phi = problem.phi.values
        self.log_prior = problem.log_prior
        self.prior_v = problem.prior.probs
        self.emp = problem.emp_avg
        self.penalty = problem.penalty
        self.every = every
        self.entries: List[dict] = []

    def due(self, k):
        return k % self.every == 0

    def record(self, k, p, avg, log_z_p, gibbs_vec, w, res, value, tau, sigma, theta):
        # KL(p || prior) in Gibbs form: <gibbs_vec, avg> - log_partition.
        kl_prior = float(np.dot(gibbs_vec, avg)) - log_z_p
        if w is gibbs_vec:
            log_z_w = log_z_p
        else:
            log_z_w = self.kernels.log_partition(self.phi, w, self.log_prior)
        t = self.penalty.t
        dual = float(np.dot(w, self.emp)) - t * penalty_dual_value(self.penalty.kind, w) - log_z_w
        # strict indicator: weak duality then holds exactly at every entry
        primal = kl_prior + penalty_conjugate_value(self.penalty, res, slack=0.0)
        self.entries.append(
            {
                "iteration": k,
                "primal": primal,
                "dual": dual,
                "gap": primal - dual,
                "kl_prior": kl_prior,
                "l1_prior": float(np.abs(p - self.prior_v).sum()),
                "check_value": value,
                "tau": tau,
                "sigma": sigma,
                "theta": theta,
            }
        )


def _final_report(
    solver, problem, kernels, k, converged, value, started, p, avg, log_z_p, gibbs_vec, w,
    recorder, max_z, max_u, stepsize_product,
):
    res = problem.emp_avg - avg
    kl_prior = float(np.dot(gibbs_vec, avg)) - log_z_p
    primal = kl_prior + penalty_conjugate_value(problem.penalty, res)
    if w is gibbs_vec:
        log_z_w = log_z_p
    else:
        log_z_w = kernels.log_partition(problem.phi.values, w, problem.log_prior)
    t = problem.penalty.t
    dual = float(np.dot(w, problem.emp_avg)) - t * penalty_dual_value(problem.penalty.kind, w) - log_z_w
    return SolveReport(
        iterations=k,
        final_residual=value,
        converged=converged,
        wall_time=time.perf_counter() - started,
        objective_primal=primal,
        objective_dual=dual,
        solver=solver,
        t=t,
        history=recorder.entries if recorder is not None else None,
        max_z_inf=max_z,
        max_extrapolated_inf=max_u,
        stepsize_product=stepsize_product,
    )


def _init_dual(vec, m, name):
    if vec is None:
        return np.zeros(m)
    out = np.array(vec, dtype=np.float64)
    if out.shape != (m,):
        raise ValueError(f"{name} must have shape ({m},)")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} must be finite")
    return out


def _check_finite(solver, k, log_z, w, tau, sigma):
    if math.isfinite(log_z) and np.all(np.isfinite(w)):
        return
    raise NonFiniteIterateError(
        f"{solver}: non-finite iterate at iteration {k} "
        f"(log_partition={log_z!r}, tau={tau!r}, sigma={sigma!r})",
        iteration=k,
    )


def npdhg_nonsmooth(problem, init_z=None, init_w=None, opts=None, *, op_norm=None):
    """Accelerated KL-proximal primal-dual iteration; handles every penalty.

    Initial stepsizes are ``tau = 2`` and ``sigma = 1/(2 ||A||^2)`` with the
    max-column-norm operator norm, saturating the stepsize product bound; the
    acceleration updates keep ``tau*sigma`` constant.  Starting from zero dual
    vectors the first primal iterate is the prior.
    """
    opts = opts if opts is not None else SolverOptions()
    kernels = _backend.resolve(opts.backend)
    phi = problem.phi.values
    m = problem.phi.m
    emp = problem.emp_avg
    log_prior = problem.log_prior
    pen = problem.penalty
    t = pen.t

    if op_norm is None:
        op_norm = operator_norm_1to2(problem.phi)
    if not op_norm > 0.0:
        raise ValueError("operator norm must be positive")
    stepsize_product = 1.0 / (op_norm * op_norm)  # tau*sigma, conserved
    tau = 2.0
    sigma = stepsize_product / tau
    theta = 0.0

    z = _init_dual(init_z, m, "init_z")
    w = _init_dual(init_w, m, "init_w")
    w_prev = w.copy()
    u = np.empty(m)
    w_hat = np.empty(m)

    recorder = _Recorder(problem, kernels, opts.history_every) if opts.record_history else None
    max_z = float(np.abs(z).max(initial=0.0))
    max_u = 0.0
    started = time.perf_counter()
    converged = False
    value = math.inf
    p = avg = log_z_p = None

    k = 0
    for k in range(1, opts.max_iters + 1):
        np.subtract(w, w_prev, out=u)
        u *= theta
        u += w
        max_u = max(max_u, float(np.abs(u).max(initial=0.0)))
        u *= tau
        z += u
        z /= 1.0 + tau
        max_z = max(max_z, float(np.abs(z).max(initial=0.0)))

        p, avg, log_z_p, _ = kernels.gibbs_average(phi, z, log_prior)
        res = emp - avg
        np.multiply(res, sigma, out=w_hat)
        w_hat += w

        w_prev, w = w, w_prev
        dual_prox(pen.kind, w_hat, t * sigma, out=w)

        theta = 1.0 / math.sqrt(1.0 + tau)
        tau = theta * tau
        sigma = stepsize_product / tau

        _check_finite("npdhg_nonsmooth", k, log_z_p, w, tau, sigma)

        due_check = k >= opts.min_iters and k % opts.check_every == 0
        if due_check:
            converged, value = check_optimality(pen.kind, res, w, t, opts.tol)
        if recorder is not None and (recorder.due(k) or converged or k == opts.max_iters):
            if not due_check:
                _, value = check_optimality(pen.kind, res, w, t, opts.tol)
            recorder.record(k, p, avg, log_z_p, z, w, res, value, tau, sigma, theta)
        if converged:
            break

    if not converged:
        _, value = check_optimality(pen.kind, emp - avg, w, t, opts.tol)
    report = _final_report(
        "npdhg_nonsmooth", problem, kernels, k, converged, value, started,
        p, avg, log_z_p, z, w, recorder, max_z, max_u, tau * sigma,
    )
    return SimplexDistribution(p), w.copy(), report


def smooth_stepsizes(t, gamma, op_norm):
    """Constant parameters for the linear-rate scheme.

    ``gamma`` is the strong-convexity modulus of the dual regularizer
    (``1 - alpha`` for the elastic net).
    """
    if not (t > 0.0 and gamma > 0.0 and op_norm > 0.0):
        raise ValueError("t, gamma and the operator norm must be positive")
    l2 = op_norm * op_norm
    theta = 1.0 - (t / (2.0 * gamma * l2)) * (math.sqrt(1.0 + 4.0 * gamma * l2 / t) - 1.0)
    if not (0.0 < theta < 1.0):
        raise ValueError(f"degenerate stepsize parameter theta={theta!r}")
    tau = (1.0 - theta) / theta
    sigma = gamma * tau / t
    return theta, tau, sigma


def npdhg_smooth(problem, gamma=None, init_z=None, init_w=None, opts=None, *, op_norm=None):
    """Constant-stepsize KL-proximal primal-dual iteration with a linear rate.

    Requires the elastic-net penalty with ``alpha < 1`` and ``t > 0``; use
    ``npdhg_nonsmooth`` otherwise.
    """
    opts = opts if opts is not None else SolverOptions()
    kernels = _backend.resolve(opts.backend)
    pen = problem.penalty
    if not isinstance(pen.kind, ElasticNet):
        raise ValueError("npdhg_smooth requires the elastic-net penalty; use npdhg_nonsmooth")
    if pen.kind.alpha >= 1.0:
        raise ValueError("alpha=1 has no strongly convex dual term; use npdhg_nonsmooth")
    if pen.t == 0.0:
        raise ValueError("t must be positive for the smooth scheme")
    if gamma is None:
        gamma = 1.0 - pen.kind.alpha

    phi = problem.phi.values
    m = problem.phi.m
    emp = problem.emp_avg
    log_prior = problem.log_prior
    t = pen.t

    if op_norm is None:
        op_norm = operator_norm_1to2(problem.phi)
    theta, tau, sigma = smooth_stepsizes(t, gamma, op_norm)

    z = _init_dual(init_z, m, "init_z")
    w = _init_dual(init_w, m, "init_w")
    w_prev = w.copy()
    u = np.empty(m)
    w_hat = np.empty(m)

    recorder = _Recorder(problem, kernels, opts.history_every) if opts.record_history else None
    max_z = float(np.abs(z).max(initial=0.0))
    max_u = 0.0
    started = time.perf_counter()
    converged = False
    value = math.inf
    p = avg = log_z_p = None

    k = 0
    for k in range(1, opts.max_iters + 1):
        np.subtract(w, w_prev, out=u)
        u *= theta
        u += w
        max_u = max(max_u, float(np.abs(u).max(initial=0.0)))
        u *= tau
        z += u
        z /= 1.0 + tau
        max_z = max(max_z, float(np.abs(z).max(initial=0.0)))

        p, avg, log_z_p, _ = kernels.gibbs_average(phi, z, log_prior)
        res = emp - avg
        np.multiply(res, sigma, out=w_hat)
        w_hat += w

        w_prev, w = w, w_prev
        prox_elastic_net(w_hat, t * sigma, pen.kind.alpha, out=w)

        _check_finite("npdhg_smooth", k, log_z_p, w, tau, sigma)

        due_check = k >= opts.min_iters and k % opts.check_every == 0
        if due_check:
            converged, value = check_optimality(pen.kind, res, w, t, opts.tol)
        if recorder is not None and (recorder.due(k) or converged or k == opts.max_iters):
            if not due_check:
                _, value = check_optimality(pen.kind, res, w, t, opts.tol)
            recorder.record(k, p, avg, log_z_p, z, w, res, value, tau, sigma, theta)
        if converged:
            break

    if not converged:
        _, value = check_optimality(pen.kind, emp - avg, w, t, opts.tol)
    report = _final_report(
        "npdhg_smooth", problem, kernels, k, converged, value, started,
        p, avg, log_z_p, z, w, recorder, max_z, max_u, tau * sigma,
    )
    return SimplexDistribution(p), w.copy(), report


def fbs_solve(problem, init_w=None, opts=None, *, step=None, sigma_max=None):
    """Accelerated proximal gradient (FISTA-style) on the dual problem.

    The default step is ``1/||A||_2^2`` with the spectral norm from power
    iteration -- the provably safe Lipschitz step for the log-partition
    gradient.  For the elastic net the inertial sequence uses the strong
    convexity of the penalty through ``q = step*mu/(1+step*mu)`` with
    ``mu = t(1-alpha)``.
    """
    opts = opts if opts is not None else SolverOptions()
    kernels = _backend.resolve(opts.backend)
    phi = problem.phi.values
    m = problem.phi.m
    emp = problem.emp_avg
    log_prior = problem.log_prior
    pen = problem.penalty
    t = pen.t

    if sigma_max is None:
        sigma_max = largest_singular_value(problem.phi)
    if step is None:
        if not sigma_max > 0.0:
            raise ValueError("spectral norm must be positive")
        step = 1.0 / (sigma_max * sigma_max)
    if not step > 0.0:
        raise ValueError("step must be positive")

    mu = t * (1.0 - pen.kind.alpha) if isinstance(pen.kind, ElasticNet) else 0.0
    q = step * mu / (1.0 + step * mu)

    x = _init_dual(init_w, m, "init_w")
    x_prev = x.copy()
    y = x.copy()
    v = np.empty(m)
    t_k = 1.0

    recorder = _Recorder(problem, kernels, opts.history_every) if opts.record_history else None
    started = time.perf_counter()
    converged = False
    value = math.inf
    p = avg = log_z_p = None

    k = 0
    for k in range(1, opts.max_iters + 1):
        _, avg_y, log_z_y, _ = kernels.gibbs_average(phi, y, log_prior)
        np.subtract(emp, avg_y, out=v)
        v *= step
        v += y

        x_prev, x = x, x_prev
        dual_prox(pen.kind, v, step * t, out=x)

        t_next = 0.5 * (1.0 - q * t_k * t_k + math.sqrt((1.0 - q * t_k * t_k) ** 2 + 4.0 * t_k * t_k))
        beta = ((t_k - 1.0) / t_next) * (1.0 + step * mu - t_next * step * mu)
        np.subtract(x, x_prev, out=y)
        y *= beta
        y += x
        t_k = t_next

        _check_finite("fbs_solve", k, log_z_y, x, step, beta)

        due_check = k >= opts.min_iters and k % opts.check_every == 0
        due_record = recorder is not None and (recorder.due(k) or k == opts.max_iters)
        if due_check or due_record:
            p, avg, log_z_p, _ = kernels.gibbs_average(phi, x, log_prior)
            res = emp - avg
            passed, value = check_optimality(pen.kind, res, x, t, opts.tol)
            converged = passed and due_check
            if recorder is not None and (due_record or converged):
                recorder.record(k, p, avg, log_z_p, x, x, res, value, step, step, beta)
        if converged:
            break

    if p is None or not converged:
        p, avg, log_z_p, _ = kernels.gibbs_average(phi, x, log_prior)
        _, value = check_optimality(pen.kind, emp - avg, x, t, opts.tol)
    report = _final_report(
        "fbs_solve", problem, kernels, k, converged, value, started,
        p, avg, log_z_p, x, x, recorder, float(np.abs(x).max(initial=0.0)), 0.0, 0.0,
    )
    return SimplexDistribution(p), x.copy(), report


def structmaxent2_solve(problem, init_w=None, opts=None):
    """Cyclic proximal coordinate descent on the elastic-net dual.

    Each coordinate takes a surrogate step bounded by its feature range
    (curvature ``(b_i - a_i)^2 / 4``) followed by the scalar elastic-net prox;
    logits are updated incrementally inside a sweep and the distribution is
    recomputed from scratch once per sweep.  Iteration counts are sweeps.
    """
    opts = opts if opts is not None else SolverOptions()
    kernels = _backend.resolve(opts.backend)
    pen = problem.penalty
    if not isinstance(pen.kind, ElasticNet):
        raise ValueError("structmaxent2_solve supports only the elastic-net penalty")
    alpha = pen.kind.alpha
    t = pen.t

    phi = problem.phi.values
    rows = np.ascontiguousarray(phi)  # row views are contiguous for the sweeps
    m = problem.phi.m
    emp = problem.emp_avg
    log_prior = problem.log_prior

    lo = rows.min(axis=1)
    hi = rows.max(axis=1)
    curvature = 0.25 * (hi - lo) ** 2

    w = _init_dual(init_w, m, "init_w")
    recorder = _Recorder(problem, kernels, opts.history_every) if opts.record_history else None
    started = time.perf_counter()
    converged = False
    value = math.inf
    p = avg = log_z_p = None

    k = 0
    for k in range(1, opts.max_iters + 1):
        logits = kernels.feature_dots(phi, w)
        logits = np.asarray(logits) + log_prior
        for i in range(m):
            if curvature[i] == 0.0:
                # constant feature: gradient vanishes, the penalty pins it at 0
                w[i] = 0.0
                continue
            shifted = np.exp(logits - logits.max())
            mu_i = float(shifted @ rows[i]) / float(shifted.sum())
            grad = mu_i - emp[i]
            lam = t / curvature[i]
            target = w[i] - grad / curvature[i]
            new_wi = math.copysign(max(abs(target) - lam * alpha, 0.0), target)
            new_wi /= 1.0 + lam * (1.0 - alpha)
            delta = new_wi - w[i]
            if delta != 0.0:
                logits += delta * rows[i]
                w[i] = new_wi

        p, avg, log_z_p, _ = kernels.gibbs_average(phi, w, log_prior)
        res = emp - avg
        _check_finite("structmaxent2_solve", k, log_z_p, w, t, alpha)

        due_check = k >= opts.min_iters and k % opts.check_every == 0
        if due_check:
            converged, value = check_optimality(pen.kind, res, w, t, opts.tol)
        if recorder is not None and (recorder.due(k) or converged or k == opts.max_iters):
            if not due_check:
                _, value = check_optimality(pen.kind, res, w, t, opts.tol)
            recorder.record(k, p, avg, log_z_p, w, w, res, value, t, alpha, 0.0)
        if converged:
            break

    if not converged:
        _, value = check_optimality(pen.kind, emp - avg, w, t, opts.tol)
    report = _final_report(
        "structmaxent2_solve", problem, kernels, k, converged, value, started,
        p, avg, log_z_p, w, w, recorder, float(np.abs(w).max(initial=0.0)), 0.0, 0.0,
    )
    return SimplexDistribution(p), w.copy(), report


SOLVERS = {
    "npdhg": npdhg_nonsmooth,
    "npdhg-smooth": npdhg_smooth,
    "fbs": fbs_solve,
    "structmaxent2": structmaxent2_solve,
}


def solver_supports(name, penalty: PenaltySpec) -> bool:
    kind = penalty.kind
    if name == "npdhg-smooth":
        return isinstance(kind, ElasticNet) and kind.alpha < 1.0 and penalty.t > 0.0
    if name == "structmaxent2":
        return isinstance(kind, ElasticNet)
    return name in ("npdhg", "fbs")
