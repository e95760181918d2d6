"""Slow, independent reference implementations for tests and `validate`.

Nothing here shares code paths with the solvers: the KL-proximal update is
re-derived by entropic mirror descent, the primal optimum by an interior
point conic program solved with two different solvers, singular values by a
one-sided Jacobi sweep, and the proximal operators by one-dimensional
searches.  Every oracle certifies its own output and raises OracleError when
the certificate fails.
"""

import math

import numpy as np

from .core import ElasticNet, FeatureMatrix, GroupLasso, LInf, SimplexDistribution, as_probs
from .errors import OracleError
from .solvers import Problem


def kl_prox_oracle(p_k, prior, phi: FeatureMatrix, tau, extrapolated_w,
                   max_iters=1_000_000, cert_tol=5e-8):
    """KL-proximal step by entropic mirror descent with diminishing steps.

    Minimizes ``tau*KL(p||prior) - tau*<u, E_p[phi]> + KL(p||p_k)`` over the
    simplex.  Certified through the first-order residual: at the interior
    minimizer the gradient is constant across coordinates, and a gradient
    spread below ``(1+tau)*cert_tol`` pins the minimizer within about
    ``2*cert_tol`` in l1.  Raises OracleError if the certificate never fires.
    """
    pv = as_probs(p_k)
    prior_v = as_probs(prior)
    u = np.asarray(extrapolated_w, dtype=np.float64)
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    if np.any(pv <= 0.0) or np.any(prior_v <= 0.0):
        raise ValueError("p_k and prior must be strictly interior")

    # gradient of the objective at p: (1+tau) log p - c + const
    c = tau * np.log(prior_v) + np.log(pv) + tau * (phi.values.T @ u)
    lp = np.log(pv)
    scale = 1.0 + tau
    threshold = scale * cert_tol
    for it in range(1, max_iters + 1):
        g = scale * lp - c
        if it % 32 == 0 or it == 1:
            if float(g.max() - g.min()) <= threshold:
                return SimplexDistribution(np.exp(lp))
        # step strictly below 1/(1+tau): a full-size step would coincide with
        # the closed-form map this oracle is meant to check independently
        lp -= (0.5 / (scale * math.sqrt(it))) * g
        hi = lp.max()
        lp -= hi + math.log(np.exp(lp - hi).sum())
    g = scale * lp - c
    if float(g.max() - g.min()) <= threshold:
        return SimplexDistribution(np.exp(lp))
    raise OracleError(
        f"mirror descent failed to certify the KL-proximal step "
        f"(gradient spread {float(g.max() - g.min()):.3e} after {max_iters} iterations)"
    )


def _solve_conic(program, what):
    import cvxpy as cp

    attempts = (
        ("CLARABEL", {"tol_gap_abs": 1e-12, "tol_gap_rel": 1e-12, "tol_feas": 1e-12,
                      "max_iter": 200}),
        ("SCS", {"eps_abs": 1e-11, "eps_rel": 1e-11, "max_iters": 500_000}),
    )
    failures = []
    for name, kwargs in attempts:
        try:
            program.solve(solver=name, **kwargs)
        except cp.error.SolverError as exc:
            failures.append(f"{name}: {exc}")
            continue
        if program.status in ("optimal", "optimal_inaccurate"):
            return
        failures.append(f"{name}: status {program.status}")
    raise OracleError(f"no conic solver produced the {what} solution: {failures}")


def brute_force_primal(problem: Problem, t=None, cert_tol=1e-7):
    """Primal optimum by an interior-point conic program, gap-certified.

    Solves the estimation problem directly (exponential cone for the entropy
    term) and, independently, its concave conjugate formulation; the output
    is certified by evaluating both objectives with this package's own
    arithmetic and requiring the weak-duality gap to close within
    ``cert_tol``.  A failed certificate raises OracleError.  Intended for
    oracle-scale instances only (n <= 10, m <= 5).
    """
    import cvxpy as cp

    from .gibbs import dual_objective, kl_divergence, penalty_conjugate_value

    phi = problem.phi
    if phi.n > 10 or phi.m > 5:
        raise ValueError("oracle scale is n <= 10, m <= 5")
    t = problem.penalty.t if t is None else float(t)
    penalty = problem.penalty.with_t(t)
    kind = penalty.kind
    prior_v = problem.prior.probs
    emp = problem.emp_avg
    phi_rows = np.ascontiguousarray(phi.values)

    p = cp.Variable(phi.n, nonneg=True)
    kl = cp.sum(cp.rel_entr(p, prior_v))
    res = emp - phi_rows @ p
    constraints = [cp.sum(p) == 1]
    if isinstance(kind, ElasticNet) and kind.alpha < 1.0:
        a = kind.alpha
        objective = kl + cp.sum_squares(cp.pos(cp.abs(res) - t * a)) / (2.0 * t * (1.0 - a))
    elif isinstance(kind, ElasticNet):
        objective = kl
        constraints.append(cp.norm_inf(res) <= t)
    elif isinstance(kind, GroupLasso):
        objective = kl
        for g in kind.partition.groups:
            constraints.append(cp.norm(res[g], 2) <= t * math.sqrt(g.size))
    elif isinstance(kind, LInf):
        objective = kl
        constraints.append(cp.norm(res, 1) <= t)
    else:
        raise ValueError(f"unknown penalty kind {kind!r}")
    primal_program = cp.Problem(cp.Minimize(objective), constraints)
    _solve_conic(primal_program, "primal")
    p_hat = np.maximum(np.asarray(p.value, dtype=np.float64), 0.0)
    p_hat = SimplexDistribution(p_hat / p_hat.sum())

    w = cp.Variable(phi.m)
    logits = phi_rows.T @ w + np.log(prior_v)
    if isinstance(kind, ElasticNet):
        a = kind.alpha
        regularizer = t * (a * cp.norm(w, 1) + 0.5 * (1.0 - a) * cp.sum_squares(w))
    elif isinstance(kind, GroupLasso):
        regularizer = t * cp.sum(
            cp.hstack([math.sqrt(g.size) * cp.norm(w[g], 2) for g in kind.partition.groups])
        )
    else:
        regularizer = t * cp.norm_inf(w)
    dual_program = cp.Problem(cp.Maximize(w @ emp - regularizer - cp.log_sum_exp(logits)))
    _solve_conic(dual_program, "conjugate")
    w_hat = np.asarray(w.value, dtype=np.float64)

    # weak duality evaluated with this package's arithmetic bounds the true
    # optimum between the two values, whatever the solvers did internally;
    # interior-point feasibility error on the hard constraints enters through
    # the standard multiplier sensitivity bound
    res_hat = emp - phi_rows @ p_hat.probs
    violation = _constraint_violation(kind, res_hat, t)
    if violation > 1e-7:
        raise OracleError(f"conic solution violates the mismatch constraint by {violation:.3e}")
    conj = penalty_conjugate_value(penalty, res_hat)
    primal_val = kl_divergence(p_hat, problem.prior) + (conj if math.isfinite(conj) else 0.0)
    dual_val = dual_objective(w_hat, problem.prior, phi, penalty, emp)
    gap = primal_val - dual_val
    slack = (float(np.abs(w_hat).sum()) + 1.0) * violation
    if not (-1e-9 - slack <= gap <= cert_tol + slack):
        raise OracleError(
            f"duality-gap certificate failed: primal {primal_val!r} vs dual {dual_val!r} "
            f"(gap {gap:.3e}, tolerance {cert_tol:g} + slack {slack:.1e})"
        )
    return p_hat


def _constraint_violation(kind, residual, t):
    if isinstance(kind, ElasticNet):
        if kind.alpha < 1.0:
            return 0.0
        return max(0.0, float(np.abs(residual).max()) - t)
    if isinstance(kind, GroupLasso):
        worst = 0.0
        for g in kind.partition.groups:
            worst = max(worst, float(np.linalg.norm(residual[g])) - t * math.sqrt(g.size))
        return max(0.0, worst)
    return max(0.0, float(np.abs(residual).sum()) - t)


def dense_svd_oracle(phi: FeatureMatrix, tol=1e-12, max_sweeps=60):
    """Singular values by one-sided Jacobi, descending.

    Orthogonalizes the columns of the thinner orientation with plane
    rotations until every pairwise dot product is negligible; singular values
    are the final column norms.  Rotations preserve the Frobenius norm, which
    doubles as the trace-identity self check.
    """
    if phi.m * phi.n > 10_000:
        raise ValueError("oracle scale is m*n <= 10^4")
    a = np.array(phi.values, dtype=np.float64, order="C")
    if a.shape[1] > a.shape[0]:
        a = np.ascontiguousarray(a.T)
    cols = a.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for i in range(cols - 1):
            for j in range(i + 1, cols):
                ai = a[:, i]
                aj = a[:, j]
                gamma = float(ai @ aj)
                alpha = float(ai @ ai)
                beta = float(aj @ aj)
                if gamma == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                tang = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + tang * tang)
                s = c * tang
                new_i = c * ai - s * aj
                new_j = s * ai + c * aj
                a[:, i] = new_i
                a[:, j] = new_j
                rotated = True
        if not rotated:
            break
    else:
        raise OracleError(f"Jacobi sweeps did not converge in {max_sweeps} passes")
    sigma = np.sort(np.linalg.norm(a, axis=0))[::-1]
    return sigma


# ---------------------------------------------------------------------------
# One-dimensional numeric oracles for the proximal operators.
#
# The searches compare objective *differences* written so every term is
# proportional to (x - pivot): plain value comparisons cannot separate points
# closer than sqrt(machine eps) near a quadratic minimum, while the
# difference form localizes minimizers to ~1e-12.


def _grid_refine_1d(diff_from, lo, hi, rounds=4, points=2001):
    """Nested grid argmin of f via ``diff_from(xs, pivot) = f(xs) - f(pivot)``."""
    pivot = 0.5 * (lo + hi)
    for _ in range(rounds):
        xs = np.linspace(lo, hi, points)
        best = int(np.argmin(diff_from(xs, pivot)))
        step = (hi - lo) / (points - 1)
        pivot = float(xs[best])
        lo = pivot - step
        hi = pivot + step
    return pivot


def _ternary_1d(diff_from, lo, hi, iters=200):
    for _ in range(iters):
        third = (hi - lo) / 3.0
        m1 = lo + third
        m2 = hi - third
        if diff_from(m1, m2) <= 0.0:
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def shrink1_oracle(w_hat, lam):
    """Per-coordinate grid refinement of ``lam|x| + (x - w)^2 / 2``."""
    w_hat = np.asarray(w_hat, dtype=np.float64)
    out = np.empty_like(w_hat)
    for i, w in enumerate(w_hat):
        def diff(x, p):
            return lam * (np.abs(x) - abs(p)) + 0.5 * (x + p - 2.0 * w) * (x - p)

        out[i] = _grid_refine_1d(diff, min(0.0, w) - 1.0, max(0.0, w) + 1.0)
    return out


def prox_elastic_net_oracle(w_hat, lam, alpha):
    """Per-coordinate ternary search on the scalar mixed-penalty objective."""
    w_hat = np.asarray(w_hat, dtype=np.float64)
    out = np.empty_like(w_hat)
    for i, w in enumerate(w_hat):
        def diff(x, p):
            return (
                lam * alpha * (abs(x) - abs(p))
                + (0.5 * lam * (1.0 - alpha) * (x + p) + 0.5 * (x + p - 2.0 * w)) * (x - p)
            )

        out[i] = _ternary_1d(diff, min(0.0, w) - 1.0, max(0.0, w) + 1.0)
    return out


def prox_group_lasso_oracle(w_hat, lam, partition):
    """Per-group radial ternary search: the block solution is collinear with the input."""
    w_hat = np.asarray(w_hat, dtype=np.float64)
    out = np.zeros_like(w_hat)
    for g in partition.groups:
        block = w_hat[g]
        norm = float(np.linalg.norm(block))
        if norm == 0.0:
            continue
        weight = lam * math.sqrt(g.size)

        def diff(s, p):
            return weight * (s - p) + 0.5 * (s + p - 2.0 * norm) * (s - p)

        s_best = _ternary_1d(diff, 0.0, norm)
        out[g] = (s_best / norm) * block
    return out


def prox_linf_oracle(w_hat, lam):
    """Scalar search on the max level with inner clipping.

    For a fixed max level s the best point clips every coordinate to
    [-s, s]; the remaining objective in s is convex.
    """
    w_hat = np.asarray(w_hat, dtype=np.float64)
    a = np.abs(w_hat)
    top = float(a.max(initial=0.0))
    if top == 0.0:
        return np.zeros_like(w_hat)

    def diff(s, p):
        # piecewise-exact max(a-s,0) - max(a-p,0): the naive difference has
        # an absolute noise floor from cancellation once |s-p| is tiny
        hi_level = max(s, p)
        lo_level = min(s, p)
        d = np.where(a >= hi_level, p - s, 0.0)
        straddle = (a > lo_level) & (a < hi_level)
        if straddle.any():
            d[straddle] = np.maximum(a[straddle] - s, 0.0) - np.maximum(a[straddle] - p, 0.0)
        total = np.maximum(a - s, 0.0) + np.maximum(a - p, 0.0)
        return lam * (s - p) + 0.5 * float(d @ total)

    s_best = _ternary_1d(diff, 0.0, top)
    return np.clip(w_hat, -s_best, s_best)


def project_l1_ball_sort_oracle(w_hat, radius):
    """Sort-and-threshold projection onto the l1 ball (O(m log m))."""
    w_hat = np.asarray(w_hat, dtype=np.float64)
    a = np.abs(w_hat)
    if float(a.sum()) <= radius:
        return w_hat.copy()
    desc = np.sort(a)[::-1]
    csum = np.cumsum(desc)
    ks = np.arange(1, a.size + 1)
    taus = (csum - radius) / ks
    k_star = int(np.max(np.flatnonzero(desc > taus)))
    tau = taus[k_star]
    return np.sign(w_hat) * np.maximum(a - tau, 0.0)
