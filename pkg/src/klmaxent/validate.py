"""Oracle-equivalence suite behind the `validate` CLI command.

Each check pits a production code path against an independent oracle and
reports the worst observed discrepancy.
"""

import math

import numpy as np

from .core import (
    ElasticNet,
    FeatureMatrix,
    GroupLasso,
    GroupPartition,
    LInf,
    PenaltySpec,
    SimplexDistribution,
    largest_singular_value,
)
from .gibbs import gibbs_distribution, primal_objective
from .oracles import (
    brute_force_primal,
    dense_svd_oracle,
    kl_prox_oracle,
    project_l1_ball_sort_oracle,
    prox_elastic_net_oracle,
    prox_group_lasso_oracle,
    prox_linf_oracle,
    shrink1_oracle,
)
from .path import t_max
from .prox import prox_elastic_net, prox_group_lasso, prox_linf, project_l1_ball, shrink1
from .solvers import Problem, SolverOptions, npdhg_nonsmooth


def _random_problem(rng, n, m, kind):
    phi = FeatureMatrix(rng.uniform(0.0, 1.0, size=(m, n)))
    prior_v = rng.dirichlet(np.full(n, 5.0))
    prior = SimplexDistribution(np.maximum(prior_v, 1e-9) / np.maximum(prior_v, 1e-9).sum())
    q = rng.dirichlet(np.full(n, 2.0))
    emp = phi.values @ q
    return Problem(phi, prior, emp, PenaltySpec(kind, 1.0))


def _check_kl_prox(seed, cases=25):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 5))
        phi = FeatureMatrix(rng.uniform(-1.0, 1.0, size=(m, n)))
        prior = SimplexDistribution(rng.dirichlet(np.full(n, 3.0)))
        z = rng.normal(size=m)
        tau = float(rng.uniform(0.1, 10.0))
        u = rng.normal(size=m)
        p_k, _ = gibbs_distribution(prior, z, phi)
        z_next = (z + tau * u) / (1.0 + tau)
        closed, _ = gibbs_distribution(prior, z_next, phi)
        numemic = kl_prox_oracle(p_k, prior, phi, tau, u)
        worst = max(worst, float(np.abs(closed.probs - numemic.probs).sum()))
    return worst <= 1e-6, f"max l1 gap {worst:.2e} (tol 1e-6)"


def _check_primal_optimum(seed):
    rng = np.random.default_rng(seed)
    kinds = [
        ElasticNet(0.5),
        ElasticNet(0.9),
        GroupLasso(GroupPartition.contiguous([2, 1])),
        LInf(),
    ]
    worst = 0.0
    # high floor: the residual band alone cannot resolve the flat dual of the
    # constraint-type penalties
    opts = SolverOptions(tol=1e-7, min_iters=20_000, max_iters=400_000)
    for kind in kinds:
        prob = _random_problem(rng, n=6, m=3, kind=kind)
        t = 0.5 * t_max(prob)
        prob = prob.with_penalty(prob.penalty.with_t(t))
        p_star = brute_force_primal(prob)
        p_sol, w, _ = npdhg_nonsmooth(prob, opts=opts)
        res_star = prob.emp_avg - prob.phi.values @ p_star.probs
        res_sol = prob.emp_avg - prob.phi.values @ p_sol.probs
        obj_star = primal_objective(p_star, prob.prior, prob.penalty, res_star)
        obj_sol = primal_objective(p_sol, prob.prior, prob.penalty, res_sol)
        if math.isinf(obj_sol):
            # boundary-tolerance artifact of the indicator penalties: compare
            # the entropy terms instead
            from .gibbs import kl_divergence

            gap = abs(kl_divergence(p_sol, prob.prior) - kl_divergence(p_star, prob.prior))
        else:
            gap = abs(obj_sol - obj_star)
        worst = max(worst, gap)
    return worst <= 1e-5, f"max objective gap {worst:.2e} (tol 1e-5)"


def _check_singular_values(seed, cases=5):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        m = int(rng.integers(2, 8))
        n = int(rng.integers(2, 12))
        phi = FeatureMatrix(rng.normal(size=(m, n)))
        top = dense_svd_oracle(phi)[0]
        est = largest_singular_value(phi, tol=1e-10)
        worst = max(worst, abs(est - top) / top)
    return worst <= 1e-6, f"max relative gap {worst:.2e} (tol 1e-6)"


def _check_prox_operators(seed, cases=50):
    rng = np.random.default_rng(seed)
    partition = GroupPartition.contiguous([3, 2, 1])
    worst = 0.0
    for _ in range(cases):
        w = rng.normal(scale=2.0, size=6)
        lam = float(rng.uniform(0.0, 3.0))
        alpha = float(rng.uniform(0.05, 1.0))
        worst = max(worst, float(np.abs(shrink1(w, lam) - shrink1_oracle(w, lam)).max()))
        worst = max(
            worst,
            float(np.abs(prox_elastic_net(w, lam, alpha)
                         - prox_elastic_net_oracle(w, lam, alpha)).max()),
        )
        worst = max(
            worst,
            float(np.abs(prox_group_lasso(w, lam, partition)
                         - prox_group_lasso_oracle(w, lam, partition)).max()),
        )
        worst = max(worst, float(np.abs(prox_linf(w, lam) - prox_linf_oracle(w, lam)).max()))
    return worst <= 1e-9, f"max abs gap {worst:.2e} (tol 1e-9)"


def _check_l1_projection(seed, cases=100):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        m = int(rng.integers(1, 12))
        w = rng.normal(scale=3.0, size=m)
        radius = float(rng.uniform(0.1, 4.0))
        fast = project_l1_ball(w, radius)
        slow = project_l1_ball_sort_oracle(w, radius)
        worst = max(worst, float(np.abs(fast - slow).max()))
    return worst <= 1e-12, f"max abs gap {worst:.2e} (tol 1e-12)"


def run_validation_suite(seed=0):
    """Run every oracle-equivalence check; returns (name, passed, detail) rows."""
    checks = [
        ("kl-prox closed form vs mirror descent", _check_kl_prox),
        ("solver optimum vs conic program", _check_primal_optimum),
        ("power iteration vs Jacobi SVD", _check_singular_values),
        ("prox operators vs 1-d search", _check_prox_operators),
        ("l1 projection vs sort oracle", _check_l1_projection),
    ]
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
    return results
