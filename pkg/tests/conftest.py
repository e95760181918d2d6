import numpy as np
import pytest

import klmaxent as km


def random_problem(rng, n, m, kind, t_frac=0.5, feature_span=(0.0, 1.0)):
    """Random instance with the empirical average inside the column hull."""
    phi = km.FeatureMatrix(rng.uniform(*feature_span, size=(m, n)))
    prior_v = rng.dirichlet(np.full(n, 5.0))
    prior_v = np.maximum(prior_v, 1e-9)
    prior = km.SimplexDistribution(prior_v / prior_v.sum())
    q = rng.dirichlet(np.full(n, 2.0))
    emp = phi.values @ q
    problem = km.Problem(phi, prior, emp, km.PenaltySpec(kind, 1.0))
    t0 = km.t_max(problem)
    return problem.with_penalty(problem.penalty.with_t(t_frac * t0)), t0


def interior_simplex(rng, n, conc=3.0):
    v = np.maximum(rng.dirichlet(np.full(n, conc)), 1e-9)
    return km.SimplexDistribution(v / v.sum())


def random_partition(rng, m):
    sizes = []
    left = m
    while left > 0:
        s = int(rng.integers(1, min(3, left) + 1))
        sizes.append(s)
        left -= s
    return km.GroupPartition.contiguous(sizes)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
