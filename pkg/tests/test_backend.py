"""The compiled and pure-numpy kernels must agree to rounding."""

import numpy as np
import pytest

import klmaxent as km
from klmaxent import _backend, _pycore
from klmaxent.oracles import project_l1_ball_sort_oracle
from klmaxent.solvers import SolverOptions

from conftest import random_problem

compiled = pytest.importorskip(
    "klmaxent._fastcore", reason="compiled extension not built"
)


@pytest.fixture
def case(rng):
    m, n = 5, 40
    phi = np.asfortranarray(rng.normal(size=(m, n)))
    z = rng.normal(size=m)
    log_prior = np.log(rng.dirichlet(np.ones(n)) + 1e-6)
    return phi, z, log_prior


def test_gibbs_average_agrees(case):
    phi, z, log_prior = case
    p_c, avg_c, lz_c, logits_c = compiled.gibbs_average(phi, z, log_prior)
    p_p, avg_p, lz_p, logits_p = _pycore.gibbs_average(phi, z, log_prior)
    assert np.allclose(p_c, p_p, atol=1e-14)
    assert np.allclose(avg_c, avg_p, atol=1e-13)
    assert lz_c == pytest.approx(lz_p, abs=1e-12)
    assert np.allclose(logits_c, logits_p, atol=1e-13)


def test_log_partition_agrees(case):
    phi, z, log_prior = case
    assert compiled.log_partition(phi, z, log_prior) == pytest.approx(
        _pycore.log_partition(phi, z, log_prior), abs=1e-12
    )


def test_model_average_and_dots_agree(case, rng):
    phi, z, _ = case
    p = rng.dirichlet(np.ones(phi.shape[1]))
    assert np.allclose(compiled.model_average(phi, p), _pycore.model_average(phi, p), atol=1e-14)
    assert np.allclose(compiled.feature_dots(phi, z), _pycore.feature_dots(phi, z), atol=1e-13)


def test_max_column_norm_agrees(case):
    phi, _, _ = case
    assert compiled.max_column_norm(phi) == pytest.approx(
        _pycore.max_column_norm(phi), rel=1e-14
    )


def test_l1_projection_agrees(rng):
    for _ in range(300):
        m = int(rng.integers(1, 15))
        w = rng.normal(scale=2.0, size=m)
        radius = float(rng.uniform(0.05, 3.0))
        out_c = compiled.project_l1_ball(w, radius)
        out_p = _pycore.project_l1_ball(w, radius)
        ref = project_l1_ball_sort_oracle(w, radius)
        assert np.allclose(out_c, out_p, atol=1e-13)
        assert np.allclose(out_c, ref, atol=1e-12)


def test_solvers_agree_across_backends(rng):
    problem, _ = random_problem(rng, n=20, m=4, kind=km.ElasticNet(0.6))
    runs = {}
    for backend in _backend.available_backends():
        opts = SolverOptions(backend=backend)
        _, w, rep = km.npdhg_nonsmooth(problem, opts=opts)
        runs[backend] = (w, rep.iterations)
    (w_a, it_a), (w_b, it_b) = runs["compiled"], runs["python"]
    assert it_a == it_b
    assert np.allclose(w_a, w_b, atol=1e-10)


def test_env_override_resolution():
    assert _backend.resolve("python") is _pycore
    assert _backend.resolve("compiled") is compiled
    with pytest.raises(ValueError):
        _backend.resolve("fortran")
