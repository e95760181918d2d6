import json

import numpy as np
import pytest

import klmaxent as km
from klmaxent.bench import compare_backends, run_benchmark
from klmaxent.solvers import SolverOptions

from conftest import random_problem


@pytest.fixture(scope="module")
def tiny_problem():
    rng = np.random.default_rng(42)
    problem, _ = random_problem(rng, n=30, m=4, kind=km.ElasticNet(0.9))
    return problem


class TestRunBenchmark:
    def test_one_row_per_combination(self, tiny_problem):
        report = run_benchmark(
            [("tiny", tiny_problem)],
            solvers=["npdhg", "structmaxent2"],
            penalties=[("en(0.9)", km.ElasticNet(0.9))],
            runs=1,
            opts=SolverOptions(max_iters=20_000),
        )
        assert len(report.rows) == 2
        for row in report.rows:
            assert row.supported
            assert row.runs == 1
            assert row.total_iterations > 0
            assert row.time_median > 0
            assert np.isfinite(row.op_norm) and np.isfinite(row.sigma_max)

    def test_unsupported_pair_marked(self, tiny_problem):
        part = km.GroupPartition.contiguous([2, 2])
        report = run_benchmark(
            [("tiny", tiny_problem)],
            solvers=["structmaxent2"],
            penalties=[("gl", km.GroupLasso(part))],
            runs=1,
        )
        assert len(report.rows) == 1
        assert not report.rows[0].supported
        assert report.rows[0].runs == 0

    def test_json_and_table(self, tiny_problem):
        report = run_benchmark(
            [("tiny", tiny_problem)],
            solvers=["npdhg"],
            penalties=[("en(0.9)", km.ElasticNet(0.9))],
            runs=2,
            opts=SolverOptions(max_iters=20_000),
        )
        payload = report.to_json_dict()
        json.dumps(payload)
        assert payload["schema_version"] == 1
        assert len(payload["rows"][0]["times"]) == 2
        table = report.format_table()
        assert "npdhg" in table and "tiny" in table

    def test_coordinate_descent_needs_more_sweeps(self, rng):
        # dense scaled features: the range-based curvature bound throttles
        # coordinate steps while the KL stepsizes stay large
        n, m = 300, 10
        scaled, _, _ = km.minmax_scale(rng.normal(size=(m, n)))
        phi = km.FeatureMatrix(scaled)
        prior = km.SimplexDistribution.uniform(n)
        emp = phi.values @ rng.dirichlet(np.ones(n))
        problem = km.Problem(phi, prior, emp, km.PenaltySpec(km.ElasticNet(0.95), 1.0))
        problem = problem.with_penalty(problem.penalty.with_t(0.4 * km.t_max(problem)))
        opts = SolverOptions(min_iters=0, max_iters=100_000)
        _, _, rep_pd = km.npdhg_nonsmooth(problem, opts=opts)
        _, _, rep_cd = km.structmaxent2_solve(problem, opts=opts)
        assert rep_pd.converged and rep_cd.converged
        assert rep_cd.iterations > rep_pd.iterations


class TestCompareBackends:
    def test_reports_all_backends(self, tiny_problem):
        out = compare_backends(tiny_problem, runs=1, opts=SolverOptions(max_iters=20_000))
        assert "python" in out["backends"]
        for row in out["backends"].values():
            assert row["time_median"] > 0
            assert row["iterations"] > 0
        if len(out["backends"]) > 1:
            assert out["max_w_difference"] <= 1e-10
