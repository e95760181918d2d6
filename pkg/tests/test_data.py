import json
import warnings

import numpy as np
import pytest

import klmaxent as km
from klmaxent.data import (
    CellTable,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    save_problem,
)
from klmaxent.errors import TableParseError


def two_region_table():
    # region A: 4 cells, 2 fires; region B: 2 cells, 1 fire
    features = np.arange(12, dtype=float).reshape(2, 6)
    fire = np.array([1, 1, 0, 0, 1, 0], dtype=bool)
    regions = ("A", "A", "A", "A", "B", "B")
    return CellTable(tuple(f"c{i}" for i in range(6)), regions, fire, features)


class TestBuildEmpirical:
    def test_worked_two_region_example(self):
        emp = km.build_empirical(two_region_table())
        assert np.allclose(emp.probs, [0.25, 0.25, 0.0, 0.0, 0.5, 0.0])
        assert emp.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_single_region_all_fire_is_uniform(self):
        table = CellTable(
            ("a", "b", "c"), ("r", "r", "r"), np.ones(3, bool), np.ones((1, 3))
        )
        assert np.allclose(km.build_empirical(table).probs, 1.0 / 3.0)

    def test_fireless_region_does_not_perturb(self):
        base = two_region_table()
        extended = CellTable(
            base.cell_ids + ("c6",),
            base.ecoregions + ("C",),
            np.append(base.fire, False),
            np.hstack([base.features, [[99.0], [99.0]]]),
        )
        emp = km.build_empirical(extended)
        assert np.allclose(emp.probs[:6], [0.25, 0.25, 0.0, 0.0, 0.5, 0.0])
        assert emp.probs[6] == 0.0

    def test_no_fires_rejected(self):
        table = CellTable(("a", "b"), ("r", "r"), np.zeros(2, bool), np.ones((1, 2)))
        with pytest.raises(ValueError):
            km.build_empirical(table)

    def test_random_tables_valid(self, rng):
        for _ in range(100):
            n = int(rng.integers(3, 30))
            regions = tuple(str(rng.integers(0, 4)) for _ in range(n))
            fire = rng.random(n) < 0.4
            if not fire.any():
                fire[int(rng.integers(0, n))] = True
            table = CellTable(
                tuple(map(str, range(n))), regions, fire, rng.normal(size=(3, n))
            )
            emp = km.build_empirical(table)
            assert np.all(emp.probs >= 0)
            assert emp.probs.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(emp.probs[~fire] == 0.0)


class TestMinmaxScale:
    def test_hand_example(self):
        scaled, mins, maxs = km.minmax_scale([[0.0, 5.0, 10.0]])
        assert np.allclose(scaled, [[0.0, 0.5, 1.0]])
        assert mins[0] == 0.0 and maxs[0] == 10.0

    def test_unit_range_unchanged(self):
        feats = np.array([[0.0, 0.25, 1.0]])
        scaled, _, _ = km.minmax_scale(feats)
        assert np.allclose(scaled, feats)

    def test_constant_feature_named(self):
        with pytest.raises(ValueError, match=r"\[1\]"):
            km.minmax_scale([[0.0, 1.0], [2.0, 2.0]])

    def test_scaled_operator_norm_bound(self, rng):
        feats = rng.normal(size=(5, 40)) * 3.0 + 1.0
        scaled, _, _ = km.minmax_scale(feats)
        assert km.operator_norm_1to2(km.FeatureMatrix(scaled)) <= np.sqrt(5) + 1e-12


class TestSynthProblem:
    def test_orthonormal_target_one(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")  # must not warn when reachable
            problem = km.synth_problem(4, 4, seed=1, norm_ratio_target=1.0)
        ratio = km.largest_singular_value(problem.phi) / km.operator_norm_1to2(problem.phi)
        assert ratio == pytest.approx(1.0, rel=0.05)

    def test_rank_one_ratio_formula(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            problem = km.synth_problem(10, 1, seed=2, norm_ratio_target=2.0)
        row = np.asarray(problem.phi.values)[0]
        expected = np.sqrt((row**2).sum()) / np.abs(row).max()
        ratio = km.largest_singular_value(problem.phi) / km.operator_norm_1to2(problem.phi)
        assert ratio == pytest.approx(expected, rel=1e-6)

    def test_unreachable_target_warns_and_reports(self):
        with pytest.warns(UserWarning, match="achieved"):
            problem = km.synth_problem(100, 5, seed=3, norm_ratio_target=50.0)
        ratio = km.largest_singular_value(problem.phi) / km.operator_norm_1to2(problem.phi)
        assert ratio >= 5.0  # best effort approaches sqrt(n)

    def test_moderate_target_hit(self):
        problem = km.synth_problem(500, 8, seed=4, norm_ratio_target=10.0)
        ratio = km.largest_singular_value(problem.phi) / km.operator_norm_1to2(problem.phi)
        assert ratio == pytest.approx(10.0, rel=0.05)

    def test_deterministic(self):
        a = km.synth_problem(50, 4, seed=9, norm_ratio_target=4.0)
        b = km.synth_problem(50, 4, seed=9, norm_ratio_target=4.0)
        assert np.array_equal(a.phi.values, b.phi.values)
        assert np.array_equal(a.emp_avg, b.emp_avg)
        assert a.penalty.t == b.penalty.t

    def test_default_penalty_solvable(self):
        problem = km.synth_problem(60, 5, seed=11, norm_ratio_target=4.0)
        assert problem.penalty.t == pytest.approx(0.5 * km.t_max(problem))


class TestTableIO:
    def test_small_csv(self, tmp_path):
        csv_text = (
            "cell_id,ecoregion,fire,f_1,f_2\n"
            "a,north,1,0.5,1.0\n"
            "b,north,0,0.25,2.0\n"
            "c,south,1,0.75,3.0\n"
        )
        path = tmp_path / "t.csv"
        path.write_text(csv_text)
        table = km.load_table(path)
        assert table.n == 3 and table.m == 2
        assert table.fire.tolist() == [True, False, True]
        assert table.features[1, 2] == 3.0

    def test_round_trip(self, tmp_path, rng):
        n = 7
        table = CellTable(
            tuple(f"id{i}" for i in range(n)),
            tuple(str(rng.integers(0, 3)) for _ in range(n)),
            rng.random(n) < 0.5,
            rng.normal(size=(3, n)),
            prior=rng.uniform(0.1, 1.0, size=n),
        )
        path = tmp_path / "rt.csv"
        km.save_table(table, path)
        again = km.load_table(path)
        assert again.cell_ids == table.cell_ids
        assert again.ecoregions == table.ecoregions
        assert np.array_equal(again.fire, table.fire)
        assert np.array_equal(again.features, table.features)
        assert np.array_equal(again.prior, table.prior)

    def test_malformed_row_cites_line(self, tmp_path):
        rows = ["cell_id,ecoregion,fire,f_1"]
        rows += [f"c{i},r,1,0.5" for i in range(6)]
        rows.append("c6,r,1")  # row 7 of the body -> file line 8
        path = tmp_path / "bad.csv"
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(TableParseError) as err:
            km.load_table(path)
        assert err.value.line == 8

    def test_unknown_column_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("cell_id,ecoregion,fire,f_1,humidity\nc,r,1,0.5,2\n")
        with pytest.raises(TableParseError) as err:
            km.load_table(path)
        assert err.value.line == 1

    def test_non_numeric_feature(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("cell_id,ecoregion,fire,f_1\nc,r,1,oops\nd,r,0,1.0\n")
        with pytest.raises(TableParseError) as err:
            km.load_table(path)
        assert err.value.line == 2


class TestProblemIO:
    def test_round_trip(self, tmp_path, rng):
        problem = km.synth_problem(12, 3, seed=5, norm_ratio_target=2.0)
        path = tmp_path / "p.json"
        save_problem(problem, path)
        again = load_problem(path)
        assert np.array_equal(again.phi.values, problem.phi.values)
        assert np.array_equal(again.prior.probs, problem.prior.probs)
        assert np.array_equal(again.emp_avg, problem.emp_avg)
        assert again.penalty == problem.penalty

    def test_group_penalty_round_trip(self, rng):
        part = km.GroupPartition.contiguous([2, 1])
        phi = km.FeatureMatrix(rng.uniform(0, 1, size=(3, 8)))
        prior = km.SimplexDistribution.uniform(8)
        problem = km.Problem(
            phi, prior, km.model_average(phi, prior),
            km.PenaltySpec(km.GroupLasso(part), 0.4),
        )
        again = problem_from_dict(problem_to_dict(problem))
        assert isinstance(again.penalty.kind, km.GroupLasso)
        assert again.penalty.kind.partition.sizes.tolist() == [2, 1]


class TestScalingInvariance:
    def test_prescaled_table_solves_identically(self, rng):
        # scaling inside table_to_problem and scaling by hand must hit the
        # same code path bit for bit
        n = 20
        feats = rng.normal(size=(3, n)) * 5.0
        fire = rng.random(n) < 0.5
        fire[0] = True
        table_raw = CellTable(
            tuple(map(str, range(n))), tuple("r") * n, fire, feats
        )
        scaled, _, _ = km.minmax_scale(feats)
        table_scaled = CellTable(
            tuple(map(str, range(n))), tuple("r") * n, fire, scaled
        )
        pen = km.PenaltySpec(km.ElasticNet(0.9), 0.0)
        prob_a = km.table_to_problem(table_raw, pen, scale=True)
        prob_b = km.table_to_problem(table_scaled, pen, scale=False)
        t = 0.5 * km.t_max(prob_a)
        _, w_a, _ = km.npdhg_nonsmooth(prob_a.with_penalty(pen.with_t(t)))
        _, w_b, _ = km.npdhg_nonsmooth(prob_b.with_penalty(pen.with_t(t)))
        assert np.array_equal(w_a, w_b)
