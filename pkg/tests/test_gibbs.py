import math

import numpy as np
import pytest

import klmaxent as km

from conftest import interior_simplex
from klmaxent.gibbs import penalty_conjugate_value, penalty_dual_value


class TestKlDivergence:
    def test_identical_is_zero(self):
        assert km.kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0

    def test_point_mass_log2(self):
        assert km.kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)

    def test_pinsker(self, rng):
        for _ in range(200):
            p = rng.dirichlet(np.ones(6))
            q = np.maximum(rng.dirichlet(np.ones(6)), 1e-9)
            q /= q.sum()
            l1 = np.abs(p - q).sum()
            assert km.kl_divergence(p, q) >= 0.5 * l1 * l1 - 1e-12

    def test_zero_in_q_rejected(self):
        with pytest.raises(ValueError):
            km.kl_divergence([0.5, 0.5], [1.0, 0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            km.kl_divergence([1.0], [0.5, 0.5])


class TestGibbsDistribution:
    def test_zero_dual_returns_prior(self, rng):
        prior = interior_simplex(rng, 5)
        phi = km.FeatureMatrix(rng.normal(size=(3, 5)))
        p, cache = km.gibbs_distribution(km.SimplexDistribution(prior.probs), np.zeros(3), phi)
        assert np.allclose(p.probs, prior.probs, atol=1e-14)
        assert cache.log_partition == pytest.approx(0.0, abs=1e-12)

    def test_hand_example(self):
        prior = km.SimplexDistribution.uniform(2)
        phi = km.FeatureMatrix([[1.0, 0.0]])
        p, _ = km.gibbs_distribution(prior, np.array([math.log(3.0)]), phi)
        assert np.allclose(p.probs, [0.75, 0.25], atol=1e-14)

    def test_extreme_logits_stay_finite(self, rng):
        phi = km.FeatureMatrix(rng.normal(size=(4, 8)))
        prior = km.SimplexDistribution.uniform(8)
        z = rng.normal(size=4)
        z *= 500.0 / np.linalg.norm(z)
        p, cache = km.gibbs_distribution(prior, z, phi)
        assert np.all(np.isfinite(p.probs))
        assert p.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert math.isfinite(cache.log_partition)

    def test_cache_normalizes(self, rng):
        phi = km.FeatureMatrix(rng.normal(size=(3, 6)))
        prior = interior_simplex(rng, 6)
        p, cache = km.gibbs_distribution(prior, rng.normal(size=3), phi)
        assert np.exp(cache.logits - cache.log_partition).sum() == pytest.approx(1.0, abs=1e-10)

    def test_shift_invariance(self, rng):
        # a constant feature row with matching dual entry shifts all logits
        # equally and must not move the distribution
        base = rng.normal(size=(2, 6))
        with_const = np.vstack([base, np.ones(6)])
        prior = interior_simplex(rng, 6)
        z = rng.normal(size=2)
        p0, _ = km.gibbs_distribution(prior, z, km.FeatureMatrix(base))
        p1, _ = km.gibbs_distribution(prior, np.append(z, 7.5), km.FeatureMatrix(with_const))
        assert np.allclose(p0.probs, p1.probs, atol=1e-12)

    def test_nan_rejected(self):
        prior = km.SimplexDistribution.uniform(2)
        phi = km.FeatureMatrix([[1.0, 0.0]])
        with pytest.raises(ValueError):
            km.gibbs_distribution(prior, np.array([np.nan]), phi)


class TestPrimalObjective:
    def test_zero_at_prior_with_zero_residual(self):
        prior = km.SimplexDistribution.uniform(3)
        pen = km.PenaltySpec(km.ElasticNet(0.5), 1.0)
        assert km.primal_objective(prior, prior, pen, np.zeros(2)) == 0.0

    def test_elastic_net_hand_value(self):
        prior = km.SimplexDistribution.uniform(3)
        pen = km.PenaltySpec(km.ElasticNet(0.5), 1.0)
        val = km.primal_objective(prior, prior, pen, np.array([2.0, 0.0]))
        assert val == pytest.approx(2.25, abs=1e-12)

    def test_linf_inside_ball_is_kl_only(self, rng):
        prior = km.SimplexDistribution.uniform(4)
        p = interior_simplex(rng, 4)
        pen = km.PenaltySpec(km.LInf(), 1.0)
        residual = np.array([0.4, -0.5])  # l1 norm 0.9 <= t
        assert km.primal_objective(p, prior, pen, residual) == pytest.approx(
            km.kl_divergence(p, prior)
        )

    def test_group_violation_flags_infinity(self):
        prior = km.SimplexDistribution.uniform(3)
        part = km.GroupPartition.contiguous([2])
        pen = km.PenaltySpec(km.GroupLasso(part), 0.1)
        val = km.primal_objective(prior, prior, pen, np.array([1.0, 1.0]))
        assert math.isinf(val)

    def test_zero_t_with_nonzero_residual(self):
        prior = km.SimplexDistribution.uniform(3)
        for kind in (km.ElasticNet(0.5), km.ElasticNet(1.0), km.LInf()):
            pen = km.PenaltySpec(kind, 0.0)
            assert math.isinf(km.primal_objective(prior, prior, pen, np.array([0.3, 0.0])))


class TestDualObjective:
    def test_zero_dual_is_zero(self, rng):
        phi = km.FeatureMatrix(rng.normal(size=(3, 5)))
        prior = interior_simplex(rng, 5)
        pen = km.PenaltySpec(km.ElasticNet(0.7), 2.0)
        val = km.dual_objective(np.zeros(3), prior, phi, pen, rng.normal(size=3))
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_hand_example(self):
        phi = km.FeatureMatrix(np.eye(2))
        prior = km.SimplexDistribution.uniform(2)
        pen = km.PenaltySpec(km.ElasticNet(1.0), 1.0)
        val = km.dual_objective(np.array([1.0, 0.0]), prior, phi, pen, np.array([1.0, 0.0]))
        assert val == pytest.approx(1.0 - 1.0 - math.log((math.e + 1.0) / 2.0), abs=1e-12)

    def test_weak_duality(self, rng):
        phi = km.FeatureMatrix(rng.uniform(0, 1, size=(3, 6)))
        prior = interior_simplex(rng, 6)
        emp = phi.values @ rng.dirichlet(np.ones(6))
        pen = km.PenaltySpec(km.ElasticNet(0.5), 0.3)
        for _ in range(50):
            w = rng.normal(size=3)
            p = km.SimplexDistribution(rng.dirichlet(np.ones(6)))
            res = emp - phi.values @ p.probs
            primal = km.primal_objective(p, prior, pen, res)
            dual = km.dual_objective(w, prior, phi, pen, emp)
            assert dual <= primal + 1e-9


class TestPenaltyValues:
    def test_dual_values(self):
        w = np.array([3.0, -4.0])
        assert penalty_dual_value(km.ElasticNet(1.0), w) == pytest.approx(7.0)
        assert penalty_dual_value(km.ElasticNet(0.5), w) == pytest.approx(0.5 * 7.0 + 0.25 * 25.0)
        part = km.GroupPartition.contiguous([2])
        assert penalty_dual_value(km.GroupLasso(part), w) == pytest.approx(math.sqrt(2) * 5.0)
        assert penalty_dual_value(km.LInf(), w) == pytest.approx(4.0)

    def test_conjugate_zero_on_zero_residual(self):
        for kind in (km.ElasticNet(0.3), km.ElasticNet(1.0), km.LInf()):
            pen = km.PenaltySpec(kind, 1.0)
            assert penalty_conjugate_value(pen, np.zeros(3)) == 0.0
