import warnings

import numpy as np
import pytest

from warpfit.align import (
    OptimizerConfig,
    alignment_cost,
    batch_alignment_costs,
    minimize_alignment,
    scale_closed_form,
)
from warpfit.deform import (
    FiniteDifferenceFamily,
    ParameterVector,
    location_family,
    location_scale_family,
    scale_family,
)
from warpfit.empirical import from_samples, variation_squared, wasserstein_r
from warpfit.exceptions import DegenerateDenominator, EmptyCollection, ParamOutOfBox, NoConvergenceWarning

NM = OptimizerConfig(method="nelder-mead")


def _asinh_family():
    return FiniteDifferenceFamily(
        apply=lambda lam, x: np.arcsinh(np.exp(lam[1]) * (x - lam[0])),
        inverse=lambda lam, y: lam[0] + np.sinh(y) / np.exp(lam[1]),
        lower=[-3.0, -1.0],
        upper=[3.0, 1.0],
        identity=[0.0, 0.0],
    )


class TestAlignmentCost:
    def test_identity_equals_raw_variation(self, rng):
        xs = [rng.normal(size=9), rng.normal(size=9) + 2]
        theta = ParameterVector([[0.0, 1.0], [0.0, 1.0]], 1)
        assert alignment_cost(xs, location_scale_family(), theta) == pytest.approx(variation_squared(xs))

    def test_proportional_example(self):
        theta = ParameterVector([[1.0], [0.5]], 0)
        assert alignment_cost([[1, 2], [2, 4]], scale_family(), theta) == 0.0

    def test_out_of_box(self):
        with pytest.raises(ParamOutOfBox):
            alignment_cost([[1, 2], [2, 4]], scale_family(), ParameterVector([[1.0], [-0.5]], 0))

    def test_nonnegative(self, rng):
        fam = location_scale_family()
        xs = [rng.exponential(size=10), rng.normal(size=10)]
        for _ in range(50):
            theta = ParameterVector([[rng.uniform(-3, 3), rng.uniform(0.1, 5)], [0.0, 1.0]], 1)
            assert alignment_cost(xs, fam, theta) >= 0.0


class TestMinimizeAlignment:
    @pytest.mark.parametrize("config", [None, NM], ids=["auto", "nelder-mead"])
    def test_proportional(self, config):
        res = minimize_alignment([[1, 2], [2, 4]], scale_family(), ref_index=0, config=config)
        assert res.theta_hat.thetas[1, 0] == pytest.approx(0.5, abs=1e-6)
        assert abs(res.cost) < 1e-10

    def test_identical_samples(self, rng):
        x = rng.normal(size=30)
        res = minimize_alignment([x, x, x], location_scale_family())
        np.testing.assert_allclose(res.theta_hat.thetas, [[0, 1]] * 3, atol=1e-9)
        assert res.cost < 1e-20

    def test_shapes_not_scale_related(self, rng):
        costs = [
            minimize_alignment([rng.normal(size=500), rng.exponential(size=500)], scale_family()).cost
            for _ in range(10)
        ]
        assert min(costs) > 0.01

    def test_reported_cost_is_cost_at_theta(self, rng):
        fam = location_scale_family()
        xs = [rng.normal(size=40), rng.laplace(size=40) * 2 + 1, rng.exponential(size=40)]
        for config in (None, NM):
            res = minimize_alignment(xs, fam, config=config)
            assert res.cost == pytest.approx(alignment_cost(xs, fam, res.theta_hat), abs=1e-12)

    def test_minimizer_dominance(self, rng):
        fam = location_scale_family()
        xs = [rng.normal(size=25), rng.standard_t(3, size=25) * 3 - 1]
        res = minimize_alignment(xs, fam)
        for _ in range(100):
            probe = ParameterVector([[rng.uniform(-5, 5), rng.uniform(0.05, 10)], [0.0, 1.0]], 1)
            assert alignment_cost(xs, fam, probe) >= res.cost - 1e-9

    def test_exact_and_search_agree(self, rng):
        xs = [rng.normal(size=60), rng.exponential(size=60) * 2]
        fam = location_scale_family()
        a = minimize_alignment(xs, fam)
        b = minimize_alignment(xs, fam, config=NM)
        assert a.method == "exact" and b.method == "nelder-mead"
        assert b.cost == pytest.approx(a.cost, rel=1e-6)
        np.testing.assert_allclose(b.theta_hat.thetas, a.theta_hat.thetas, rtol=1e-4)

    def test_unequal_sizes(self, rng):
        xs = [rng.normal(size=13), rng.normal(size=29) * 2 + 1]
        a = minimize_alignment(xs, location_scale_family())
        b = minimize_alignment(xs, location_scale_family(), config=NM)
        assert a.cost == pytest.approx(b.cost, rel=1e-6, abs=1e-12)

    def test_nonlinear_family_recovers_truth(self, rng):
        fam = _asinh_family()
        eps = rng.normal(size=400)
        true = np.array([0.7, 0.4])
        x = fam.inverse(true, eps)
        ref = fam.inverse(fam.identity, eps)
        res = minimize_alignment([x, ref], fam)
        assert res.method == "nelder-mead"
        np.testing.assert_allclose(res.theta_hat.thetas[0], true, atol=1e-6)

    def test_reference_pinning(self, rng):
        xs = [rng.normal(size=20) for _ in range(3)]
        res = minimize_alignment(xs, location_scale_family(), ref_index=0, ref_value=[1.0, 2.0])
        np.testing.assert_array_equal(res.theta_hat.thetas[0], [1.0, 2.0])
        assert res.theta_hat.ref_index == 0

    def test_needs_two_samples(self):
        with pytest.raises(EmptyCollection):
            minimize_alignment([[1.0, 2.0]], location_family())

    def test_no_convergence_flagged(self, rng):
        xs = [rng.normal(size=30), rng.exponential(size=30)]
        cfg = OptimizerConfig(method="nelder-mead", budget_per_dim=3, n_starts=1)
        with pytest.warns(NoConvergenceWarning):
            res = minimize_alignment(xs, location_scale_family(), config=cfg)
        assert not res.converged
        assert res.cost == pytest.approx(alignment_cost(xs, location_scale_family(), res.theta_hat))

    def test_deterministic(self, rng):
        xs = [rng.normal(size=30), rng.exponential(size=30)]
        a = minimize_alignment(xs, _asinh_family())
        b = minimize_alignment(xs, _asinh_family())
        np.testing.assert_array_equal(a.theta_hat.thetas, b.theta_hat.thetas)
        assert a.cost == b.cost

    def test_null_cost_shrinks_with_n(self, rng):
        fam = location_scale_family()
        medians = []
        for n in (100, 400, 1600):
            costs = [
                minimize_alignment([rng.normal(size=n), 3 + 2 * rng.normal(size=n)], fam).cost
                for _ in range(50)
            ]
            medians.append(np.median(costs))
        assert medians[0] > medians[1] > medians[2]


class TestBatch:
    def test_matches_single(self, rng):
        stack = np.sort(rng.normal(size=(6, 3, 15)) * [[[1.0], [2.0], [0.5]]], axis=2)
        costs, failed = batch_alignment_costs(stack, location_scale_family())
        assert failed == 0
        for b in range(6):
            ref = minimize_alignment(list(stack[b]), location_scale_family()).cost
            assert costs[b] == pytest.approx(ref, rel=1e-10, abs=1e-14)

    def test_nonlinear_family(self, rng):
        stack = np.sort(rng.normal(size=(2, 2, 20)), axis=2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NoConvergenceWarning)
            costs, _ = batch_alignment_costs(stack, _asinh_family())
        assert np.all(costs >= 0)


class TestScaleClosedForm:
    def test_example(self):
        assert scale_closed_form([1, 2], [2, 4]) == pytest.approx(0.5)

    def test_self(self, rng):
        x = rng.normal(size=10)
        assert scale_closed_form(x, x) == pytest.approx(1.0)

    def test_degenerate(self):
        with pytest.raises(DegenerateDenominator):
            scale_closed_form([1, 2], [0, 0])

    def test_matches_optimizer(self, rng):
        for _ in range(50):
            x1 = rng.exponential(size=rng.integers(5, 40))
            x2 = rng.exponential(size=rng.integers(5, 40)) * rng.uniform(0.3, 3)
            expected = scale_closed_form(x1, x2)
            for config in (None, NM):
                res = minimize_alignment([x1, x2], scale_family(), ref_index=0, config=config)
                assert res.theta_hat.thetas[1, 0] == pytest.approx(expected, abs=1e-6)


class TestCostStability:
    def test_law_of_root_cost_is_lipschitz_in_inputs(self):
        from scipy import integrate, stats

        from warpfit.deform import lipschitz_bound

        fam = location_scale_family(mu_bounds=(-10, 10), sigma_bounds=(0.5, 4.0))
        mu = [stats.norm(0, 1), stats.norm(1, 1.5)]
        mu_p = [stats.norm(0, 1), stats.expon(1.0)]
        sq = [integrate.quad(lambda t: (a.ppf(t) - b.ppf(t)) ** 2, 0, 1, limit=200)[0] for a, b in zip(mu, mu_p)]
        L = lipschitz_bound(fam, (-10, 10))
        assert L == pytest.approx(2.0)
        n, R = 50, 4000
        rng = np.random.default_rng(8)

        def root_costs(laws):
            stack = np.stack([np.sort(law.ppf(rng.random((R, n))), axis=1) for law in laws], axis=1)
            costs, failed = batch_alignment_costs(stack, fam)
            assert failed == 0
            return np.sqrt(np.maximum(costs, 0.0))

        dist = wasserstein_r(from_samples(root_costs(mu)), from_samples(root_costs(mu_p)), 2)
        assert dist <= L * np.sqrt(np.mean(sq)) + 0.05
