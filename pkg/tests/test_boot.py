import math
import warnings

import numpy as np
import pytest

from warpfit.align import minimize_alignment
from warpfit.boot import (
    BootstrapConfig,
    bootstrap_statistics,
    empirical_quantile_of,
    gof_test,
    null_pool,
    rejection_frequency,
    resample_stack,
    threshold_test,
)
from warpfit.deform import location_scale_family
from warpfit.empirical import EmpiricalDistribution, from_samples, resample, wasserstein_r
from warpfit.exceptions import EmptyStats, WarpfitError
from warpfit.rng import RandomStream
from warpfit.scenarios import alternative_scenario, generate, null_scenario


def _null_data(n, seed, J=2):
    return generate(null_scenario(J, n), RandomStream(seed))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(B=0), dict(alpha=0.0), dict(alpha=1.0), dict(m=0), dict(m_exponent=-1.0),
         dict(m_exponent=None), dict(scheme="paired")],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            BootstrapConfig(**kwargs)

    @pytest.mark.parametrize(
        "n, beta, expected",
        [(500, 0.9, 269), (1000, 0.9, 502), (500, 1.0, 500), (100, 0.5, 10), (2, 0.9, 2), (1, 0.5, 1)],
    )
    def test_resample_size(self, n, beta, expected):
        assert BootstrapConfig(m_exponent=beta).resample_size(n) == expected

    def test_explicit_m_clamped(self):
        assert BootstrapConfig(m=50).resample_size(20) == 20
        assert BootstrapConfig(m=7).resample_size(20) == 7


class TestEmpiricalQuantileOf:
    def test_examples(self):
        assert empirical_quantile_of([1, 2, 3, 4], 0.5) == 2
        assert empirical_quantile_of([1, 2, 3, 4], 0.999) == 4
        assert empirical_quantile_of([7], 0.3) == 7

    def test_ceil_guard(self):
        stats = np.arange(1.0, 501.0)
        # 500 * 0.95 evaluates to 474.99999999999994
        assert empirical_quantile_of(stats, 0.95) == 475.0

    def test_empty(self):
        with pytest.raises(EmptyStats):
            empirical_quantile_of([], 0.5)

    @pytest.mark.parametrize("level", [0.0, 1.0, -0.2])
    def test_level_range(self, level):
        with pytest.raises(ValueError):
            empirical_quantile_of([1.0], level)


class TestResampling:
    def test_stack_shape_and_sorted(self):
        ds = [from_samples(np.arange(10.0)), from_samples(np.arange(10.0) * 2)]
        s = resample_stack(ds, 4, 3, seed=1)
        assert s.shape == (3, 2, 4)
        assert np.all(np.diff(s, axis=2) >= 0)

    def test_stack_blocks_independent_of_B(self):
        ds = [from_samples(np.arange(10.0)), from_samples(np.arange(10.0) * 2)]
        a = resample_stack(ds, 5, 3, seed=9)
        b = resample_stack(ds, 5, 7, seed=9)
        np.testing.assert_array_equal(a, b[:3])

    def test_pool_recovers_common_law(self):
        ds = _null_data(300, 4)
        res = minimize_alignment(ds, "location-scale")
        pool = null_pool(ds, "location-scale", res.theta_hat)
        assert pool.size == 600
        # warped samples agree with the reference sample
        ref = ds[res.theta_hat.ref_index].values
        assert abs(pool.mean() - ref.mean()) < 0.05 * ref.std()
        assert pool.std() == pytest.approx(ref.std(), rel=0.05)


class TestBootstrapStatistics:
    def test_degenerate_constant(self):
        ds = [[3.0, 3.0, 3.0], [3.0, 3.0, 3.0]]
        out = bootstrap_statistics(ds, "location", cfg=BootstrapConfig(B=1))
        np.testing.assert_array_equal(out, [0.0])

    @pytest.mark.parametrize("scheme", ["pooled", "independent"])
    def test_deterministic_and_sorted(self, scheme):
        ds = _null_data(80, 2)
        cfg = BootstrapConfig(B=50, seed=12, scheme=scheme)
        a = bootstrap_statistics(ds, "location-scale", cfg=cfg)
        b = bootstrap_statistics(ds, "location-scale", cfg=cfg)
        np.testing.assert_array_equal(a, b)
        assert np.all(np.diff(a) >= 0) and a.size == 50

    def test_fresh_seed_rerun_agrees(self):
        ds = _null_data(200, 3)
        m = BootstrapConfig().resample_size(200)
        a = m * bootstrap_statistics(ds, "location-scale", cfg=BootstrapConfig(B=200, seed=1))
        b = m * bootstrap_statistics(ds, "location-scale", cfg=BootstrapConfig(B=200, seed=2))
        se = math.sqrt(a.var() / a.size + b.var() / b.size)
        assert abs(a.mean() - b.mean()) < 4 * se

    def test_pooled_mean_matches_monte_carlo(self):
        # averaged over datasets, m * A* under the pooled scheme tracks the
        # law of m * A_m on fresh null data of size m
        n = 200
        cfg = BootstrapConfig(B=100, scheme="pooled")
        m = cfg.resample_size(n)
        means = [
            (m * bootstrap_statistics(_null_data(n, 1000 + s), "location-scale", cfg=cfg)).mean()
            for s in range(40)
        ]
        ref = [m * minimize_alignment(_null_data(m, 5000 + k), "location-scale").cost for k in range(800)]
        se = math.sqrt(np.var(means) / len(means) + np.var(ref) / len(ref))
        assert abs(np.mean(means) - np.mean(ref)) < 4 * se

    def test_unequal_sizes_rejected(self):
        with pytest.raises(WarpfitError):
            bootstrap_statistics([np.arange(5.0), np.arange(6.0)], "location")

    def test_failures_counted(self):
        ds = _null_data(30, 1)
        _, failed = bootstrap_statistics(
            ds, "location-scale", cfg=BootstrapConfig(B=5), return_failures=True
        )
        assert failed == 0


class TestGofTest:
    def test_report_fields(self):
        rep = gof_test(_null_data(100, 5), "location-scale", cfg=BootstrapConfig(B=100, seed=3))
        assert rep.kind == "gof" and rep.n == 100 and rep.m_n == 64 and rep.B == 100
        assert rep.statistic == pytest.approx(100 * rep.A_n)
        assert 0.0 <= rep.p_value <= 1.0
        assert rep.reject == (rep.statistic > rep.critical_value)
        assert rep.extra["scheme"] == "pooled"
        d = rep.to_dict()
        assert set(d) >= {"statistic", "critical_value", "p_value", "reject", "n", "m_n", "B", "seed", "kind"}

    def test_byte_identical_reports(self):
        ds = _null_data(60, 8)
        a = gof_test(ds, "location-scale", cfg=BootstrapConfig(B=60, seed=4)).to_dict()
        b = gof_test(ds, "location-scale", cfg=BootstrapConfig(B=60, seed=4)).to_dict()
        assert repr(a) == repr(b)

    def test_warns_when_m_close_to_n(self):
        with pytest.warns(UserWarning, match="m/n -> 0"):
            gof_test(_null_data(50, 1), "location-scale", cfg=BootstrapConfig(B=10, m_exponent=1.0))

    def test_p_value_coherence(self, rng):
        # reject <=> p <= alpha, exactly, under the order-statistic rule
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            for k in range(1000):
                n = int(rng.integers(8, 25))
                B = int(rng.integers(5, 60))
                alpha = float(rng.choice([0.01, 0.05, 0.1, 0.2, rng.uniform(0.01, 0.5)]))
                xs = [rng.normal(size=n), rng.gamma(rng.uniform(0.5, 5), size=n)]
                rep = gof_test(xs, "location-scale",
                               cfg=BootstrapConfig(B=B, alpha=alpha, seed=k, m_exponent=rng.uniform(0.5, 1)))
                assert rep.reject == (rep.p_value <= alpha)
                assert rep.reject == (rep.statistic > rep.critical_value)

    def test_monotone_in_alpha(self):
        data = generate(alternative_scenario(2, 80, "laplace(0,1)"), RandomStream(2))
        decisions = [
            gof_test(data, "location-scale", cfg=BootstrapConfig(B=100, seed=7, alpha=a)).reject
            for a in (0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.99)
        ]
        first = decisions.index(True) if True in decisions else len(decisions)
        assert all(decisions[first:])

    def test_alpha_near_one_rejects(self):
        rep = gof_test(_null_data(60, 3), "location-scale", cfg=BootstrapConfig(B=50, alpha=0.999))
        assert rep.reject

    def test_exponential_alternative_detected(self):
        data = generate(alternative_scenario(2, 200, "exp(1)"), RandomStream(11))
        assert gof_test(data, "location-scale", cfg=BootstrapConfig(B=200)).reject


class TestThresholdTest:
    def test_requires_positive_delta0(self):
        for bad in (None, 0.0, -1.0):
            with pytest.raises(ValueError):
                threshold_test(_null_data(20, 1), "location-scale", delta0=bad)

    def test_pooled_scheme_refused(self):
        with pytest.raises(ValueError):
            threshold_test(_null_data(20, 1), "location-scale", delta0=0.1,
                           cfg=BootstrapConfig(scheme="pooled"))

    def test_defaults_to_sqrt_n(self):
        rep = threshold_test(_null_data(400, 1), "location-scale", delta0=0.1)
        assert rep.m_n == 20 and rep.kind == "threshold" and rep.extra["scheme"] == "independent"
        assert rep.statistic == pytest.approx(20 * (rep.A_n - 0.1))

    def test_p_value_coherence(self, rng):
        # reject <=> p < alpha, exactly
        for k in range(300):
            n = int(rng.integers(8, 30))
            xs = [rng.normal(size=n), rng.gamma(rng.uniform(0.5, 5), size=n)]
            delta0 = float(rng.uniform(0.001, 0.2))
            alpha = float(rng.choice([0.05, 0.1, rng.uniform(0.01, 0.5)]))
            rep = threshold_test(xs, "location-scale", delta0=delta0,
                                 cfg=BootstrapConfig(B=int(rng.integers(5, 60)), alpha=alpha, seed=k,
                                                     m_exponent=0.5))
            assert rep.reject == (rep.p_value < alpha)
            assert rep.reject == (rep.statistic < rep.critical_value)

    def test_direction(self):
        null = [threshold_test(_null_data(300, 100 + k), "location-scale", delta0=0.1,
                               cfg=BootstrapConfig(B=100, m_exponent=0.5, seed=k)).reject for k in range(20)]
        assert np.mean(null) >= 0.9
        alt = []
        for k in range(20):
            data = generate(alternative_scenario(2, 300, "exp(1)"), RandomStream(200 + k))
            a_n = minimize_alignment(data, "location-scale").cost
            alt.append(threshold_test(data, "location-scale", delta0=a_n / 10,
                                      cfg=BootstrapConfig(B=100, m_exponent=0.5, seed=k)).reject)
        assert np.mean(alt) <= 0.1


class TestRejectionFrequency:
    def test_deterministic_and_thread_independent(self):
        sc = null_scenario(2, 60)
        cfg = BootstrapConfig(B=40)
        a = rejection_frequency(sc, 12, cfg, seed=3, threads=1)
        b = rejection_frequency(sc, 12, cfg, seed=3, threads=4)
        assert a == b
        assert 0.0 <= a <= 1.0

    def test_single_repetition(self):
        f = rejection_frequency(null_scenario(2, 30), 1, BootstrapConfig(B=20), seed=1)
        assert f in (0.0, 1.0)

    def test_invalid_K(self):
        with pytest.raises(ValueError):
            rejection_frequency(null_scenario(2, 30), 0)

    def test_unknown_test(self):
        with pytest.raises(ValueError):
            rejection_frequency(null_scenario(2, 30), 1, BootstrapConfig(B=5), test="ks")


class TestPlainW2BootstrapCoverage:
    def test_coverage_of_upper_quantile(self):
        # sqrt(n) W2(nu_n, nu) for nu = Uniform(0, 1), bootstrapped at m = n^0.7
        n, K, B = 2000, 400, 200
        m = math.ceil(n**0.7)
        root = RandomStream(77)
        covered = 0
        edges = np.arange(n + 1) / n
        for k in range(K):
            x = np.sort(root.at(k, 0).uniform(n))
            # exact integral of (x_(i) - t)^2 over ((i-1)/n, i/n]
            lo, hi = edges[:-1], edges[1:]
            w2sq = np.sum(((x - lo) ** 3 - (x - hi) ** 3) / 3.0)
            stat = math.sqrt(n * w2sq)
            d = EmpiricalDistribution(x)
            boot = np.sort([
                math.sqrt(m) * wasserstein_r(resample(d, m, root.at(k, b + 1)), d, 2) for b in range(B)
            ])
            covered += stat <= empirical_quantile_of(boot, 0.9)
        assert abs(covered / K - 0.9) <= 0.05
