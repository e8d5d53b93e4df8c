import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkes.rng import philox_generator
from hawkes.stats import (TestResult, ks_one_sample, ks_two_sample,
                          lag_autocorrelation, mean_ci, poisson_dispersion)

from oracles import empirical_cdf_distance

EXP_CDF = lambda x: -np.expm1(-x)


class TestKSOneSample:
    def test_statistic_matches_reference(self):
        gen = philox_generator(1)
        x = gen.exponential(size=500)
        r = ks_one_sample(x, EXP_CDF)
        assert r.statistic == pytest.approx(empirical_cdf_distance(x, EXP_CDF),
                                            abs=1e-12)

    def test_self_consistency_calibration(self):
        # samples drawn from the hypothesised law rarely reject hard
        low = 0
        for seed in range(100):
            gen = philox_generator(seed)
            x = gen.exponential(size=10_000)
            if ks_one_sample(x, EXP_CDF).p_value <= 0.001:
                low += 1
        assert low <= 1

    def test_near_perfect_quantile_fit(self):
        n = 1000
        x = -np.log1p(-(np.arange(1, n + 1) - 0.5) / n)
        r = ks_one_sample(x, EXP_CDF)
        assert r.statistic <= 0.5 / n + 1e-12

    def test_degenerate_misfit(self):
        r = ks_one_sample(np.full(100, 1.0), EXP_CDF)
        assert r.statistic >= 0.5
        assert r.p_value < 1e-12

    def test_rejects_nan_and_small_samples(self):
        with pytest.raises(ValueError):
            ks_one_sample(np.array([1.0, np.nan] + [1.0] * 10), EXP_CDF)
        with pytest.raises(ValueError):
            ks_one_sample(np.ones(5), EXP_CDF)

    def test_invariant_under_monotone_transform(self):
        gen = philox_generator(7)
        x = gen.exponential(size=800)
        base = ks_one_sample(x, EXP_CDF)
        # probability integral transform: map through the CDF itself
        u = EXP_CDF(x)
        unif = ks_one_sample(u, lambda v: np.clip(v, 0.0, 1.0))
        assert unif.statistic == pytest.approx(base.statistic, abs=1e-12)


class TestKSTwoSample:
    def test_identical_samples(self):
        x = np.linspace(0.1, 5.0, 100)
        r = ks_two_sample(x, x)
        assert r.statistic == pytest.approx(0.0, abs=1e-12)
        assert r.p_value == pytest.approx(1.0)

    def test_separated_rates_detected(self):
        gen = philox_generator(5)
        a = gen.exponential(size=10_000)
        b = gen.exponential(scale=0.5, size=10_000)
        assert ks_two_sample(a, b).p_value < 1e-6

    def test_null_calibration_same_stream_split(self):
        gen = philox_generator(9)
        x = gen.exponential(size=20_000)
        assert ks_two_sample(x[::2], x[1::2]).p_value > 0.01

    @given(st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_ranges(self, seed):
        gen = philox_generator(seed)
        a = gen.normal(size=50)
        b = gen.normal(size=80)
        r = ks_two_sample(a, b)
        assert 0.0 <= r.statistic <= 1.0
        assert 0.0 <= r.p_value <= 1.0


class TestPoissonDispersion:
    def test_poisson_null(self):
        gen = philox_generator(11)
        counts = gen.poisson(5.0, size=1000)
        r = poisson_dispersion(counts)
        assert 0.8 <= r.statistic <= 1.2

    def test_deterministic_counts(self):
        r = poisson_dispersion(np.full(100, 5))
        assert r.statistic == 0.0
        assert r.p_value < 1e-12

    def test_overdispersed_counts(self):
        gen = philox_generator(13)
        counts = gen.geometric(0.2, size=1000)
        r = poisson_dispersion(counts)
        assert r.statistic > 1.5
        assert r.p_value < 0.01

    def test_preconditions(self):
        with pytest.raises(ValueError):
            poisson_dispersion(np.ones(10))
        with pytest.raises(ValueError):
            poisson_dispersion(np.zeros(50))


class TestMeanCI:
    def test_constant_sample(self):
        mean, half = mean_ci(np.full(50, 3.0))
        assert mean == 3.0
        assert half == 0.0

    def test_exponential_mean(self):
        gen = philox_generator(17)
        x = gen.exponential(size=10_000)
        mean, half = mean_ci(x, level=0.997)
        assert abs(mean - 1.0) <= max(half, 0.031)

    def test_disjoint_halves_overlap(self):
        hits = 0
        for seed in range(40):
            gen = philox_generator(seed + 100)
            x = gen.exponential(size=4000)
            m1, h1 = mean_ci(x[:2000], level=0.95)
            m2, h2 = mean_ci(x[2000:], level=0.95)
            if abs(m1 - m2) <= h1 + h2:
                hits += 1
        assert hits >= 36


class TestLagAutocorrelation:
    def test_iid_is_small(self):
        gen = philox_generator(19)
        x = gen.exponential(size=10_000)
        assert abs(lag_autocorrelation(x, 1)) < 3.0 / math.sqrt(len(x))

    def test_alternating_is_negative(self):
        x = np.tile([0.0, 1.0], 500)
        assert lag_autocorrelation(x, 1) < -0.9


class TestResultType:
    def test_p_value_range_enforced(self):
        with pytest.raises(ValueError):
            TestResult(statistic=0.1, p_value=1.5, n=(10,))
