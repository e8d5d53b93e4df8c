import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkes.model import (AffineActivation, ExponentialKernel,
                          PolynomialActivation, TabulatedActivation,
                          TabulatedKernel, affine_dominator,
                          averaged_growth_rate)

from oracles import EXP_NEG_1, ONE_MINUS_EXP_NEG_20, TWO_EXP_NEG_1, quad_ref


class TestKernelValue:
    def test_exponential_at_zero(self):
        assert ExponentialKernel(1.0).value(0.0) == 1.0

    def test_infinite_age_convention(self):
        assert ExponentialKernel(2.0).value(math.inf) == 0.0

    def test_exponential_at_one(self):
        assert ExponentialKernel(1.0).value(1.0) == pytest.approx(EXP_NEG_1, abs=1e-12)

    def test_negative_age_rejected(self):
        with pytest.raises(ValueError):
            ExponentialKernel(1.0).value(-0.5)

    def test_tabulated_interpolates(self):
        k = TabulatedKernel(np.array([0.0, 1.0, 2.0]), np.array([1.0, 0.5, 0.0]))
        assert k.value(0.5) == pytest.approx(0.75)
        assert k.value(3.0) == 0.0


class TestIntegral:
    def test_exponential_scale(self):
        assert ExponentialKernel(0.5).integral() == 0.5

    def test_rectangle(self):
        k = TabulatedKernel(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
        assert k.integral() == pytest.approx(1.0)

    def test_sampled_exponential_close_to_analytic(self):
        t = np.arange(0.0, 20.0 + 1e-3, 1e-3)
        k = TabulatedKernel(t, np.exp(-t))
        assert k.integral() == pytest.approx(ONE_MINUS_EXP_NEG_20, abs=1e-4)


class TestTailIntegral:
    def test_at_zero_equals_integral(self):
        assert ExponentialKernel(1.0).tail_integral(0.0) == pytest.approx(1.0)

    def test_vanishes_far_out(self):
        assert ExponentialKernel(1.0).tail_integral(200.0) < 1e-80

    def test_exponential_closed_form(self):
        assert ExponentialKernel(2.0).tail_integral(2.0) == pytest.approx(
            TWO_EXP_NEG_1, abs=1e-12)

    def test_tabulated_matches_reference_quadrature(self):
        t = np.linspace(0.0, 5.0, 501)
        k = TabulatedKernel(t, 1.0 / (1.0 + t))
        for x in [0.0, 0.7, 2.3, 4.9]:
            ref = quad_ref(lambda s: np.interp(s, t, 1.0 / (1.0 + t)), x, 5.0)
            assert k.tail_integral(x) == pytest.approx(ref, abs=1e-6)

    @given(st.floats(0.0, 50.0), st.floats(0.0, 50.0))
    @settings(max_examples=60, deadline=None)
    def test_monotone_and_bounded(self, x1, x2):
        k = ExponentialKernel(1.7)
        lo, hi = min(x1, x2), max(x1, x2)
        assert k.tail_integral(lo) >= k.tail_integral(hi)
        assert k.tail_integral(lo) <= k.integral() + 1e-12

    @given(st.floats(0.0, 30.0), st.floats(0.0, 30.0))
    @settings(max_examples=60, deadline=None)
    def test_kernel_non_increasing(self, t1, t2):
        for k in (ExponentialKernel(0.8),
                  TabulatedKernel(np.array([0.0, 1.0, 4.0]), np.array([2.0, 1.0, 0.0]))):
            lo, hi = min(t1, t2), max(t1, t2)
            assert k.value(lo) >= k.value(hi)


class TestActivation:
    def test_affine_eval(self):
        assert AffineActivation(1.0, 0.5).value(2.0) == 2.0

    def test_polynomial_eval(self):
        assert PolynomialActivation(1.0, 1.0, 2.0).value(1.0) == 4.0

    def test_value_at_origin_is_base(self):
        assert AffineActivation(3.7, 0.9).value(0.0) == 3.7

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            AffineActivation(1.0, 1.0).value(-1.0)

    def test_tabulated_interp_and_extrapolation(self):
        a = TabulatedActivation(np.array([0.0, 1.0]), np.array([1.0, 2.0]), slope=0.5)
        assert a.value(0.5) == pytest.approx(1.5)
        assert a.value(3.0) == pytest.approx(2.0 + 0.5 * 2.0)

    def test_growth_rates(self):
        assert AffineActivation(1.0, 0.3).growth_rate() == 0.3
        assert PolynomialActivation(1.0, 1.0, 0.5).growth_rate() == 0.0
        assert PolynomialActivation(2.0, 3.0, 2.0).growth_rate() == math.inf
        assert TabulatedActivation(np.array([0.0, 1.0]),
                                   np.array([1.0, 1.0]), slope=0.2).growth_rate() == 0.2


class TestAveragedGrowthRate:
    def test_affine_exact(self):
        assert averaged_growth_rate(AffineActivation(1.0, 0.4)) == 0.4
        # cross-check the analytic limit against the window integral at u=1e6
        ref = quad_ref(lambda s: (1.0 + 0.4 * s) / s, 1e6 - 1.0, 1e6)
        assert ref == pytest.approx(0.4, abs=1e-5)

    def test_constant_activation(self):
        assert averaged_growth_rate(AffineActivation(5.0, 0.0)) == 0.0

    def test_sublinear_polynomial_vanishes(self):
        act = PolynomialActivation(1e-9, 1.0, 0.5)
        assert averaged_growth_rate(act, u_max=4e12) <= 1e-3

    def test_superlinear_blows_past_any_level(self):
        act = PolynomialActivation(1.0, 1.0, 2.0)
        assert averaged_growth_rate(act, u_max=1e4) > 100.0


class TestAffineDominator:
    def test_affine_dominates_itself(self):
        nu0, beta0 = affine_dominator(AffineActivation(1.0, 0.3), 0.1, 1.0)
        assert nu0 == pytest.approx(1.0)
        assert beta0 == pytest.approx(0.33)

    def test_superlinear_has_none(self):
        assert affine_dominator(PolynomialActivation(1.0, 1.0, 2.0), 0.1, 1.0) is None

    def test_unstable_slope_gives_none(self):
        assert affine_dominator(AffineActivation(1.0, 0.95), 0.1, 1.0) is None

    def test_sublinear_grid_domination(self):
        act = PolynomialActivation(1.0, 1.0, 0.5)
        nu0, beta0 = affine_dominator(act, 0.1, 1.0)
        rng = np.random.default_rng(0)
        xs = rng.uniform(0.0, 1e6, 10_000)
        for x in xs:
            assert act.value(x) <= nu0 + beta0 * x + 1e-9

    @given(st.floats(0.01, 0.6), st.floats(0.05, 1.0))
    @settings(max_examples=40, deadline=None)
    def test_domination_property_affine(self, beta, margin):
        act = AffineActivation(1.0, beta)
        out = affine_dominator(act, margin, 1.0)
        if out is None:
            assert beta * (1.0 + margin) >= 1.0
            return
        nu0, beta0 = out
        xs = np.geomspace(1e-9, 1e7, 50)
        assert all(act.value(x) <= nu0 + beta0 * x + 1e-9 for x in xs)


class TestValidation:
    def test_bad_scale(self):
        with pytest.raises(ValueError):
            ExponentialKernel(0.0)

    def test_increasing_tabulated_kernel_rejected(self):
        with pytest.raises(ValueError):
            TabulatedKernel(np.array([0.0, 1.0]), np.array([0.5, 1.0]))

    def test_activation_needs_positive_base(self):
        with pytest.raises(ValueError):
            AffineActivation(0.0, 1.0)
        with pytest.raises(ValueError):
            TabulatedActivation(np.array([0.0, 1.0]), np.array([0.0, 1.0]), 0.1)
