import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hawkes.history import (EMPTY_STATE, DivergenceError, InterArrivalState,
                            PointMeasure, excitation_sum, from_point_measure,
                            prepend_gap, sequence_distance, to_point_measure)
from hawkes.model import ExponentialKernel, TabulatedKernel

from oracles import EXP_NEG_1

K1 = ExponentialKernel(1.0)

gaps_strategy = st.lists(st.floats(1e-3, 50.0), min_size=0, max_size=12).map(tuple)


def state(*gaps):
    return InterArrivalState(tuple(gaps))


class TestExcitationSum:
    def test_empty_state_is_origin_only(self):
        assert excitation_sum(EMPTY_STATE, 0.0, K1) == (1.0, 0.0)

    def test_single_gap_two_terms(self):
        val, bound = excitation_sum(state(1.0), 0.0, K1)
        assert val == pytest.approx(1.0 + EXP_NEG_1, abs=1e-12)
        assert bound == 0.0

    def test_infinite_time_vanishes(self):
        assert excitation_sum(state(1.0, 2.0), math.inf, K1) == (0.0, 0.0)

    def test_truncated_state_is_uncertified(self):
        _, bound = excitation_sum(InterArrivalState((1.0,), tail_infinite=False), 0.0, K1)
        assert bound == math.inf

    def test_divergence_cap(self):
        s = InterArrivalState(tuple([1e-6] * 50))
        with pytest.raises(DivergenceError):
            excitation_sum(s, 0.0, K1, divergence_cap=10.0)

    @given(gaps_strategy, st.floats(0.0, 20.0), st.floats(0.0, 20.0))
    @settings(max_examples=80, deadline=None)
    def test_non_increasing_in_time(self, gaps, t1, t2):
        s = InterArrivalState(gaps)
        lo, hi = min(t1, t2), max(t1, t2)
        v_lo, _ = excitation_sum(s, lo, K1)
        v_hi, _ = excitation_sum(s, hi, K1)
        assert v_lo >= v_hi - 1e-12

    @given(gaps_strategy, st.floats(1e-3, 10.0), st.floats(0.0, 10.0))
    @settings(max_examples=80, deadline=None)
    def test_telescoping_identity(self, gaps, g, t):
        s = InterArrivalState(gaps)
        lhs, _ = excitation_sum(prepend_gap(s, g), t, K1)
        inner, _ = excitation_sum(s, t + g, K1)
        assert lhs == pytest.approx(K1.value(t) + inner, abs=1e-12)

    def test_telescoping_for_cutoff_kernel(self):
        k = TabulatedKernel(np.array([0.0, 1.0, 3.0]), np.array([1.0, 0.6, 0.0]))
        s = state(0.4, 1.1)
        lhs, _ = excitation_sum(prepend_gap(s, 0.7), 0.3, k)
        inner, _ = excitation_sum(s, 1.0, k)
        assert lhs == pytest.approx(k.value(0.3) + inner, abs=1e-12)


class TestSequenceDistance:
    def test_identity(self):
        s = state(1.0, 2.0)
        assert sequence_distance(s, s, 30) == 0.0

    def test_single_differing_coordinate(self):
        assert sequence_distance(state(1.0), state(2.0), 30) == pytest.approx(0.5)

    def test_finite_vs_infinite_coordinate(self):
        assert sequence_distance(state(1.0), state(1.0, 3.0), 30) == pytest.approx(0.25)

    @given(gaps_strategy, gaps_strategy)
    @settings(max_examples=60, deadline=None)
    def test_symmetry(self, a, b):
        x, y = InterArrivalState(a), InterArrivalState(b)
        assert sequence_distance(x, y, 40) == pytest.approx(
            sequence_distance(y, x, 40), abs=1e-15)

    @given(gaps_strategy, gaps_strategy, gaps_strategy)
    @settings(max_examples=60, deadline=None)
    def test_triangle_inequality(self, a, b, c):
        x, y, z = InterArrivalState(a), InterArrivalState(b), InterArrivalState(c)
        k = 40
        slack = 2.0 ** -k + 1e-12
        assert sequence_distance(x, z, k) <= (sequence_distance(x, y, k)
                                              + sequence_distance(y, z, k) + slack)


class TestPointMeasure:
    def test_empty_state_is_origin(self):
        assert to_point_measure(EMPTY_STATE).points == (0.0,)

    def test_cumulative_sums(self):
        assert to_point_measure(state(1.0, 2.0)).points == (0.0, -1.0, -3.0)

    def test_uniform_gaps(self):
        assert to_point_measure(state(0.5, 0.5, 0.5)).points == (0.0, -0.5, -1.0, -1.5)

    def test_measure_requires_origin(self):
        with pytest.raises(ValueError):
            PointMeasure((-1.0,))

    @given(gaps_strategy)
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, gaps):
        s = InterArrivalState(gaps)
        back = from_point_measure(to_point_measure(s))
        assert np.allclose(back.gaps, s.gaps, rtol=0, atol=1e-9)
        if len(gaps) <= 6:  # short sums stay exact in floating point
            assert all(a == pytest.approx(b, abs=1e-12)
                       for a, b in zip(back.gaps, s.gaps))


class TestPrepend:
    def test_from_empty(self):
        assert prepend_gap(EMPTY_STATE, 1.0).gaps == (1.0,)

    def test_order(self):
        assert prepend_gap(state(2.0), 1.0).gaps == (1.0, 2.0)
        assert prepend_gap(state(1.0, 1.0), 0.25).gaps == (0.25, 1.0, 1.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            prepend_gap(EMPTY_STATE, 0.0)
        with pytest.raises(ValueError):
            prepend_gap(EMPTY_STATE, math.inf)
