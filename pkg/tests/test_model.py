import math

import pytest
from hypothesis import given, settings, strategies as st

from blightwave.errors import DomainError
from blightwave.model import (ModelParams, PointState, a_priori_bounds, check_theorem_constraints,
                              hill, min_wave_speed, reaction_rhs, table5_params,
                              wave_speed_floor)

positive = st.floats(min_value=1e-3, max_value=1e6, allow_nan=False)
exponent = st.floats(min_value=1.0, max_value=5.0)


class TestModelParams:
    def test_table5_values(self, params3):
        assert params3.N == 3.0 and params3.D1 == 50.0 and params3.alpha == 1e8

    def test_d2_may_be_zero(self):
        assert table5_params(D2=0.0).D2 == 0.0

    @pytest.mark.parametrize("name,value", [("D2", -1.0), ("K", 0.0), ("gamma", -0.1),
                                            ("n1", 0.5), ("N", float("nan")),
                                            ("r", float("inf"))])
    def test_rejects_out_of_domain(self, name, value):
        with pytest.raises(DomainError):
            table5_params(**{name: value})

    def test_rejects_non_numbers(self):
        with pytest.raises(DomainError):
            table5_params(r="0.5")

    def test_fields_are_floats_and_frozen(self, params3):
        assert isinstance(table5_params(n1=3).n1, float)
        with pytest.raises(AttributeError):
            params3.r = 1.0

    def test_names_cover_fifteen_parameters(self):
        assert len(ModelParams.names()) == 15


class TestHill:
    def test_zero(self):
        assert hill(0.0, 1.0, 1e6, 2) == 0.0

    def test_half_saturation(self):
        assert hill(1e6, 1.0, 1e6, 2) == 0.5

    def test_hand_value(self):
        # (3e6/1e6)^2 = 9, 9 / 10
        assert hill(3e6, 1.0, 1e6, 2) == pytest.approx(0.9, rel=1e-15)

    @pytest.mark.parametrize("args", [(-1.0, 1, 1, 2), (1.0, 0, 1, 2), (1.0, 1, -1, 2),
                                      (1.0, 1, 1, 0.5)])
    def test_domain_errors(self, args):
        with pytest.raises(DomainError):
            hill(*args)

    @settings(max_examples=200, deadline=None)
    @given(x1=st.floats(0, 1e9), x2=st.floats(0, 1e9), M=positive, A=positive, n=exponent)
    def test_monotone_and_below_max(self, x1, x2, M, A, n):
        lo, hi = sorted((x1, x2))
        assert hill(lo, M, A, n) <= hill(hi, M, A, n)
        assert 0.0 <= hill(hi, M, A, n) <= M
        if (hi / A) ** n < 1e15:  # beyond this M u / (1 + u) rounds to M in float64
            assert hill(hi, M, A, n) < M

    @given(M=positive, A=positive, n=exponent)
    def test_half_at_threshold(self, M, A, n):
        assert hill(A, M, A, n) == M / 2


class TestReactionRhs:
    def test_disease_free_point_is_stationary(self, params3):
        assert reaction_rhs(PointState(0, 0, 3, 0, 0), params3) == (0, 0, 0, 0, 0)

    def test_ooze_transfer_hand_values(self, params3):
        rates = reaction_rhs(PointState(0.0, 1e8, 3.0, 0.0, 0.0), params3)
        assert rates.B == pytest.approx(1.5e8, rel=1e-15)
        assert rates.O == pytest.approx(-1.5e8 - 0.0027 * 1e8, rel=1e-15)
        assert rates.S == rates.I == rates.R == 0.0

    def test_logistic_part(self, params3):
        # B = capacity K(S+I) + eps = 3e6 + 10 gives zero growth
        rates = reaction_rhs(PointState(3e6 + 10, 0.0, 3.0, 0.0, 0.0), params3)
        assert rates.B == pytest.approx(0.0, abs=1e-6)

    @settings(max_examples=200, deadline=None)
    @given(b=st.floats(0, 1e8), o=st.floats(0, 1e11), s=st.floats(0, 1), i=st.floats(0, 1),
           n1=exponent, n2=exponent)
    def test_conserves_flowers(self, b, o, s, i, n1, n2):
        n = 3.0
        s_ = s * n
        i_ = i * (n - s_)
        p = table5_params(n1=n1, n2=n2)
        rates = reaction_rhs(PointState(b, o, s_, i_, max(0.0, n - s_ - i_)), p)
        assert abs(rates.S + rates.I + rates.R) <= 1e-12 * max(1.0, abs(rates.S), abs(rates.R))

    @pytest.mark.parametrize("state", [PointState(-1, 0, 3, 0, 0), PointState(0, 0, 2, 0, 0),
                                       PointState(0, 0, 3, 0.5, 0)])
    def test_rejects_invalid_points(self, params3, state):
        with pytest.raises(DomainError):
            reaction_rhs(state, params3)


class TestBounds:
    def test_ooze_bound(self, params3):
        b = a_priori_bounds(params3, 1e6, 0.0)
        assert b.o_max == pytest.approx(1e8 * 3 / 0.0027, rel=1e-14)
        assert b.o_max == pytest.approx(1.1111e11, rel=1e-4)
        assert b.compartment_max == 3.0

    def test_initial_ooze_dominates(self, params3):
        assert a_priori_bounds(params3, 0.0, 1e12).o_max == 1e12

    def test_b_bound_hand_value(self, params3):
        # (K N + eps)/2 (1 + sqrt(1 + 4 mu o_max / (r (K N + eps)))), evaluated in mpmath
        assert a_priori_bounds(params3, 1e6, 0.0).b_max == pytest.approx(578853185.0028856, rel=1e-12)

    def test_initial_b_dominates(self, params3):
        assert a_priori_bounds(params3, 1e12, 0.0).b_max == 1e12

    @given(o1=st.floats(0, 1e13), o2=st.floats(0, 1e13))
    def test_monotone_in_initial_ooze(self, o1, o2):
        p = table5_params()
        lo, hi = sorted((o1, o2))
        a, b = a_priori_bounds(p, 1e6, lo), a_priori_bounds(p, 1e6, hi)
        assert a.o_max <= b.o_max and a.b_max <= b.b_max

    def test_rejects_negative_maxima(self, params3):
        with pytest.raises(DomainError):
            a_priori_bounds(params3, -1.0, 0.0)


class TestWaveSpeed:
    def test_hand_value(self, params3):
        assert min_wave_speed(params3) == pytest.approx(20.0, rel=1e-15)

    def test_degenerate_inputs(self):
        assert wave_speed_floor(0.0, 0.5, 0.5, 3) == 0.0
        assert wave_speed_floor(50.0, 0.0, 0.0, 3) == 0.0

    @given(d=positive, r=positive, mu=positive, n=positive, k=st.integers(0, 3))
    def test_monotone_in_each_argument(self, d, r, mu, n, k):
        args = [d, r, mu, n]
        bigger = list(args)
        bigger[k] *= 1.5
        assert wave_speed_floor(*bigger) > wave_speed_floor(*args)


class TestConstraints:
    def test_table5_fails(self, params3):
        report = check_theorem_constraints(params3)
        assert not report.exponent_link
        assert not report.all_satisfied
        assert report.c_min == pytest.approx(20.0)

    def test_constructed_passing_instance(self):
        # n1 = n2 + 1; g(3) = 9/10 >= M1 = 0.5; alpha small makes the ooze inequality hold:
        # lhs = 1e-3^3 * 0.5 * 3 * (1 + 9) = 1.5e-8 <= rhs = (1e6)^3 * 1 * 0.0027^3 ~ 1.97e10
        p = table5_params(n1=3.0, n2=2.0, M1=0.5, alpha=1e-3)
        report = check_theorem_constraints(p)
        assert report.d2_le_d1 and report.exponent_link and report.m1_le_gN
        assert report.ooze_inequality
        assert report.all_satisfied
        assert report.as_dict()["all_satisfied"] is True

    def test_d2_above_d1(self):
        assert not check_theorem_constraints(table5_params(D2=60.0)).d2_le_d1

    def test_real_exponent_tolerance(self):
        assert check_theorem_constraints(table5_params(n1=3.0 + 1e-13, n2=2.0)).exponent_link
        assert not check_theorem_constraints(table5_params(n1=3.0 + 1e-9, n2=2.0)).exponent_link

    def test_all_satisfied_is_conjunction(self):
        for kw in ({}, {"n1": 3.0}, {"n1": 3.0, "M1": 0.5}, {"n1": 3.0, "M1": 0.5, "alpha": 1e-3}):
            r = check_theorem_constraints(table5_params(**kw))
            assert r.all_satisfied == (r.d2_le_d1 and r.exponent_link and r.m1_le_gN
                                       and r.ooze_inequality)

    def test_ooze_inequality_boundary_is_inclusive(self):
        # choose alpha so both sides are equal: alpha^2 * M1 * N * (A2^2 + N^2) = A1^2 * M2 * gamma^2
        p = table5_params()
        alpha = math.sqrt(p.A1 ** 2 * p.M2 * p.gamma ** 2 / (p.M1 * p.N * (p.A2 ** 2 + p.N ** 2)))
        lhs = alpha ** 2 * p.M1 * p.N * (p.A2 ** 2 + p.N ** 2)
        rhs = p.A1 ** 2 * p.M2 * p.gamma ** 2
        assert check_theorem_constraints(table5_params(alpha=alpha)).ooze_inequality == (lhs <= rhs)
