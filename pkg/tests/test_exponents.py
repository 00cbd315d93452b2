from fractions import Fraction as Fr

import pytest
from hypothesis import given, strategies as st

from displab import exponents as ex
from displab.exponents import ExponentPoint, ExponentTuple, ProblemParams


def tup(q, p, qd, pd):
    return ExponentTuple.from_exponents(q, p, qd, pd)


P243 = ProblemParams(2, "4/3")
P232 = ProblemParams(2, "3/2")


class TestScalingPair:
    def test_diagonal_point(self):
        assert ex.check_scaling_pair(P243, tup(*[Fr(10, 3)] * 4))

    def test_l2_tuple_fails(self):
        assert not ex.check_scaling_pair(P243, tup(2, 2, 2, 2))
        assert ex.scaling_residual(P243, tup(2, 2, 2, 2)) == Fr(4, 3)

    def test_three_dimensions(self):
        assert ex.check_scaling_pair(ProblemParams(3, "3/2"), tup(3, 3, 3, 3))

    @given(st.fractions(Fr(0), Fr(1, 2)), st.fractions(Fr(0), Fr(1, 2)))
    def test_midpoint_lies_on_scaling_line(self, iq, iqd):
        # with q = p and q~ = p~, accepted tuples have their midpoint on the line
        n, a = 2, Fr(4, 3)
        s = Fr(n) / (n + a)  # 1/q + 1/q~ forced by the scaling relation
        if iq > s:
            return
        iqd = s - iq
        t = ExponentTuple(ExponentPoint(iq, iq), ExponentPoint(iqd, iqd))
        assert ex.check_scaling_pair(P243, t)
        mid_q, mid_p = (iq + iqd) / 2, (iq + iqd) / 2
        assert a * mid_q + n * mid_p == Fr(n, 2)

    @given(st.fractions(Fr(0), Fr(1)), st.fractions(Fr(0), Fr(1)),
           st.fractions(Fr(0), Fr(1)), st.fractions(Fr(0), Fr(1)))
    def test_swap_symmetry(self, a, b, c, d):
        t = ExponentTuple(ExponentPoint(a, b), ExponentPoint(c, d))
        assert ex.check_scaling_pair(P232, t) == ex.check_scaling_pair(P232, t.swapped())
        both = ex.check_necessary_pair(P232, t.pair) and ex.check_necessary_pair(P232, t.dual_pair)
        sw = t.swapped()
        assert both == (ex.check_necessary_pair(P232, sw.pair) and ex.check_necessary_pair(P232, sw.dual_pair))

    def test_nonfinite_rejected(self):
        with pytest.raises(ex.ExponentError):
            ExponentPoint(float("nan"), 0)
        with pytest.raises(ex.ExponentError):
            ExponentPoint(Fr(3, 2), 0)


class TestNecessaryPair:
    def test_boundary_is_excluded(self):
        assert not ex.check_necessary_pair(P232, ExponentPoint(Fr(1, 3), Fr(1, 3)))

    def test_origin(self):
        assert ex.check_necessary_pair(P232, ExponentPoint(0, 0))

    def test_far_corner(self):
        assert not ex.check_necessary_pair(P232, ExponentPoint(Fr(1, 2), Fr(1, 2)))


class TestHomogeneous:
    def test_endpoint_excluded(self):
        # at alpha = 4/3 the pair (2, 6) lies on the scaling line, so only the
        # endpoint exclusion rejects it
        assert P243.alpha / 2 + Fr(2, 6) == 1
        assert not ex.check_homogeneous_admissible(P243, 2, 6)
        assert ex.homogeneous_endpoint(2) == (2, 6)

    @pytest.mark.parametrize("alpha", ["4/3", "3/2", "7/4"])
    def test_energy_pair(self, alpha):
        assert ex.check_homogeneous_admissible(ProblemParams(2, alpha), "inf", 2)

    def test_three_dimensions(self):
        assert ex.check_homogeneous_admissible(ProblemParams(3, "3/2"), 4, Fr(8, 3))

    def test_q_below_two(self):
        # scaling holds but q < 2
        q = Fr(3, 2)
        ip = (1 - Fr(3, 2) / q) / 2
        assert not ex.check_homogeneous_admissible(P232, q, 1 / ip if ip else "inf")

    @given(st.fractions(Fr(0), Fr(1, 2), max_denominator=50))
    def test_gamma_zero_implies_necessary(self, iq):
        ip = (1 - P232.alpha * iq) / 2
        if iq == 0 or ip == 0:
            return
        if ex.check_homogeneous_admissible(P232, 1 / iq, 1 / ip):
            assert ex.check_necessary_pair(P232, ExponentPoint(iq, ip))


class TestSharpDiagonal:
    def test_diagonal_point(self):
        assert ex.check_sharp_diagonal(P243, Fr(10, 3), Fr(10, 3))

    def test_first_condition(self):
        assert not ex.check_sharp_diagonal(P243, 2, 10)

    @given(st.fractions(Fr(1, 100), Fr(1, 3)), st.fractions(Fr(1, 100), Fr(1, 3)))
    def test_off_line_rejected(self, a, b):
        if a + b != Fr(3, 5):
            assert not ex.check_sharp_diagonal(P243, 1 / a, 1 / b)


class TestCorollary:
    def test_inside(self):
        assert ex.check_corollary_region(P232, 5, Fr(5, 2))

    def test_above_upper_bound(self):
        lower, upper, _ = ex.corollary_bounds(P232, Fr(2, 5))
        assert upper == Fr(7, 25)
        assert lower == Fr(1, 11)
        assert not ex.check_corollary_region(P232, 1 / Fr(32, 100), Fr(5, 2))

    def test_p_line_value(self):
        slope, icpt = ex.corollary_c4_line(P232)
        assert abs(float(slope * Fr(1, 5) + icpt) - 0.2545) < 1e-4

    def test_energy_corner(self):
        assert not ex.check_corollary_region(P232, "inf", 2)

    @given(st.fractions(Fr(0), Fr(1), max_denominator=40))
    def test_accepted_q_form_an_interval(self, ip):
        grid = [Fr(i, 60) for i in range(1, 61)]
        ok = [ex.check_corollary_region(P232, 1 / iq, 1 / ip if ip else "inf") for iq in grid]
        idx = [i for i, v in enumerate(ok) if v]
        if idx:
            assert idx == list(range(idx[0], idx[-1] + 1))


class TestWellposedness:
    def test_gamma_floor_open(self):
        P = ProblemParams(2, "3/2", Fr(-1, 6))
        assert P.gamma_floor == Fr(-1, 6)
        with pytest.raises(ex.ExponentError):
            ex.check_wellposedness_exponents(P, 3, 4, 2, Fr(8, 3))

    def test_infinite_q_rejected(self):
        v = ex.check_wellposedness_exponents(P232, "inf", 2, 1, "inf")
        assert not v
        assert "q_lower" in v.failures

    def test_potential_scaling(self):
        v = ex.check_wellposedness_exponents(P232, 3, 4, 2, 2)
        assert "potential_scaling" in v.failures

    def test_passing_tuples(self):
        assert ex.check_wellposedness_exponents(P232, 3, 4, 2, Fr(8, 3))
        Pg = P232.with_gamma(Fr(-1, 20))
        assert ex.check_wellposedness_exponents(Pg, Fr(10, 3), Fr(10, 3), 2, Fr(8, 3))

    def test_alpha_range(self):
        with pytest.raises(ex.ExponentError):
            ex.check_wellposedness_exponents(ProblemParams(2, 2), 3, 4, 2, Fr(8, 3))


class TestParams:
    def test_rejects_dimension_one(self):
        with pytest.raises(ex.ExponentError):
            ProblemParams(1, "3/2")

    def test_rejects_alpha(self):
        with pytest.raises(ex.ExponentError):
            ProblemParams(2, 1)

    def test_float_alpha_uses_slack(self):
        P = ProblemParams(2, 2 ** 0.5)
        iq = 0.2
        ip = (1 - P.alpha * iq) / 2
        assert ex.check_homogeneous_admissible(P, 1 / iq, 1 / ip)

    def test_boundary_samples(self):
        rows = ex.region_boundary_samples(P232, 11)
        assert len(rows) == 11 and rows[0]["inv_p"] == 0.0
