"""Exact limiting cluster statistics and the finite-level oracle."""

from fractions import Fraction

import pytest
from mpmath import mp

from evtlab import (AnalyticError, ScaleExpr, analytic_multiplicity,
                    analytic_theta, limit_ratio, lsv, make_correlated_spec,
                    neglog, oracle_cluster_sets, powerlaw, return_time_table,
                    select_q)

F = Fraction


class TestScaleExpr:
    def test_poly_beats_exp(self):
        e = ScaleExpr.term("exp", 1, 3) + ScaleExpr.term("poly", 2, 5)
        assert e.dominant() == ("poly", F(2))

    def test_smaller_exponent_dominates(self):
        e = ScaleExpr.term("poly", 2, 1) + ScaleExpr.term("poly", 3, 100)
        assert e.dominant() == ("poly", F(2))

    def test_limit_ratio_exact(self):
        num = ScaleExpr.term("poly", 2, F(3, 4)) + ScaleExpr.term("exp", 1, 9)
        den = ScaleExpr.term("poly", 2, F(2)) + ScaleExpr.term("poly", 5, 1)
        assert limit_ratio(num, den) == F(3, 8)

    def test_faster_numerator_vanishes(self):
        num = ScaleExpr.term("exp", 1, 7)
        den = ScaleExpr.term("poly", 2, 5)
        assert limit_ratio(num, den) == 0

    def test_diverging_ratio_raises(self):
        with pytest.raises(AnalyticError):
            limit_ratio(ScaleExpr.term("poly", 1, 1),
                        ScaleExpr.term("poly", 2, 1))

    def test_cancellation(self):
        a = ScaleExpr.term("exp", 1, 2)
        assert (a - a).is_zero()


class TestNonPeriodic:
    def test_theta(self, three_point_spec, doubling):
        res = analytic_theta(three_point_spec, doubling)
        assert res.theta == F(7, 8)
        assert res.q == 3

    def test_multiplicity(self, three_point_spec, doubling):
        mult = analytic_multiplicity(three_point_spec, doubling, k_max=6)
        assert [mult.pi(k) for k in range(1, 7)] == \
            [F(6, 7), F(1, 7), 0, 0, 0, 0]
        assert mult.total_mass() == 1
        assert mult.mean_cluster_size() == F(8, 7)

    def test_mass_mean_consistency(self, three_point_spec, doubling):
        res = analytic_theta(three_point_spec, doubling)
        mult = analytic_multiplicity(three_point_spec, doubling)
        assert mult.mean_cluster_size() == 1 / res.theta


class TestPeriodic:
    def test_theta(self, periodic_spec, doubling):
        res = analytic_theta(periodic_spec, doubling)
        assert res.theta == F(13, 16)
        assert res.q == 5

    def test_multiplicity_formulas(self, periodic_spec, doubling):
        mult = analytic_multiplicity(periodic_spec, doubling, k_max=12)
        for ell in range(6):
            assert mult.pi(2 * ell + 1) == F(21, 26) * F(1, 32) ** ell
        for ell in range(1, 6):
            assert mult.pi(2 * ell) == F(67, 13) * F(1, 32) ** ell
        assert mult.tail_start == 1
        assert mult.tail_period == 2
        assert mult.tail_ratio == F(1, 32)

    def test_mass_and_mean(self, periodic_spec, doubling):
        mult = analytic_multiplicity(periodic_spec, doubling)
        assert mult.total_mass() == 1
        assert mult.mean_cluster_size() == F(16, 13)


class TestSinglePoint:
    def test_periodic_geometric(self, single_periodic_spec, doubling):
        res = analytic_theta(single_periodic_spec, doubling)
        assert res.theta == F(31, 32)
        mult = analytic_multiplicity(single_periodic_spec, doubling, k_max=5)
        for k in range(1, 6):
            assert mult.pi(k) == F(31, 32) * F(1, 32) ** (k - 1)
        assert mult.mean_cluster_size() == F(32, 31)

    def test_nonperiodic_is_one(self, doubling):
        spec = make_correlated_spec(doubling, F(1, 7) + F(1, 2**30),
                                    [(0, neglog())])
        res = analytic_theta(spec, doubling)
        assert res.theta == 1
        assert res.q == 0


class TestUncorrelated:
    def test_two_typical(self, doubling):
        from evtlab import make_uncorrelated_spec
        with mp.workprec(80):
            spec = make_uncorrelated_spec(
                doubling, [(mp.sqrt(2) / 16, neglog(), 0),
                           (mp.sqrt(3) / 8, neglog(), 0)])
        res = analytic_theta(spec, doubling)
        assert res.theta == 1

    def test_fixed_point_plus_typical(self, mixed_uncorrelated_spec, doubling):
        res = analytic_theta(mixed_uncorrelated_spec, doubling)
        assert res.theta == F(3, 4)
        assert res.q == 1
        assert res.point_indices == (F(1, 2), F(1))


class TestSelectQ:
    def test_values(self, three_point_spec, periodic_spec,
                    mixed_uncorrelated_spec, doubling):
        assert select_q(three_point_spec, doubling)[0] == 3
        assert select_q(periodic_spec, doubling)[0] == 5
        assert select_q(mixed_uncorrelated_spec, doubling)[0] == 1

    def test_single_nonperiodic_zero(self, doubling):
        spec = make_correlated_spec(doubling, F(1, 7) + F(1, 2**30),
                                    [(0, neglog())])
        assert select_q(spec, doubling)[0] == 0


class TestOracle:
    def test_converges_to_limit(self, three_point_spec, doubling):
        prev_gap = None
        for u in (15, 20, 25):
            r = oracle_cluster_sets(three_point_spec, doubling, u, 3)
            gap = abs(float(r.theta_n) - 7 / 8)
            if prev_gap is not None:
                assert gap < prev_gap
            prev_gap = gap
        assert prev_gap < 1e-3

    def test_periodic_pi_matches(self, periodic_spec, doubling):
        r = oracle_cluster_sets(periodic_spec, doubling, 200, 5, k_max=4)
        mult = analytic_multiplicity(periodic_spec, doubling, k_max=4)
        assert abs(float(r.theta_n) - 13 / 16) < 1e-4
        for k in range(1, 5):
            assert abs(float(r.pi_n[k - 1]) - float(mult.pi(k))) < 1e-3

    def test_return_times_grow(self, three_point_spec, doubling):
        table = return_time_table(three_point_spec, doubling,
                                  [10, 100, 1000], q=3)
        rs = [r for _, r in table]
        assert rs == sorted(rs)
        assert rs[0] < rs[-1]


def test_lsv_multi_point_not_exact():
    """Pullback slopes on the intermittent map are irrational: no exact limit."""
    f = lsv(0.4)
    spec = make_correlated_spec(f, F(5, 8), [(0, neglog()), (1, neglog())],
                                eps_bar=F(1, 64))
    with pytest.raises(AnalyticError):
        analytic_theta(spec, f)
