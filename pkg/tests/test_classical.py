"""Tests for the baseline bounds and default combinations."""

import math

import numpy as np
import pytest
from conftest import bernoulli_sigma, exceedance_ok, scaled_mean_draws

from effconc.classical import (
    BoundResult,
    _be_constant,
    _nube_constant,
    bernstein_quantile,
    bernstein_tail,
    berry_esseen_tail,
    default_onetail,
    default_onetail_result,
    default_twotail,
    default_twotail_result,
    hoeffding_quantile,
    hoeffding_tail,
    nonuniform_be_tail,
)
from effconc.model import Problem, derived
from effconc.numerics import std_normal_cdf_c

REL = 1e-12
P100 = Problem(n=100, r=1.0, sigma=0.25)


class TestHoeffdingTail:
    def test_at_zero(self):
        assert hoeffding_tail(P100, 0.0) == 1.0

    def test_exact_arithmetic(self):
        prob = Problem(n=100, r=1.0, sigma=0.5)
        assert hoeffding_tail(prob, 2.0) == pytest.approx(math.exp(-2.0), rel=REL)

    def test_independent_of_n(self):
        a = hoeffding_tail(Problem(n=10, r=1.0, sigma=0.25), 1.3)
        b = hoeffding_tail(Problem(n=10 ** 6, r=1.0, sigma=0.25), 1.3)
        assert a == b


class TestBernsteinTail:
    def test_at_zero(self):
        assert bernstein_tail(P100, 0.0) == 1.0

    def test_exact_arithmetic(self):
        assert bernstein_tail(P100, 1.0) == pytest.approx(
            math.exp(-1.0 / (2.0 * (1.0 + 0.4 / 3.0))), rel=REL
        )

    def test_gaussian_limit(self):
        big = Problem(n=10 ** 12, r=1.0, sigma=0.25)
        assert bernstein_tail(big, 1.7) == pytest.approx(math.exp(-1.7 ** 2 / 2.0), rel=1e-5)


class TestBernsteinQuantile:
    def test_frozen_value(self):
        assert bernstein_quantile(P100, 0.05) == pytest.approx(
            0.79377647075156104265, rel=1e-12
        )

    def test_delta_to_one_limit(self):
        d = derived(P100)
        expected = d.r_sigma * math.log(2.0) / 30.0 + 0.25 * math.sqrt(2.0 * math.log(2.0))
        assert bernstein_quantile(P100, 1.0 - 1e-12) == pytest.approx(expected, rel=1e-6)

    def test_large_n_limit(self):
        big = Problem(n=10 ** 12, r=1.0, sigma=0.25)
        assert bernstein_quantile(big, 0.05) == pytest.approx(
            0.25 * math.sqrt(2.0 * math.log(40.0)), rel=1e-5
        )

    def test_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            bernstein_quantile(P100, 0.0)


class TestBerryEsseen:
    def test_constant_at_unit_ratio(self):
        assert _be_constant(1.0) == pytest.approx(0.4747891, abs=1e-7)

    def test_shift_is_constant_in_u(self):
        # Wherever the uncapped form wins, bound - Phi^c(u) is u-independent.
        big = Problem(n=10 ** 4, r=1.0, sigma=0.25)
        shifts = [berry_esseen_tail(big, u) - std_normal_cdf_c(u) for u in (1.0, 2.0, 3.0, 4.0)]
        for s in shifts[1:]:
            assert s == pytest.approx(shifts[0], rel=1e-9)

    def test_clipped_at_hoeffding(self):
        # At huge u the Gaussian term vanishes but the constant term stays:
        # the Hoeffding clip must take over.
        prob = Problem(n=4, r=1.0, sigma=0.25)
        u = 40.0
        assert berry_esseen_tail(prob, u) == pytest.approx(hoeffding_tail(prob, u), rel=REL)

    def test_gaussian_limit(self):
        big = Problem(n=10 ** 14, r=1.0, sigma=0.25)
        assert berry_esseen_tail(big, 1.0) == pytest.approx(std_normal_cdf_c(1.0), rel=1e-4)


class TestNonuniformBerryEsseen:
    def test_constant_at_unit_ratio(self):
        assert _nube_constant(1.0) == pytest.approx(16.346, abs=1e-10)

    def test_at_zero(self):
        big = Problem(n=10 ** 6, r=1.0, sigma=0.25)
        d = derived(big)
        expected = 0.5 + _nube_constant(d.ratio_sigma) / 1000.0
        assert nonuniform_be_tail(big, 0.0) == pytest.approx(expected, rel=1e-10)

    def test_cubic_decay_of_correction(self):
        big = Problem(n=10 ** 8, r=1.0, sigma=0.25)
        c0 = nonuniform_be_tail(big, 0.0) - std_normal_cdf_c(0.0)
        c3 = nonuniform_be_tail(big, 3.0) - std_normal_cdf_c(3.0)
        assert c3 == pytest.approx(c0 / 64.0, rel=1e-6)

    def test_clipped_at_hoeffding(self):
        prob = Problem(n=4, r=1.0, sigma=0.25)
        assert nonuniform_be_tail(prob, 3.0) <= hoeffding_tail(prob, 3.0) + 1e-15


class TestHoeffdingQuantile:
    def test_frozen_values(self):
        assert hoeffding_quantile(P100, 0.05, "one") == pytest.approx(
            1.2238734153404082732, rel=1e-12
        )
        assert hoeffding_quantile(P100, 0.05, "two") == pytest.approx(
            1.3581015157406194985, rel=1e-12
        )

    def test_two_sided_at_double_delta_matches_one_sided(self):
        assert hoeffding_quantile(P100, 0.1, "two") == pytest.approx(
            hoeffding_quantile(P100, 0.05, "one"), rel=REL
        )

    def test_linear_in_r(self):
        a = hoeffding_quantile(Problem(n=7, r=1.0, sigma=0.25), 0.1, "one")
        b = hoeffding_quantile(Problem(n=7, r=2.0, sigma=0.5), 0.1, "one")
        assert b == pytest.approx(2.0 * a, rel=REL)

    def test_independent_of_sigma_and_n(self):
        a = hoeffding_quantile(Problem(n=10, r=1.0, sigma=0.1), 0.2, "two")
        b = hoeffding_quantile(Problem(n=9999, r=1.0, sigma=0.45), 0.2, "two")
        assert a == b

    def test_rejects_bad_sided(self):
        with pytest.raises(ValueError):
            hoeffding_quantile(P100, 0.1, "both")


class TestDefaults:
    def test_min_structure(self):
        for u in (0.0, 0.5, 1.0, 2.0, 3.5):
            v = default_onetail(P100, u)
            assert v <= hoeffding_tail(P100, u) + 1e-15
            assert v <= bernstein_tail(P100, u) + 1e-15
            assert v <= berry_esseen_tail(P100, u) + 1e-15
            assert v <= nonuniform_be_tail(P100, u) + 1e-15

    def test_result_reports_winner(self):
        res = default_onetail_result(P100, 1.0)
        assert isinstance(res, BoundResult)
        assert res.winner in {
            "hoeffding",
            "bernstein",
            "berry_esseen",
            "nonuniform_berry_esseen",
            "zero_bias",
            "alt_zero_bias",
        }
        assert 0.0 <= res.value <= 1.0

    def test_crossover_small_vs_large_n(self):
        # Small samples: the purely exponential bounds win at moderate
        # thresholds; large samples: a Gaussian-corrected bound wins.
        small = default_onetail_result(Problem(n=100, r=1.0, sigma=0.25), 3.0)
        large = default_onetail_result(Problem(n=10 ** 6, r=1.0, sigma=0.25), 3.0)
        assert small.winner in {"hoeffding", "bernstein"}
        assert large.winner in {
            "berry_esseen",
            "nonuniform_berry_esseen",
            "zero_bias",
            "alt_zero_bias",
        }
        assert large.value < small.value

    def test_twotail_is_doubled_and_clipped(self):
        assert default_twotail(P100, 0.0) == 1.0
        u = 2.5
        one = default_onetail(P100, u)
        assert default_twotail(P100, u) == pytest.approx(min(1.0, 2.0 * one), rel=REL)
        res = default_twotail_result(P100, u)
        assert res.winner == default_onetail_result(P100, u).winner

    def test_monte_carlo_validity(self):
        q = 0.066987298107780677
        sigma = bernoulli_sigma(q)
        prob = Problem(n=100, r=1.0, sigma=sigma)
        draws = scaled_mean_draws(100, q, reps=200_000, seed=42)
        for u in (0.5, 1.0, 2.0, 3.0):
            assert exceedance_ok(draws, sigma * u, default_onetail(prob, u))
            two = default_twotail(prob, u)
            frac = float(np.mean(np.abs(draws) > sigma * u))
            stderr = math.sqrt(max(frac * (1.0 - frac), 1e-12) / draws.size)
            assert frac <= two + 3.0 * stderr


class TestMonteCarloBaselines:
    def test_all_baselines_valid(self):
        q = 0.3
        sigma = bernoulli_sigma(q)
        prob = Problem(n=50, r=1.0, sigma=sigma)
        draws = scaled_mean_draws(50, q, reps=200_000, seed=123)
        for u in (0.25, 0.75, 1.5, 2.5):
            for fn in (hoeffding_tail, bernstein_tail, berry_esseen_tail, nonuniform_be_tail):
                assert exceedance_ok(draws, sigma * u, fn(prob, u))

    def test_quantiles_valid(self):
        q = 0.3
        sigma = bernoulli_sigma(q)
        prob = Problem(n=50, r=1.0, sigma=sigma)
        draws = scaled_mean_draws(50, q, reps=200_000, seed=321)
        for delta in (0.2, 0.05):
            qb = bernstein_quantile(prob, delta)
            frac = float(np.mean(np.abs(draws) > qb))
            assert frac <= delta + 3.0 * math.sqrt(delta * (1 - delta) / draws.size)
            qh = hoeffding_quantile(prob, delta, "one")
            frac = float(np.mean(draws > qh))
            assert frac <= delta + 3.0 * math.sqrt(delta * (1 - delta) / draws.size)
