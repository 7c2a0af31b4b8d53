"""Tests for special functions and search primitives.

Reference values were computed independently with mpmath at 50 digits
(see tests/oracles/compute_oracles.py) and are frozen here.
"""

import math

import numpy as np
import pytest

from effconc.numerics import (
    NumericsError,
    Tolerance,
    _invert_monotone_tail_vec,
    binomial_pnorm,
    hermite_moment_bound,
    integrate,
    invert_monotone_tail,
    minimize_scalar,
    normal_pnorm,
    std_normal_cdf_c,
    std_normal_quantile,
)

REL = 1e-12


class TestStdNormal:
    def test_cdf_c_center(self):
        assert std_normal_cdf_c(0.0) == pytest.approx(0.5, rel=REL)

    def test_cdf_c_moderate(self):
        assert std_normal_cdf_c(1.0) == pytest.approx(0.15865525393145705141, rel=REL)

    def test_cdf_c_deep_tail(self):
        assert std_normal_cdf_c(8.0) == pytest.approx(6.2209605742717841235e-16, rel=1e-10)

    def test_cdf_c_extreme_tail(self):
        # erfc keeps relative accuracy far beyond where 1 - Phi would be 0.
        assert std_normal_cdf_c(30.0) == pytest.approx(4.9067139271481870595e-198, rel=1e-10)

    def test_cdf_c_symmetry(self):
        for x in (0.3, 1.7, 4.2):
            assert std_normal_cdf_c(-x) == pytest.approx(1.0 - std_normal_cdf_c(x), rel=REL)

    def test_quantile_values(self):
        assert std_normal_quantile(0.975) == pytest.approx(1.9599639845400542355, rel=REL)
        assert std_normal_quantile(0.9) == pytest.approx(1.281551565544600467, rel=REL)
        assert std_normal_quantile(0.95) == pytest.approx(1.6448536269514727149, rel=REL)

    def test_quantile_round_trip(self):
        for p in (0.01, 0.3, 0.5, 0.9, 0.999):
            assert std_normal_cdf_c(std_normal_quantile(1.0 - p)) == pytest.approx(p, rel=1e-9)

    def test_quantile_rejects_boundary(self):
        with pytest.raises(ValueError):
            std_normal_quantile(0.0)
        with pytest.raises(ValueError):
            std_normal_quantile(1.0)


class TestNormalPnorm:
    def test_p1_mean_abs(self):
        # E|Z| = sqrt(2/pi).
        assert normal_pnorm(1.0) == pytest.approx(0.79788456080286535588, rel=REL)

    def test_p2_is_unit(self):
        assert normal_pnorm(2.0) == pytest.approx(1.0, rel=REL)

    def test_values(self):
        assert normal_pnorm(3.0) == pytest.approx(1.1685752549624655487, rel=REL)
        assert normal_pnorm(4.0) == pytest.approx(1.3160740129524924608, rel=REL)

    def test_monotone_in_p(self):
        ps = [1.0, 2.0, 4.0, 8.0, 16.0, 64.0, 256.0]
        vals = [normal_pnorm(p) for p in ps]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_large_p_no_overflow(self):
        v = normal_pnorm(10_000.0)
        assert math.isfinite(v)
        # The p-norm of a Gaussian grows like sqrt(p).
        assert 0.5 * math.sqrt(10_000.0) < v < 2.0 * math.sqrt(10_000.0)


class TestBinomialPnorm:
    def test_single_trial_reduces_to_power(self):
        # For one trial, E V^p = q, so the norm is q**(1/p).
        for q, p in ((0.5, 2.0), (0.3, 5.0)):
            assert binomial_pnorm(1, q, p) == pytest.approx(q ** (1.0 / p), rel=REL)

    def test_degenerate_q(self):
        assert binomial_pnorm(10, 0.0, 3.0) == 0.0
        assert binomial_pnorm(10, 1.0, 3.0) == 10.0

    def test_enumeration_values(self):
        assert binomial_pnorm(3, 0.5, 2.0) == pytest.approx(1.7320508075688772935, rel=REL)
        assert binomial_pnorm(1, 0.3, 5.0) == pytest.approx(0.78600308559662278099, rel=REL)
        assert binomial_pnorm(20, 0.25, 3.0) == pytest.approx(5.67870374771020625, rel=REL)

    def test_monotone_in_q(self):
        vals = [binomial_pnorm(50, q, 4.0) for q in (0.1, 0.2, 0.4, 0.8)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_monotone_in_n(self):
        vals = [binomial_pnorm(n, 0.3, 4.0) for n in (10, 20, 40, 80)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_windowed_path_is_close_and_conservative(self):
        # Just below and above the exact-summation cutoff the two code paths
        # must agree closely, with the windowed one never smaller.
        q, p = 3e-4, 6.0
        exact = binomial_pnorm(1_000_000, q, p)
        import effconc.numerics as numerics

        old = numerics._BINOM_EXACT_MAX_N
        try:
            numerics._BINOM_EXACT_MAX_N = 10
            windowed = binomial_pnorm(1_000_000, q, p)
        finally:
            numerics._BINOM_EXACT_MAX_N = old
        assert windowed >= exact * (1.0 - 1e-12)
        # The remainder charge adds a tiny conservative excess.
        assert windowed == pytest.approx(exact, rel=1e-3)


class TestHermiteMomentBound:
    def test_values(self):
        assert hermite_moment_bound(0, 3.0) == pytest.approx(1.0, rel=REL)
        assert hermite_moment_bound(1, 3.0) == pytest.approx(math.sqrt(2.0), rel=REL)
        assert hermite_moment_bound(4, 3.0) == pytest.approx(math.sqrt(24.0) * 4.0, rel=REL)

    def test_log_space_large_degree(self):
        v = hermite_moment_bound(100, 2.5)
        assert math.isfinite(v) and v > 0

    def test_saturates_to_inf_past_float_range(self):
        assert hermite_moment_bound(400, 2.5) == math.inf

    def test_dominates_p2_hermite_norm(self):
        # At p = 2 the bound is exactly the L2 norm sqrt(k!) of the k-th
        # (probabilists') Hermite polynomial under the Gaussian measure.
        for k in range(6):
            assert hermite_moment_bound(k, 2.0) == pytest.approx(
                math.sqrt(math.factorial(k)), rel=REL
            )


class TestIntegrate:
    def test_polynomial(self):
        assert integrate(lambda y: y * y, 0.0, 3.0) == pytest.approx(9.0, rel=1e-10)

    def test_half_power_kernel(self):
        # Integral of y**-0.5 * (1/y - 1/100)**0.5 over [0.01, 100]; closed
        # form: log((1+m)/(1-m)) - 2m with m = sqrt(1 - 1/10000), scaled by
        # sqrt(100).  mpmath value frozen from the oracle script.
        val = integrate(lambda y: y ** -0.5 * (1.0 / y - 0.01) ** 0.5, 0.01, 100.0)
        assert val == pytest.approx(8.5966847337210941892, rel=1e-9)

    def test_left_singularity_substitution(self):
        # Integral of (y - 1)**-0.5 over [1, 2] = 2; singular at the left end.
        val = integrate(lambda y: (y - 1.0) ** -0.5, 1.0, 2.0, singular_end="left")
        assert val == pytest.approx(2.0, rel=1e-10)

    def test_right_singularity_substitution(self):
        val = integrate(lambda y: (2.0 - y) ** -0.5, 1.0, 2.0, singular_end="right")
        assert val == pytest.approx(2.0, rel=1e-10)

    def test_failure_is_loud(self):
        # A non-integrable singularity must raise, not return garbage.
        with pytest.raises(NumericsError):
            integrate(lambda y: 1.0 / y, 0.0, 1.0)

    def test_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            integrate(lambda y: y, 1.0, 1.0)


class TestMinimizeScalar:
    def test_quadratic(self):
        x, v = minimize_scalar(lambda x: (x - 1.3) ** 2 + 4.0, 0.0, 5.0)
        assert x == pytest.approx(1.3, abs=1e-6)
        assert v == pytest.approx(4.0, abs=1e-10)

    def test_never_worse_than_endpoints(self):
        f = lambda x: math.cos(5.0 * x) + 0.2 * x
        _, v = minimize_scalar(f, 0.0, 4.0)
        assert v <= min(f(0.0), f(4.0)) + 1e-15

    def test_degenerate_interval(self):
        x, v = minimize_scalar(lambda x: x * x, 2.0, 2.0)
        assert (x, v) == (2.0, 4.0)


class TestInvertMonotoneTail:
    def test_exponential_tail(self):
        # bound(u) = exp(-u) crosses delta at -log(delta).
        u = invert_monotone_tail(lambda u: math.exp(-u), 0.05, 10.0)
        assert u == pytest.approx(-math.log(0.05), abs=1e-6)
        assert math.exp(-u) <= 0.05

    def test_result_always_satisfies_level(self):
        bound = lambda u: min(1.0, 1.2 * math.exp(-(u ** 1.5)))
        for delta in (0.3, 0.1, 0.01):
            u = invert_monotone_tail(bound, delta, 20.0)
            assert bound(u) <= delta

    def test_zero_when_trivially_satisfied(self):
        assert invert_monotone_tail(lambda u: 0.01, 0.5, 5.0) == 0.0

    def test_unreachable_level_raises(self):
        with pytest.raises(NumericsError):
            invert_monotone_tail(lambda u: 0.5, 0.1, 3.0)

    def test_vector_form_matches_scalar(self):
        rates = np.array([0.7, 1.0, 2.5])
        bound_vec = lambda u: np.exp(-rates * u)
        out = _invert_monotone_tail_vec(bound_vec, 0.05, np.full(3, 30.0))
        for rate, u in zip(rates, out):
            assert u == pytest.approx(-math.log(0.05) / rate, abs=1e-6)

    def test_vector_form_raises_when_unreachable(self):
        with pytest.raises(NumericsError):
            _invert_monotone_tail_vec(lambda u: np.full_like(u, 0.2), 0.1, np.full(2, 4.0))


class TestTolerance:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            Tolerance(abs_tol=0.0)
        with pytest.raises(ValueError):
            Tolerance(rel_tol=-1.0)
        with pytest.raises(ValueError):
            Tolerance(max_iter=0)
