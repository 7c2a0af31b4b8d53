"""Tests for problem validation and derived scale quantities."""

import math

import pytest

from effconc.model import DerivedParams, Problem, derived, rsig, rsig_at

REL = 1e-12


class TestRsig:
    def test_half_range_at_max_sigma(self):
        assert rsig(1.0, 0.5) == pytest.approx(0.5, rel=REL)

    def test_frozen_values(self):
        assert rsig(1.0, 0.3) == pytest.approx(0.9, rel=REL)
        assert rsig(2.0, 0.6) == pytest.approx(1.8, rel=REL)

    def test_substituted_sigma(self):
        assert rsig_at(1.0, 0.30900827029565262286) == pytest.approx(
            0.89308254716902515881, rel=REL
        )

    def test_full_range_at_zero_sigma(self):
        assert rsig(3.0, 0.0) == pytest.approx(3.0, rel=REL)

    def test_bounds(self):
        # r/2 <= rsig <= r across the admissible sigma range.
        for sigma in (0.01, 0.1, 0.25, 0.4, 0.499):
            v = rsig(1.0, sigma)
            assert 0.5 <= v <= 1.0

    def test_decreasing_in_sigma(self):
        vals = [rsig(1.0, s) for s in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_float_slack_at_boundary(self):
        # sigma = r/2 computed through floats may overshoot by one ulp;
        # the discriminant clamp must absorb that.
        r = 0.3
        assert rsig(r, r / 2.0) == pytest.approx(r / 2.0, rel=1e-9)

    def test_rejects_oversized_sigma(self):
        with pytest.raises(ValueError):
            rsig(1.0, 0.51)

    def test_rejects_bad_range(self):
        with pytest.raises(ValueError):
            rsig(0.0, 0.0)
        with pytest.raises(ValueError):
            rsig(1.0, -0.1)


class TestProblem:
    def test_valid_construction(self):
        p = Problem(n=100, r=1.0, sigma=0.25)
        assert p.sqrt_n == pytest.approx(10.0, rel=REL)

    def test_rejects_zero_sigma(self):
        with pytest.raises(ValueError):
            Problem(n=10, r=1.0, sigma=0.0)

    def test_rejects_nonpositive_n(self):
        with pytest.raises(ValueError):
            Problem(n=0, r=1.0, sigma=0.2)

    def test_rejects_fractional_n(self):
        with pytest.raises(ValueError):
            Problem(n=10.5, r=1.0, sigma=0.2)

    def test_rejects_oversized_sigma(self):
        with pytest.raises(ValueError):
            Problem(n=10, r=1.0, sigma=0.6)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Problem(n=10, r=math.inf, sigma=0.2)
        with pytest.raises(ValueError):
            Problem(n=10, r=1.0, sigma=math.nan)

    def test_frozen(self):
        p = Problem(n=10, r=1.0, sigma=0.2)
        with pytest.raises(Exception):
            p.n = 20


class TestDerived:
    def test_values(self):
        d = derived(Problem(n=100, r=1.0, sigma=0.25))
        assert isinstance(d, DerivedParams)
        assert d.r_sigma == pytest.approx(rsig(1.0, 0.25), rel=REL)
        assert d.ratio == pytest.approx(4.0, rel=REL)
        assert d.ratio_sigma == pytest.approx(d.r_sigma / 0.25, rel=REL)
        assert d.sqrt_n == pytest.approx(10.0, rel=REL)

    def test_ratio_sigma_at_least_one(self):
        for sigma in (0.05, 0.25, 0.4999999):
            d = derived(Problem(n=7, r=1.0, sigma=sigma))
            assert d.ratio_sigma >= 1.0 - 1e-12
            assert d.ratio >= 2.0 - 1e-12
