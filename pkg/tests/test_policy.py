import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from serverless_kw import (
    PolicySpec,
    SmoothingSpec,
    binomial_rule,
    penalty,
    pi_distribution,
    simplified_rule,
    smooth_param,
    smooth_step,
)

SPEC = SmoothingSpec(0.5, 10.0)


class TestSmoothStep:
    def test_values(self):
        assert smooth_step(0, 1, -1.0) == 0.0
        assert smooth_step(0, 1, 2.0) == 1.0
        assert abs(smooth_step(0, 1, 0.5) - math.exp(-0.5)) < 1e-12

    def test_array_matches_scalar(self):
        xs = np.linspace(-1, 2, 101)
        np.testing.assert_allclose(smooth_step(0, 1, xs), [smooth_step(0, 1, float(x)) for x in xs], rtol=1e-14)

    def test_monotone_grid(self):
        vals = smooth_step(0.0, 1.0, np.linspace(-1, 2, 10_000))
        assert np.all(np.diff(vals) >= 0)

    def test_bounded_difference_quotient(self):
        h = 1e-4
        xs = np.arange(-1.0, 2.0, h)
        d = np.diff(smooth_step(0.0, 1.0, xs)) / h
        assert np.all(np.isfinite(d)) and d.max() < 10

    def test_requires_ordered_bounds(self):
        with pytest.raises(ValueError):
            smooth_step(1.0, 1.0, 0.5)


class TestSmoothParam:
    def test_examples(self):
        assert smooth_param(5.0, SPEC) == 5.0
        assert smooth_param(0.0, SPEC) == pytest.approx(0.5 / 3)
        assert smooth_param(-10.0, SPEC) == pytest.approx((0.5 / 3) * math.exp(-20), rel=1e-12)

    def test_identity_band(self):
        band = np.linspace(SPEC.epsilon, SPEC.M - SPEC.epsilon, 1000)
        np.testing.assert_array_equal(smooth_param(band, SPEC), band)

    def test_strictly_inside_range(self):
        vals = smooth_param(np.linspace(-1e3, 1e3, 20_001), SPEC)
        assert np.all(vals > 0) and np.all(vals < SPEC.M)

    def test_limits(self):
        assert smooth_param(-50.0, SPEC) < 1e-40
        assert 0 < SPEC.M - smooth_param(60.0, SPEC) < 1e-14

    def test_continuous_at_branch_points(self):
        for b in (0.0, SPEC.epsilon, SPEC.M - SPEC.epsilon, SPEC.M):
            lo, hi = smooth_param(b - 1e-9, SPEC), smooth_param(b + 1e-9, SPEC)
            assert abs(hi - lo) < 1e-6

    @given(st.floats(-100, 100), st.floats(-100, 100))
    def test_monotone(self, a, b):
        a, b = sorted((a, b))
        assert smooth_param(a, SPEC) <= smooth_param(b, SPEC) + 1e-12


class TestSimplifiedRule:
    def test_examples(self):
        assert simplified_rule((0, 3, 2, 2), 0.0, 0.7, 50) == 0
        assert simplified_rule((0, 10, 3, 2), 6.5, 0.7, 50) == 5
        assert simplified_rule((0, 10, 3, 2), 6.5, 0.2, 50) == 6
        assert simplified_rule((0, 48, 1, 1), 3.0, 0.2, 50) == 0

    @given(st.integers(1, 30).flatmap(lambda N: st.tuples(
        st.just(N), st.integers(0, N), st.integers(0, N), st.integers(0, N))),
        st.floats(-5, 40), st.floats(0, 1, exclude_max=True))
    def test_bounds(self, args, theta, v):
        N, x2, x3, x4 = args
        if x2 + x3 > N or x4 > x3:
            return
        pi = simplified_rule((0, x2, x3, x4), theta, v, N)
        assert 0 <= pi <= max(0, N - x2 - x3 - 1)

    def test_matches_pi_distribution_mean(self):
        rng = np.random.default_rng(11)
        x, N, theta = (0, 4, 3, 1), 50, 4.3
        draws = [simplified_rule(x, theta, v, N) for v in rng.random(100_000)]
        pmf = pi_distribution(x, PolicySpec("simplified", theta), N)
        mean = sum(k * p for k, p in pmf.items())
        se = np.std(draws) / math.sqrt(len(draws))
        assert abs(np.mean(draws) - mean) < 3 * se + 1e-12


class TestBinomialRule:
    def test_mean(self):
        rng = np.random.default_rng(5)
        draws = binomial_rule(5.0, SPEC, rng, size=10**6)
        # 10 trials with p = 0.5: standard error 0.0016
        assert abs(draws.mean() - 5.0) < 0.01
        assert isinstance(binomial_rule(5.0, SPEC, rng), int)
        assert draws.min() >= 0 and draws.max() <= 10

    def test_far_negative_theta_gives_zero(self):
        rng = np.random.default_rng(0)
        assert not binomial_rule(-200.0, SPEC, rng, size=1000).any()

    def test_pmf_mean_vs_sampling(self):
        rng = np.random.default_rng(3)
        spec = SmoothingSpec(0.5, 4.5)
        pol = PolicySpec("binomial", 2.2, spec)
        x, N = (0, 1, 1, 1), 5
        cap = N - 1 - 1 - 1
        draws = np.minimum(binomial_rule(2.2, spec, rng, size=100_000), cap)
        pmf = pi_distribution(x, pol, N)
        mean = sum(k * p for k, p in pmf.items())
        assert max(pmf) == cap
        assert abs(draws.mean() - mean) < 3 * draws.std() / math.sqrt(len(draws))


class TestPiDistribution:
    def test_half_split(self):
        assert pi_distribution((0, 10, 3, 2), PolicySpec("simplified", 6.5), 50) == {5: 0.5, 6: 0.5}

    def test_integer_theta_point_mass(self):
        assert pi_distribution((0, 0, 0, 0), PolicySpec("simplified", 4.0), 50) == {4: 1.0}

    @given(st.floats(-5, 30), st.integers(0, 20), st.integers(0, 5))
    def test_mass_sums_to_one(self, theta, x2, x3):
        N = 30
        for pol in (PolicySpec("simplified", theta), PolicySpec("binomial", theta, SmoothingSpec(0.5, 12))):
            pmf = pi_distribution((0, x2, x3, min(x3, 1)), pol, N)
            assert abs(sum(pmf.values()) - 1) < 1e-12
            assert all(0 <= k <= max(0, N - x2 - x3 - 1) for k in pmf)


class TestPolicySpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            PolicySpec("binomial", 1.0)
        with pytest.raises(ValueError):
            PolicySpec("simplified", 1.0, SPEC)
        with pytest.raises(ValueError):
            PolicySpec("greedy", 1.0)
        with pytest.raises(ValueError):
            PolicySpec("simplified", math.nan)

    def test_smoothing_spec_validation(self):
        with pytest.raises(ValueError):
            SmoothingSpec(3.0, 5.0)
        with pytest.raises(ValueError):
            SmoothingSpec(0.5, 10.0).check_capacity(10)
        assert SmoothingSpec.default_for(50) == SmoothingSpec(0.5, 25.0)


class TestPenalty:
    def test_examples(self):
        assert penalty(5.0, SPEC) == 0.0
        assert penalty(-2.0, SPEC) == pytest.approx(6.25)
        assert penalty(12.0, SPEC) == pytest.approx(6.25)

    def test_zero_exactly_on_band(self):
        grid = np.linspace(-5, 15, 20_001)
        band = (grid >= SPEC.epsilon) & (grid <= SPEC.M - SPEC.epsilon)
        vals = penalty(grid, SPEC)
        assert np.all(vals[band] == 0)
        assert np.all(vals[~band] > 0)

    @given(st.floats(-1e3, 1e3))
    def test_nonnegative_and_scalar_matches_array(self, theta):
        p = penalty(theta, SPEC)
        assert p >= 0
        assert p == pytest.approx(float(penalty(np.array([theta]), SPEC)[0]), rel=1e-12, abs=1e-300)

    def test_quadratic_growth(self):
        assert penalty(-100.0, SPEC) == pytest.approx(100.5**2)
        assert penalty(110.0, SPEC) == pytest.approx(100.5**2)
