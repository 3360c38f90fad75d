"""Pólya-Gamma sampler: exact moments, symmetry, and tail behavior."""

import numpy as np
import pytest

from laggard.polya_gamma import pg_mean, pg_ones, sample_polya_gamma

N = 100_000


def _draws(b, c, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    # integer shapes decompose into sums of PG(1, c); use the vectorized
    # kernel so 10^5-draw moment checks stay fast
    total = np.zeros(N)
    for _ in range(int(b)):
        total += pg_ones(np.full(N, float(c)), rng)
    return total


def pg_variance(b, c):
    """Var PG(b, c) = b (sinh(c) - c) / (4 c^3 cosh^2(c/2)); limit b/24 at c=0."""
    if abs(c) < 1e-8:
        return b / 24.0
    return b * (np.sinh(c) - c) / (4 * c**3 * np.cosh(c / 2.0) ** 2)


class TestMoments:
    @pytest.mark.parametrize(
        "b,c,seed", [(1, 1e-9, 10), (1, 2.0, 11), (2, -1.0, 12), (3, 5.0, 13)]
    )
    def test_mean_within_three_se(self, b, c, seed):
        draws = _draws(b, c, seed)
        se = np.sqrt(pg_variance(b, c) / N)
        assert abs(draws.mean() - pg_mean(b, c)) < 3 * se

    def test_mean_formula_limit(self):
        assert pg_mean(1, 0.0) == pytest.approx(0.25)
        assert pg_mean(4, 0.0) == pytest.approx(1.0)
        assert pg_mean(1, 2.0) == pytest.approx(np.tanh(1.0) / 4)


class TestVectorizedOnes:
    def test_matches_scalar_statistics(self):
        rng = np.random.Generator(np.random.Philox(5))
        c = np.full(N, 1.5)
        draws = pg_ones(c, rng)
        se = np.sqrt(pg_variance(1, 1.5) / N)
        assert abs(draws.mean() - pg_mean(1, 1.5)) < 3 * se
        assert np.all(draws > 0)

    def test_symmetric_in_c(self):
        rng1 = np.random.Generator(np.random.Philox(6))
        rng2 = np.random.Generator(np.random.Philox(6))
        a = pg_ones(np.full(2000, 3.0), rng1)
        b = pg_ones(np.full(2000, -3.0), rng2)
        np.testing.assert_array_equal(a, b)

    def test_large_tilt_shrinks_draws(self):
        rng = np.random.Generator(np.random.Philox(7))
        small = pg_ones(np.full(5000, 0.1), rng).mean()
        large = pg_ones(np.full(5000, 10.0), rng).mean()
        assert large < small

    def test_deterministic_given_seed(self):
        a = pg_ones(np.linspace(-2, 2, 100), np.random.Generator(np.random.Philox(9)))
        b = pg_ones(np.linspace(-2, 2, 100), np.random.Generator(np.random.Philox(9)))
        np.testing.assert_array_equal(a, b)


class TestGeneralShape:
    def test_integer_b_additivity(self):
        # PG(2, c) equals the sum of two PG(1, c) draws in distribution
        rng = np.random.Generator(np.random.Philox(21))
        direct = np.array([sample_polya_gamma(2, 1.0, rng) for _ in range(20_000)])
        rng = np.random.Generator(np.random.Philox(22))
        summed = pg_ones(np.full(20_000, 1.0), rng) + pg_ones(np.full(20_000, 1.0), rng)
        se = np.sqrt(2 * pg_variance(1, 1.0) / 20_000)
        assert abs(direct.mean() - summed.mean()) < 4 * se

    def test_non_integer_b_mean(self):
        rng = np.random.Generator(np.random.Philox(23))
        draws = np.array([sample_polya_gamma(1.5, 1.0, rng) for _ in range(30_000)])
        se = np.sqrt(pg_variance(1.5, 1.0) / 30_000)
        assert abs(draws.mean() - pg_mean(1.5, 1.0)) < 4 * se

    def test_invalid_b_rejected(self):
        from laggard.errors import LaggardError

        rng = np.random.Generator(np.random.Philox(1))
        with pytest.raises(LaggardError):
            sample_polya_gamma(0.0, 1.0, rng)
