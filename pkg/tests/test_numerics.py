"""Unit tests for the linear-algebra and statistics primitives.

High-precision oracles (mpmath) and residual identities verify the
derived fixtures; trivial fixtures are asserted directly.
"""

import math

import mpmath
import numpy as np
import pytest

from oracles import beta_quantile_oracle

from unlearn_arena.errors import (
    InvalidCounts,
    LengthMismatch,
    NotPositiveDefinite,
    SingularDowndate,
)
from unlearn_arena.numerics import (
    CredibleInterval,
    RngStream,
    gaussian_vector,
    invert_spd,
    jeffreys_interval,
    kl_divergence,
    regularized_incomplete_beta,
    sherman_morrison_downdate,
    softmax,
    solve_spd,
)


def random_spd(rng, n, jitter=1.0):
    m = rng.standard_normal((n, n))
    return m @ m.T + jitter * np.eye(n)


class TestSolveSpd:
    def test_identity_system(self):
        x = solve_spd(np.eye(2), np.array([3.0, 4.0]))
        np.testing.assert_array_equal(x, [3.0, 4.0])

    def test_2x2_closed_form(self):
        # inv([[2,1],[1,2]]) = (1/3) [[2,-1],[-1,2]]
        a = np.array([[2.0, 1.0], [1.0, 2.0]])
        x = solve_spd(a, np.array([4.0, 5.0]))
        np.testing.assert_allclose(x, [1.0, 2.0], atol=1e-12)

    def test_rank_one_gram_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            solve_spd(np.ones((2, 2)), np.ones(2))

    def test_residual_bound_random_systems(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = rng.integers(1, 10)
            a = random_spd(rng, n)
            b = rng.standard_normal(n)
            x = solve_spd(a, b)
            resid = np.max(np.abs(a @ x - b))
            assert resid <= 1e-8 * (1.0 + np.max(np.abs(b)))

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            solve_spd(np.array([[1.0, 2.0], [0.0, 1.0]]), np.ones(2))


class TestInvertSpd:
    def test_identity(self):
        np.testing.assert_array_equal(invert_spd(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        inv = invert_spd(np.diag([2.0, 4.0]))
        np.testing.assert_allclose(inv, np.diag([0.5, 0.25]), atol=1e-14)

    def test_residual_oracle_random_5x5(self):
        rng = np.random.default_rng(5)
        a = random_spd(rng, 5)
        inv = invert_spd(a)
        assert np.max(np.abs(a @ inv - np.eye(5))) <= 1e-8
        np.testing.assert_array_equal(inv, inv.T)


class TestShermanMorrisonDowndate:
    def test_zero_update_is_identity(self):
        rng = np.random.default_rng(3)
        a_inv = invert_spd(random_spd(rng, 4))
        np.testing.assert_array_equal(
            sherman_morrison_downdate(a_inv, np.zeros(4)), a_inv
        )

    def test_downdate_to_identity(self):
        # [[2,1],[1,2]] - (1,1)(1,1)^T = I, so the downdated inverse is I.
        a_inv = invert_spd(np.array([[2.0, 1.0], [1.0, 2.0]]))
        out = sherman_morrison_downdate(a_inv, np.array([1.0, 1.0]))
        np.testing.assert_allclose(out, np.eye(2), atol=1e-12)

    def test_singular_downdate(self):
        a_inv = invert_spd(np.array([[2.0, 0.0], [0.0, 1.0]]))
        with pytest.raises(SingularDowndate):
            sherman_morrison_downdate(a_inv, np.array([0.0, 1.0]))

    def test_matches_direct_inverse_200_instances(self):
        # Acceptance-grade equivalence: downdate == invert(A - uu^T) at 1e-7,
        # and (A - uu^T) @ downdated == I at 1e-7.
        rng = np.random.default_rng(200)
        checked = 0
        while checked < 200:
            n = int(rng.integers(2, 8))
            a = random_spd(rng, n, jitter=float(n))
            u = 0.5 * rng.standard_normal(n)
            down = a - np.outer(u, u)
            try:
                direct = invert_spd(down)
            except NotPositiveDefinite:
                continue
            via_update = sherman_morrison_downdate(invert_spd(a), u)
            assert np.max(np.abs(via_update - direct)) <= 1e-7
            assert np.max(np.abs(down @ via_update - np.eye(n))) <= 1e-7
            checked += 1


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax(np.zeros(2)), [0.5, 0.5], atol=1e-15)

    def test_large_logits_no_overflow(self):
        p = softmax(np.array([1000.0, 0.0]))
        assert np.all(np.isfinite(p))
        assert p[0] == pytest.approx(1.0)
        assert 0.0 < p[1] < 1e-300 * 10

    def test_normalized_and_monotone(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            z = rng.standard_normal(rng.integers(2, 12)) * 10
            p = softmax(z)
            assert abs(p.sum() - 1.0) <= 1e-12
            assert np.all(p > 0)
            np.testing.assert_array_equal(np.argsort(z), np.argsort(p))


class TestKlDivergence:
    def test_identical_distributions(self):
        assert kl_divergence(np.array([0.3, 0.7]), np.array([0.3, 0.7])) == 0.0

    def test_onehot_vs_uniform(self):
        val = kl_divergence(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
        assert val == pytest.approx(math.log(2.0), abs=1e-15)

    def test_matches_high_precision_oracle(self):
        rng = np.random.default_rng(21)
        mpmath.mp.dps = 50
        for _ in range(25):
            n = int(rng.integers(2, 9))
            p = rng.random(n) + 1e-3
            q = rng.random(n) + 1e-3
            p /= p.sum()
            q /= q.sum()
            expected = mpmath.fsum(
                mpmath.mpf(pi) * mpmath.log(mpmath.mpf(pi) / mpmath.mpf(qi))
                for pi, qi in zip(p, q)
            )
            assert kl_divergence(p, q) == pytest.approx(float(expected), abs=1e-12)

    def test_gibbs_nonnegativity(self):
        rng = np.random.default_rng(42)
        for _ in range(2000):
            n = int(rng.integers(2, 12))
            p = rng.random(n)
            q = rng.random(n)
            p /= p.sum()
            q /= q.sum()
            d = kl_divergence(p, q)
            assert d >= 0.0
            if np.max(np.abs(p - q)) <= 1e-9:
                assert d == pytest.approx(0.0, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            kl_divergence(np.array([0.5, 0.5]), np.array([1.0 / 3] * 3))

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            kl_divergence(np.array([0.5, 0.6]), np.array([0.5, 0.5]))


class TestJeffreysInterval:
    def test_symmetric_case(self):
        ci = jeffreys_interval(64, 128, 0.95)
        assert abs(ci.lo + ci.hi - 1.0) <= 1e-8

    def test_all_successes(self):
        ci = jeffreys_interval(128, 128, 0.95)
        assert ci.hi < 1.0
        assert ci.lo > 0.9

    def test_significance_fixture(self):
        ci = jeffreys_interval(96, 128, 0.95)
        assert not ci.contains(0.5)

    @pytest.mark.parametrize("s,n", [(64, 128), (96, 128), (128, 128), (0, 0)])
    def test_against_integration_oracle(self, s, n):
        ci = jeffreys_interval(s, n, 0.95)
        lo = beta_quantile_oracle(s + 0.5, n - s + 0.5, 0.025)
        hi = beta_quantile_oracle(s + 0.5, n - s + 0.5, 0.975)
        assert ci.lo == pytest.approx(lo, abs=1e-6)
        assert ci.hi == pytest.approx(hi, abs=1e-6)

    def test_width_non_increasing_in_trials(self):
        widths = [jeffreys_interval(n // 2, n, 0.95).width for n in (8, 16, 64, 256, 1024)]
        assert all(w2 <= w1 for w1, w2 in zip(widths, widths[1:]))
        for w in widths:
            ci = jeffreys_interval(3, 7, 0.9)
            assert 0.0 <= ci.lo <= ci.hi <= 1.0

    def test_invalid_counts(self):
        with pytest.raises(InvalidCounts):
            jeffreys_interval(5, 4, 0.95)
        with pytest.raises(InvalidCounts):
            jeffreys_interval(1, 4, 1.0)

    def test_cdf_endpoints(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0
        mid = regularized_incomplete_beta(0.5, 0.5, 0.5)
        assert mid == pytest.approx(0.5, abs=1e-12)


class TestRngStream:
    def test_determinism(self):
        a = gaussian_vector(RngStream(9, 4), 16, 0.0, 1.0)
        b = gaussian_vector(RngStream(9, 4), 16, 0.0, 1.0)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = gaussian_vector(RngStream(9, 4), 16, 0.0, 1.0)
        b = gaussian_vector(RngStream(9, 5), 16, 0.0, 1.0)
        assert np.max(np.abs(a - b)) > 1e-6

    def test_child_streams_are_pure_and_stable(self):
        base = RngStream(1234, 0)
        ids = {base.child(("trial", i)).stream_id for i in range(100)}
        assert len(ids) == 100
        assert base.child("data").stream_id == RngStream(1234, 0).child("data").stream_id

    def test_zero_variance(self):
        np.testing.assert_array_equal(
            gaussian_vector(RngStream(1, 1), 3, 0.0, 0.0), np.zeros(3)
        )

    def test_moments_at_large_n(self):
        draws = gaussian_vector(RngStream(77, 0), 100_000, 0.0, 0.1)
        assert abs(draws.mean()) <= 0.01
        assert abs(draws.var() - 0.1) <= 0.01


class TestCredibleInterval:
    def test_contains(self):
        ci = CredibleInterval(0.4, 0.6, 0.95)
        assert ci.contains(0.5)
        assert not ci.contains(0.61)
