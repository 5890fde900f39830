"""Tests for majorization orders, Schur probes and unitary-stochastic construction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from corrmimo import majorization as mj

positive = arrays(
    float, st.integers(2, 8), elements=st.floats(0.01, 10.0, allow_nan=False)
)


class TestOrders:
    def test_uniform_below_everything(self):
        assert mj.majorizes([1 / 3] * 3, [1.0, 0.0, 0.0])

    def test_prefix_violation(self):
        assert not mj.majorizes([0.5, 0.5, 0.0], [0.4, 0.4, 0.2])

    def test_reflexive(self, rng):
        v = rng.uniform(size=5)
        assert mj.majorizes(v, v)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mj.majorizes([1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            mj.weakly_submajorizes([1], [1, 2])

    def test_weak_examples(self):
        assert mj.weakly_submajorizes([1, 1], [2, 1])
        assert not mj.weakly_submajorizes([3, 0], [2, 1])

    def test_unequal_totals_not_majorized(self):
        assert not mj.majorizes([1, 1], [2, 1])

    @given(positive)
    def test_extremes(self, v):
        a = v / v.sum()
        m = a.size
        assert mj.majorizes(np.full(m, 1 / m), a)
        assert mj.majorizes(a, np.eye(m)[0])

    def test_weak_duality(self, rng):
        # a submajorized by b  <=>  -a supermajorized by -b
        for _ in range(500):
            a, b = rng.uniform(size=4), rng.uniform(size=4)
            assert mj.weakly_submajorizes(a, b) == mj.weakly_supermajorizes(-a, -b)

    def test_super_uses_smallest_entries(self):
        # larger prefix sums alone do not give supermajorization
        assert not mj.weakly_supermajorizes([3, 0], [1, 1])
        assert mj.weakly_supermajorizes([2.5, 1.5], [3, 1])

    def test_transitive(self, rng):
        for _ in range(200):
            c = rng.uniform(0.1, 1, 5)
            b = mj.random_majorized(c, rng)
            a = mj.random_majorized(b, rng)
            assert mj.majorizes(b, c) and mj.majorizes(a, b) and mj.majorizes(a, c)


class TestUnitaryStochastic:
    def _check(self, u, v):
        pair = mj.unitary_stochastic_from_majorization(u, v)
        g, q = pair.gamma, pair.q
        n = len(u)
        assert np.linalg.norm(g.conj().T @ g - np.eye(n)) < 1e-10
        np.testing.assert_allclose(q, np.abs(g) ** 2, atol=1e-12)
        np.testing.assert_allclose(q.sum(axis=0), 1, atol=1e-10)
        np.testing.assert_allclose(q.sum(axis=1), 1, atol=1e-10)
        np.testing.assert_allclose(mj.ordered(v) @ q, mj.ordered(u), atol=1e-10)
        return pair

    def test_constant_target_two(self):
        pair = self._check([2.5, 2.5], [4.0, 1.0])
        np.testing.assert_allclose(pair.q, np.full((2, 2), 0.5), atol=1e-14)
        np.testing.assert_allclose(
            np.abs(pair.gamma), np.full((2, 2), 1 / np.sqrt(2)), atol=1e-14
        )

    def test_identity_when_equal(self):
        pair = self._check([3.0, 2.0, 1.0], [3.0, 2.0, 1.0])
        np.testing.assert_allclose(pair.gamma, np.eye(3))

    def test_givens_chain_example(self):
        self._check([3.0, 2.0, 1.0], [4.0, 2.0, 0.0])

    def test_random_pairs(self, rng):
        for _ in range(1000):
            n = int(rng.integers(2, 9))
            v = rng.uniform(0, 5, n)
            u = mj.random_majorized(v, rng, steps=int(rng.integers(1, 3 * n)))
            self._check(u, v)

    def test_precondition(self):
        with pytest.raises(ValueError):
            mj.unitary_stochastic_from_majorization([4.0, 0.0], [3.0, 1.0])

    def test_pair_validates(self):
        with pytest.raises(ValueError):
            mj.UnitaryStochasticPair(np.eye(2), np.full((2, 2), 0.5))

    def test_dft_unitary(self):
        f = mj.dft_matrix(5)
        np.testing.assert_allclose(f.conj().T @ f, np.eye(5), atol=1e-12)
        np.testing.assert_allclose(np.abs(f) ** 2, 0.2, atol=1e-12)


class TestSchurProbe:
    def test_sum_both(self, rng):
        assert mj.schur_probe(np.sum, 4, 200, rng).label == "both"

    def test_max_convex(self, rng):
        assert mj.schur_probe(np.max, 4, 200, rng).label == "consistent-convex"

    def test_product_concave(self, rng):
        assert mj.schur_probe(np.prod, 4, 200, rng).label == "consistent-concave"

    def test_neither(self, rng):
        # a non-symmetric function is falsified in both directions
        assert mj.schur_probe(lambda x: x[0] - 2 * x[1], 3, 500, rng).label == "neither"

    def test_bad_args(self, rng):
        with pytest.raises(ValueError):
            mj.schur_probe(np.sum, 1, 10, rng)


class TestKTupleInequality:
    def test_equal_weights(self):
        assert mj.k_tuple_inequality_check([1, 2], [1, 1])
        assert mj.k_tuple_inequality_check([1, 1], [1, 1])

    def test_oppositely_ordered_tuples(self, rng):
        for _ in range(1000):
            k = int(rng.integers(1, 9))
            x = np.sort(rng.uniform(0.01, 10, k))
            y = np.sort(rng.uniform(0.01, 10, k))[::-1]
            assert mj.k_tuple_inequality_check(x, y)

    def test_fails_without_ordering(self):
        # x decreasing with y decreasing: 4 > (1/2)(1.5 + 1)(3) = 3.75
        assert not mj.k_tuple_inequality_check([3, 1], [2, 1])

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            mj.k_tuple_inequality_check([1, 0], [1, 1])


class TestConvexImages:
    """Sums and images of convex functions along majorization chains."""

    def test_increasing_convex_weak(self, rng):
        g = np.exp
        for _ in range(500):
            b = rng.uniform(0, 2, 5)
            a = mj.random_majorized(b, rng) - rng.uniform(0, 0.3, 5)
            assert mj.weakly_submajorizes(a, b)
            assert g(a).sum() <= g(b).sum() + 1e-10

    def test_decreasing_convex_image(self, rng):
        g = lambda x: 1.0 / x
        for _ in range(500):
            b = rng.uniform(0.2, 2, 5)
            a = mj.random_majorized(b, rng) + rng.uniform(0, 0.3, 5)
            assert mj.weakly_supermajorizes(a, b)
            assert mj.weakly_submajorizes(g(a), g(b), tol=1e-10)

    @settings(max_examples=200)
    @given(positive, st.integers(0, 2**32 - 1))
    def test_convex_sum(self, b, seed):
        a = mj.random_majorized(b, np.random.default_rng(seed))
        for f in (np.square, lambda x: -np.log(x), lambda x: x * np.log(x)):
            assert f(a).sum() <= f(b).sum() + 1e-10 * max(1.0, abs(f(b).sum()))
