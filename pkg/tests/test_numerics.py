import math

import numpy as np
import pytest

from avclust.exceptions import DegenerateVectorError
from avclust.numerics import (cosine_similarity, l2_normalize, smooth_max, smooth_min,
                              softmax)


class TestSmoothMax:
    def test_equal_values(self):
        assert smooth_max([0.0, 0.0], 1.0) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_dominant_value(self):
        expected = math.log(math.exp(10.0) + 1.0)
        assert smooth_max([10.0, 0.0], 1.0) == pytest.approx(expected, abs=1e-9)

    def test_sandwich_bound_against_direct_scan(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            k = int(rng.integers(1, 17))
            values = rng.uniform(-10.0, 10.0, size=k)
            z = float(rng.choice([1.0, 4.0, 16.0]))
            result = smooth_max(values, z)
            exact = max(float(v) for v in values)  # direct scan oracle
            assert exact - 1e-12 <= result <= exact + math.log(k) / z + 1e-12

    def test_no_overflow_at_large_magnitudes(self):
        assert math.isfinite(smooth_max([700.0, -700.0], 1.0))
        assert math.isfinite(smooth_max([7.0, -7.0], 100.0))
        assert math.isfinite(smooth_min([700.0, -700.0], 1.0))

    def test_rejects_empty_and_non_finite(self):
        with pytest.raises(ValueError):
            smooth_max([], 1.0)
        with pytest.raises(ValueError):
            smooth_max([1.0, float("nan")], 1.0)
        with pytest.raises(ValueError):
            smooth_max([1.0], 0.0)
        with pytest.raises(ValueError):
            smooth_max([1.0], -2.0)


class TestSmoothMin:
    def test_equal_values(self):
        assert smooth_min([1.0, 1.0], 2.0) == pytest.approx(1.0 - math.log(2.0) / 2.0, abs=1e-12)

    def test_dominant_minimum(self):
        expected = -math.log(1.0 + math.exp(-10.0))
        assert smooth_min([0.0, 10.0], 1.0) == pytest.approx(expected, abs=1e-12)

    def test_singleton_exact(self):
        for d in (-3.5, 0.0, 12.25):
            for z in (0.5, 1.0, 40.0):
                assert smooth_min([d], z) == pytest.approx(d, abs=1e-12)

    def test_negation_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            values = rng.uniform(-5.0, 5.0, size=int(rng.integers(1, 9)))
            z = float(rng.uniform(0.5, 20.0))
            assert smooth_min(values, z) == pytest.approx(-smooth_max(-values, z), abs=1e-12)

    def test_error_shrinks_as_z_grows(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            values = rng.uniform(-4.0, 4.0, size=6)
            exact = float(np.min(values))
            errors = [abs(smooth_min(values, z) - exact) for z in (1.0, 10.0, 100.0)]
            assert errors[0] >= errors[1] >= errors[2]
            for z, err in zip((1.0, 10.0, 100.0), errors):
                assert err <= math.log(len(values)) / z + 1e-12


class TestSoftmax:
    def test_uniform_on_equal_inputs(self):
        np.testing.assert_allclose(softmax([0.0, 0.0, 0.0]), np.full(3, 1.0 / 3.0), atol=1e-15)

    def test_two_value_analytic(self):
        e = math.e
        np.testing.assert_allclose(softmax([1.0, 0.0]), [e / (e + 1.0), 1.0 / (e + 1.0)],
                                   atol=1e-12)

    def test_shift_invariance(self):
        for c in (-130.0, 0.0, 42.0):
            np.testing.assert_allclose(softmax([c, c + 5.0]), softmax([0.0, 5.0]), atol=1e-15)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        values = rng.uniform(-50.0, 50.0, size=(40, 7))
        out = softmax(values, axis=1)
        np.testing.assert_allclose(out.sum(axis=1), np.ones(40), atol=1e-12)
        assert np.all(out > 0.0)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        values = rng.uniform(-3.0, 3.0, size=9)
        perm = rng.permutation(9)
        # equal up to summation-order roundoff in the normalizer
        np.testing.assert_allclose(softmax(values)[perm], softmax(values[perm]),
                                   rtol=0, atol=1e-15)

    def test_large_inputs_stable(self):
        out = softmax([700.0, 0.0])
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1.0, abs=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            softmax([np.inf, 0.0])


class TestCosineSimilarity:
    def test_identity_and_negation(self):
        v = np.array([0.3, -1.2, 4.0])
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)
        assert cosine_similarity(v, -v) == pytest.approx(-1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_degenerate_vector(self):
        with pytest.raises(DegenerateVectorError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])


class TestL2Normalize:
    def test_analytic(self):
        np.testing.assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-15)

    def test_unit_vector_fixed_point(self):
        v = l2_normalize(np.array([2.0, -1.0, 0.5]))
        np.testing.assert_allclose(l2_normalize(v), v, atol=1e-12)
        assert np.linalg.norm(l2_normalize(v)) == pytest.approx(1.0, abs=1e-12)

    def test_direction_preserved(self):
        v = np.array([1.5, -2.0])
        out = l2_normalize(v)
        assert cosine_similarity(out, v) == pytest.approx(1.0, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateVectorError):
            l2_normalize([0.0, 0.0])
