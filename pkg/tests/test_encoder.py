import numpy as np
import pytest

from avclust.encoder import (EncoderParams, encode, encoder_backward, extract_patches_batch,
                             init_encoder_params)
from avclust.exceptions import ShapeError


def make_params(rng, patch=(2, 2), channels=1, n=4, activation="tanh"):
    return init_encoder_params(rng, patch, channels, n, activation)


class TestEncode:
    def test_zero_grid_zero_bias(self):
        rng = np.random.default_rng(0)
        params = make_params(rng, n=5)
        params.bias[:] = 0.0
        fs = encode(np.zeros((6, 4)), params)
        np.testing.assert_array_equal(fs.vectors, np.zeros((6, 5)))

    def test_identity_configuration_reproduces_pixels(self):
        # 1x1 patches, identity weight, identity activation: features == pixels
        params = EncoderParams((1, 1), np.eye(1), np.zeros(1), activation="identity")
        grid = np.linspace(-1.0, 1.0, 12).reshape(4, 3)
        fs = encode(grid, params)
        np.testing.assert_allclose(fs.vectors[:, 0], grid.ravel(), atol=1e-15)
        assert fs.grid_shape == (4, 3)
        assert fs.modality == "audio"

    def test_shape_arithmetic(self):
        rng = np.random.default_rng(1)
        params = make_params(rng, patch=(4, 4), channels=1, n=8)
        fs = encode(rng.uniform(-1, 1, size=(32, 32, 1)), params)
        assert fs.vectors.shape == (64, 8)
        assert fs.grid_shape == (8, 8)
        assert fs.modality == "visual"

    def test_divisibility_violation(self):
        rng = np.random.default_rng(2)
        params = make_params(rng, patch=(3, 3), channels=1, n=4)
        with pytest.raises(ShapeError):
            encode(np.zeros((10, 9)), params)

    def test_patch_order_row_major(self):
        # constant-per-patch grid: feature order must follow patch row-major order
        grid = np.kron(np.arange(6).reshape(2, 3), np.ones((2, 2))) / 10.0
        params = EncoderParams((2, 2), np.ones((1, 4)), np.zeros(1), activation="identity")
        fs = encode(grid, params)
        np.testing.assert_allclose(fs.vectors[:, 0], 0.4 * np.arange(6), atol=1e-12)

    def test_translation_covariance_by_one_patch(self):
        rng = np.random.default_rng(3)
        params = make_params(rng, patch=(2, 2), channels=1, n=6)
        grid = rng.uniform(-1, 1, size=(8, 6))
        fs = encode(grid, params)
        rolled = encode(np.roll(grid, 2, axis=0), params)
        gr, gc = fs.grid_shape
        original = fs.vectors.reshape(gr, gc, -1)
        shifted = rolled.vectors.reshape(gr, gc, -1)
        np.testing.assert_array_equal(shifted, np.roll(original, 1, axis=0))

    def test_grid_shape_round_trip(self):
        rng = np.random.default_rng(4)
        params = make_params(rng, patch=(2, 3), channels=2, n=5)
        grid = rng.uniform(-1, 1, size=(6, 9, 2))
        fs = encode(grid, params)
        assert fs.grid_shape == (3, 3)
        assert fs.count == 9
        back = fs.vectors.reshape(fs.grid_shape + (5,))
        np.testing.assert_array_equal(back.reshape(9, 5), fs.vectors)


class TestEncoderBackward:
    def test_zero_upstream(self):
        rng = np.random.default_rng(5)
        params = make_params(rng)
        grid = rng.uniform(-1, 1, size=(4, 4))
        grads = encoder_backward(np.zeros((4, 4)), params, grid)
        np.testing.assert_array_equal(grads.weight, np.zeros_like(params.weight))
        np.testing.assert_array_equal(grads.bias, np.zeros_like(params.bias))

    def test_matches_central_differences(self):
        rng = np.random.default_rng(6)
        params = make_params(rng, patch=(2, 2), channels=1, n=3)
        grid = rng.uniform(-1, 1, size=(4, 6))
        upstream = rng.normal(size=(6, 3))

        def loss():
            return float(np.sum(encode(grid, params).vectors * upstream))

        grads = encoder_backward(upstream, params, grid)
        h = 1e-6
        for arr, g in ((params.weight, grads.weight), (params.bias, grads.bias)):
            flat, gflat = arr.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                f_plus = loss()
                flat[i] = orig - h
                f_minus = loss()
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2 * h)
                assert abs(gflat[i] - numeric) / max(abs(gflat[i]), abs(numeric), 1e-8) < 1e-6

    def test_linear_activation_gradient_is_patch_outer_product(self):
        rng = np.random.default_rng(7)
        params = make_params(rng, patch=(2, 2), channels=1, n=3, activation="identity")
        grid = rng.uniform(-1, 1, size=(4, 4))
        upstream = rng.normal(size=(4, 3))
        grads = encoder_backward(upstream, params, grid)
        patches, _ = extract_patches_batch(grid[None, :, :, None], (2, 2))
        expected = np.zeros_like(params.weight)
        for i in range(4):
            expected += np.outer(upstream[i], patches[0, i])
        np.testing.assert_allclose(grads.weight, expected, atol=1e-12)
        np.testing.assert_allclose(grads.bias, upstream.sum(axis=0), atol=1e-12)

    def test_shape_mismatch(self):
        rng = np.random.default_rng(8)
        params = make_params(rng)
        with pytest.raises(ShapeError):
            encoder_backward(np.zeros((3, 9)), params, np.zeros((4, 4)))


class TestInit:
    def test_bounds_and_determinism(self):
        a = init_encoder_params(np.random.default_rng(9), (2, 2), 3, 8)
        b = init_encoder_params(np.random.default_rng(9), (2, 2), 3, 8)
        np.testing.assert_array_equal(a.weight, b.weight)
        np.testing.assert_array_equal(a.bias, b.bias)
        bound = np.sqrt(1.0 / 12.0)
        assert np.all(np.abs(a.weight) <= bound)
        assert a.weight.shape == (8, 12)
