import dataclasses

import numpy as np
import pytest

from avclust.config import RunConfig
from avclust.exceptions import ConfigError, TrainingDivergedError
from avclust.model import init_model_params
from avclust.synth import SceneGenerator, SceneSpec, scene_seed
from avclust.training import init_optimizer, optimizer_step, train

SMALL = RunConfig(visual_height=16, visual_width=16, visual_channels=2, audio_frames=16,
                  audio_bins=8, visual_patch=4, audio_patch_frames=4, audio_patch_bins=4,
                  feature_dim=8, center_dim=8, clusters=2, cluster_iterations=2,
                  visual_blob_radius=2, audio_span_frames=8, audio_span_bins=4,
                  latent_dim=6, min_components=1, max_components=1, silent_prob=0.0,
                  batch_size=4, train_iterations=10, noise_sigma=0.0).validate()


def small_dataset(count=12, seed=0):
    gen = SceneGenerator(SceneSpec.from_run_config(SMALL))
    return [gen.generate_pair(scene_seed(seed, i)) for i in range(count)]


class TestOptimizerStep:
    def test_zero_gradient_from_fresh_state(self):
        params = {"w": np.array([1.0, -2.0, 3.0])}
        state = init_optimizer(params, learning_rate=0.1)
        grads = {"w": np.zeros(3)}
        updated, state = optimizer_step(params, grads, state)
        np.testing.assert_array_equal(updated["w"], params["w"])
        np.testing.assert_array_equal(state.m["w"], np.zeros(3))
        assert state.step == 1

    def test_moments_decay(self):
        params = {"w": np.ones(2)}
        state = init_optimizer(params, learning_rate=0.0)
        state.m["w"] = np.array([1.0, -1.0])
        state.v["w"] = np.array([4.0, 4.0])
        _, state = optimizer_step(params, {"w": np.zeros(2)}, state)
        np.testing.assert_allclose(state.m["w"], [0.9, -0.9], atol=1e-15)
        np.testing.assert_allclose(state.v["w"], [3.996, 3.996], atol=1e-12)

    def test_first_step_from_zero_state_analytic(self):
        # bias corrections cancel at t=1: step = lr * g / (|g| + eps)
        g = np.array([0.5, -2.0, 1e-12])
        params = {"w": np.zeros(3)}
        eta, eps = 1e-2, 1e-8
        state = init_optimizer(params, learning_rate=eta, epsilon=eps)
        updated, _ = optimizer_step(params, {"w": g}, state)
        expected = -eta * g / (np.abs(g) + eps)
        np.testing.assert_allclose(updated["w"], expected, atol=1e-15)

    def test_quadratic_bowl_converges(self):
        rng = np.random.default_rng(0)
        params = {"x": rng.normal(size=6)}
        initial = float(np.sum(params["x"] ** 2))
        state = init_optimizer(params, learning_rate=0.05)
        for _ in range(500):
            grads = {"x": 2.0 * params["x"]}
            params, state = optimizer_step(params, grads, state)
        assert float(np.sum(params["x"] ** 2)) < 1e-3 * initial

    def test_non_finite_gradient_diverges(self):
        params = {"w": np.ones(2)}
        state = init_optimizer(params)
        with pytest.raises(TrainingDivergedError):
            optimizer_step(params, {"w": np.array([np.nan, 0.0])}, state)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        g = rng.normal(size=4)
        outs = []
        for _ in range(2):
            params = {"w": np.ones(4)}
            state = init_optimizer(params, learning_rate=0.01)
            for _ in range(5):
                params, state = optimizer_step(params, {"w": g}, state)
            outs.append(params["w"])
        np.testing.assert_array_equal(outs[0], outs[1])


class TestTrain:
    def test_zero_learning_rate_keeps_parameters(self):
        dataset = small_dataset()
        cfg = dataclasses.replace(SMALL, learning_rate=0.0).validate()
        initial = init_model_params(cfg)
        snapshot = {k: v.copy() for k, v in initial.to_dict().items()}
        result = train(dataset, cfg, initial_params=initial)
        for name, block in result.params.to_dict().items():
            np.testing.assert_array_equal(block, snapshot[name])
        losses = [row.loss for row in result.log]
        # loss varies only through batch composition; reseeding the loop
        # reproduces it exactly (checked below), parameters never move
        assert len(losses) == cfg.train_iterations

    def test_same_seed_identical_logs(self):
        dataset = small_dataset()
        a = train(dataset, SMALL)
        b = train(dataset, SMALL)
        assert [(r.iteration, r.loss, r.pos_score_mean, r.neg_score_mean) for r in a.log] \
            == [(r.iteration, r.loss, r.pos_score_mean, r.neg_score_mean) for r in b.log]
        for name, block in a.params.to_dict().items():
            np.testing.assert_array_equal(block, b.params.to_dict()[name])

    def test_needs_two_scenes(self):
        with pytest.raises(ConfigError):
            train(small_dataset(count=1), SMALL)

    def test_separation_emerges_on_clean_single_source(self):
        # matched-pair supervision on noise-free single-component scenes:
        # positive scores should pull ahead of negatives within 500 iterations
        wins = 0
        for seed in range(10):
            cfg = dataclasses.replace(SMALL, seed=seed, train_iterations=500,
                                      batch_size=8, learning_rate=1e-3).validate()
            dataset = small_dataset(count=64, seed=seed)
            result = train(dataset, cfg)
            tail = result.log[-50:]
            separation = float(np.mean([r.pos_score_mean - r.neg_score_mean for r in tail]))
            wins += int(separation > 0.0)
        assert wins >= 9
