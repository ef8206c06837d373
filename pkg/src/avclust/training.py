"""Adaptive-moment optimizer and the cross-modal training loop."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .exceptions import ConfigError, TrainingDivergedError
from .grad import backward
from .model import ModelParams, cluster_config_from, init_model_params
from .synth import make_batch


@dataclass
class OptimizerState:
    """Adam state: step count plus first/second moment accumulators per block."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_optimizer(params: dict, learning_rate: float = 1e-4, beta1: float = 0.9,
                   beta2: float = 0.999, epsilon: float = 1e-8) -> OptimizerState:
    state = OptimizerState(learning_rate=learning_rate, beta1=beta1, beta2=beta2,
                           epsilon=epsilon)
    for name, block in params.items():
        state.m[name] = np.zeros_like(block)
        state.v[name] = np.zeros_like(block)
    return state


def optimizer_step(params: dict, grads: dict, state: OptimizerState):
    """One bias-corrected adaptive-moment update; returns (new params, state)."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient in block {name!r}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    updated = {}
    for name, theta in params.items():
        g = grads[name]
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        updated[name] = theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return updated, state


@dataclass
class TrainLogRow:
    iteration: int
    loss: float
    pos_score_mean: float
    neg_score_mean: float


@dataclass
class TrainResult:
    params: ModelParams
    log: List[TrainLogRow]


def train(dataset, config, initial_params: Optional[ModelParams] = None) -> TrainResult:
    """Train encoders and projections with the max-margin objective.

    Per iteration: sample a batch with negatives, encode both modalities,
    cluster each with the shared bank, take the hinge loss on matched
    centers, backprop through the full unroll, and apply one optimizer
    step. Deterministic for a fixed config seed.
    """
    if len(dataset) < 2:
        raise ConfigError("training needs at least two scenes to draw negatives")
    params = init_model_params(config) if initial_params is None else initial_params
    cluster_cfg = cluster_config_from(config)
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 0x7472616E]))
    pdict = params.to_dict()
    state = init_optimizer(pdict, learning_rate=config.learning_rate)
    log: List[TrainLogRow] = []
    for it in range(config.train_iterations):
        indices = rng.integers(0, len(dataset), size=config.batch_size)
        batch = make_batch(dataset, indices, seed=int(rng.integers(2 ** 63)))
        loss, bundle, pos, neg = backward(batch, params, cluster_cfg,
                                          config.margin, config.pairing)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"loss diverged at iteration {it}", iteration=it)
        pdict, state = optimizer_step(pdict, bundle.trainable(), state)
        params = params.replace_arrays(pdict)
        log.append(TrainLogRow(iteration=it, loss=loss,
                               pos_score_mean=float(np.mean(pos)),
                               neg_score_mean=float(np.mean(neg))))
    return TrainResult(params=params, log=log)
