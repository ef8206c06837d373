"""Trainable parameter container and the cross-modal forward pass.

A model is two patch encoders (visual and audio; the audio encoder also
embeds negative clips) plus the shared projection bank. The forward pass
encodes each grid, clusters both modalities with the shared bank, and
scores matched center pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusterConfig, ProjectionBank, forward_unrolled
from .encoder import EncoderParams, encode_batch, init_encoder_params
from .exceptions import ShapeError

PARAM_BLOCKS = (
    "visual_encoder.weight",
    "visual_encoder.bias",
    "audio_encoder.weight",
    "audio_encoder.bias",
    "projections",
)


@dataclass
class ModelParams:
    """All trainable arrays: two encoders and the (k, m, n) projection bank."""

    visual_encoder: EncoderParams
    audio_encoder: EncoderParams
    projections: np.ndarray

    def __post_init__(self):
        self.projections = np.asarray(self.projections, dtype=np.float64)
        if self.projections.ndim != 3:
            raise ShapeError(f"projections must be (k, m, n), got {self.projections.shape}")
        n = self.projections.shape[2]
        for enc, name in ((self.visual_encoder, "visual"), (self.audio_encoder, "audio")):
            if enc.out_dim != n:
                raise ShapeError(
                    f"{name} encoder emits {enc.out_dim}-dim features but projections expect {n}"
                )

    @property
    def bank(self) -> ProjectionBank:
        return ProjectionBank(self.projections)

    def to_dict(self) -> dict:
        return {
            "visual_encoder.weight": self.visual_encoder.weight,
            "visual_encoder.bias": self.visual_encoder.bias,
            "audio_encoder.weight": self.audio_encoder.weight,
            "audio_encoder.bias": self.audio_encoder.bias,
            "projections": self.projections,
        }

    def replace_arrays(self, blocks: dict) -> "ModelParams":
        ve = self.visual_encoder
        ae = self.audio_encoder
        return ModelParams(
            visual_encoder=EncoderParams(ve.patch_shape, blocks["visual_encoder.weight"],
                                         blocks["visual_encoder.bias"], ve.activation),
            audio_encoder=EncoderParams(ae.patch_shape, blocks["audio_encoder.weight"],
                                        blocks["audio_encoder.bias"], ae.activation),
            projections=blocks["projections"],
        )


def init_model_params(config, seed=None) -> ModelParams:
    """Seeded init: encoders uniform [-a, a] with a = sqrt(1/fan_in); the
    projection bank likewise with fan-in n, one independent draw per cluster."""
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6D6F64]))
    n, m, k = config.feature_dim, config.center_dim, config.clusters
    visual = init_encoder_params(rng, (config.visual_patch, config.visual_patch),
                                 config.visual_channels, n)
    audio = init_encoder_params(rng, (config.audio_patch_frames, config.audio_patch_bins), 1, n)
    a = np.sqrt(1.0 / n)
    projections = rng.uniform(-a, a, size=(k, m, n))
    return ModelParams(visual_encoder=visual, audio_encoder=audio, projections=projections)


def cluster_config_from(config) -> ClusterConfig:
    return ClusterConfig(clusters=config.clusters, iterations=config.cluster_iterations,
                         smoothing=config.smoothing)


def grids_from_batch(batch):
    """Stack a MatchBatch into (visual, audio, negative-audio) grid batches.

    Visual grids come out (B, H, W, C); audio grids get a trailing channel
    axis, (B, frames, bins, 1).
    """
    visual = np.stack([p.visual for p in batch.positives])
    audio = np.stack([p.audio for p in batch.positives])[..., None]
    negative = np.stack([s.audio for s in batch.negatives])[..., None]
    return visual, audio, negative


@dataclass
class ModalityForward:
    """Per-modality forward intermediates kept for the backward pass."""

    features: np.ndarray  # (B, count, n)
    patches: np.ndarray  # (B, count, patch_dim)
    grid_shape: tuple
    assignments: np.ndarray  # (B, count, k)
    centers: np.ndarray  # (B, k, m)
    distances: np.ndarray  # (B, count, k)
    tape: object = None


def encode_and_cluster(grids: np.ndarray, encoder: EncoderParams, projections: np.ndarray,
                       cluster_cfg: ClusterConfig, record: bool = False) -> ModalityForward:
    features, patches, grid_shape = encode_batch(grids, encoder)
    s, c, d, tape = forward_unrolled(features, projections, cluster_cfg.smoothing,
                                     cluster_cfg.iterations, record=record)
    return ModalityForward(features=features, patches=patches, grid_shape=grid_shape,
                           assignments=s, centers=c, distances=d, tape=tape)


def forward_batch(batch, params: ModelParams, cluster_cfg: ClusterConfig,
                  record: bool = False):
    """Encode and cluster all three streams of a MatchBatch."""
    visual_grids, audio_grids, neg_grids = grids_from_batch(batch)
    visual = encode_and_cluster(visual_grids, params.visual_encoder, params.projections,
                                cluster_cfg, record)
    audio = encode_and_cluster(audio_grids, params.audio_encoder, params.projections,
                               cluster_cfg, record)
    negative = encode_and_cluster(neg_grids, params.audio_encoder, params.projections,
                                  cluster_cfg, record)
    return visual, audio, negative
