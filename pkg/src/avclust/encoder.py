"""Patch encoders mapping raw grids to feature sets.

A grid is cut into non-overlapping patches (row-major), each patch is
flattened, linearly projected, and passed through tanh. Visual grids are
(H, W, C) with values in [-1, 1]; audio grids are (frames, bins) and are
treated as single-channel. The patch layout fixes FeatureSet.grid_shape,
so assignments can be mapped back onto the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import FeatureSet
from .exceptions import ShapeError
from .validation import as_float_array

ACTIVATIONS = ("tanh", "identity")


@dataclass
class EncoderParams:
    """Linear patch projection plus a fixed odd bounded nonlinearity."""

    patch_shape: tuple  # (patch_rows, patch_cols)
    weight: np.ndarray  # (n, patch_rows * patch_cols * channels)
    bias: np.ndarray  # (n,)
    activation: str = "tanh"

    def __post_init__(self):
        self.patch_shape = (int(self.patch_shape[0]), int(self.patch_shape[1]))
        self.weight = as_float_array(self.weight, "encoder weight", ndim=2)
        self.bias = as_float_array(self.bias, "encoder bias", ndim=1)
        if self.bias.shape[0] != self.weight.shape[0]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} does not match output dim {self.weight.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def patch_dim(self) -> int:
        return self.weight.shape[1]


@dataclass
class EncoderGrads:
    weight: np.ndarray
    bias: np.ndarray


def init_encoder_params(rng: np.random.Generator, patch_shape, channels: int,
                        out_dim: int, activation: str = "tanh") -> EncoderParams:
    """Uniform [-a, a] init with a = sqrt(1/fan_in)."""
    ph, pw = int(patch_shape[0]), int(patch_shape[1])
    fan_in = ph * pw * int(channels)
    a = np.sqrt(1.0 / fan_in)
    weight = rng.uniform(-a, a, size=(int(out_dim), fan_in))
    bias = rng.uniform(-a, a, size=int(out_dim))
    return EncoderParams(patch_shape=(ph, pw), weight=weight, bias=bias, activation=activation)


def _as_batched_grids(grid: np.ndarray):
    """Normalize to (B, H, W, C); returns (array, had_batch_axis, modality)."""
    arr = np.asarray(grid, dtype=np.float64)
    if arr.ndim == 2:  # one audio grid
        return arr[None, :, :, None], False, "audio"
    if arr.ndim == 3:  # one visual grid, or a batch of audio grids
        # Heuristic-free: a single visual grid is (H, W, C); batched audio
        # callers use extract_patches_batch directly with an explicit channel axis.
        return arr[None], False, "visual"
    if arr.ndim == 4:
        return arr, True, "visual"
    raise ShapeError(f"expected a 2-D audio grid or 3-D visual grid, got shape {arr.shape}")


def extract_patches_batch(grids: np.ndarray, patch_shape) -> tuple:
    """Flatten non-overlapping patches row-major.

    ``grids`` is (B, H, W, C); returns ((B, count, patch_dim) array, grid_shape).
    """
    B, H, W, C = grids.shape
    ph, pw = patch_shape
    if H % ph != 0 or W % pw != 0:
        raise ShapeError(f"grid {H}x{W} is not divisible by patches {ph}x{pw}")
    gr, gc = H // ph, W // pw
    patches = grids.reshape(B, gr, ph, gc, pw, C)
    patches = patches.transpose(0, 1, 3, 2, 4, 5).reshape(B, gr * gc, ph * pw * C)
    return patches, (gr, gc)


def encode_batch(grids: np.ndarray, params: EncoderParams):
    """Forward pass on a (B, H, W, C) batch; returns (features, patches, grid_shape)."""
    patches, grid_shape = extract_patches_batch(grids, params.patch_shape)
    if patches.shape[2] != params.patch_dim:
        raise ShapeError(
            f"patch dim {patches.shape[2]} does not match encoder fan-in {params.patch_dim}"
        )
    pre = patches @ params.weight.T + params.bias
    features = np.tanh(pre) if params.activation == "tanh" else pre
    return features, patches, grid_shape


def encode(grid: np.ndarray, params: EncoderParams) -> FeatureSet:
    """Encode one raw grid into a FeatureSet (2-D input means audio)."""
    batched, _, modality = _as_batched_grids(grid)
    features, _, grid_shape = encode_batch(batched, params)
    return FeatureSet(vectors=features[0], grid_shape=grid_shape, modality=modality)


def encoder_backward_batch(upstream: np.ndarray, params: EncoderParams,
                           features: np.ndarray, patches: np.ndarray) -> EncoderGrads:
    """Gradients of the encoder parameters given d(loss)/d(features).

    Uses tanh' = 1 - tanh^2, so only the forward outputs are needed.
    """
    if upstream.shape != features.shape:
        raise ShapeError(
            f"upstream gradient shape {upstream.shape} does not match features {features.shape}"
        )
    if params.activation == "tanh":
        g_pre = upstream * (1.0 - features * features)
    else:
        g_pre = upstream
    g_weight = np.einsum("bpn,bpd->nd", g_pre, patches)
    g_bias = g_pre.sum(axis=(0, 1))
    return EncoderGrads(weight=g_weight, bias=g_bias)


def encoder_backward(upstream: np.ndarray, params: EncoderParams, grid: np.ndarray) -> EncoderGrads:
    """Single-grid convenience wrapper: rerun the forward, then backprop."""
    batched, _, _ = _as_batched_grids(grid)
    features, patches, _ = encode_batch(batched, params)
    upstream = as_float_array(upstream, "upstream gradient", ndim=2)
    return encoder_backward_batch(upstream[None], params, features, patches)
