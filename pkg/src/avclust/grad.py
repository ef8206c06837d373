"""Hand-written reverse-mode gradients of the margin loss.

The loss is differentiated through every unrolled clustering round (the
softmax assignments' dependence on earlier centers included), the center
normalization (exact sphere-projection Jacobian), the shared projections,
and the patch encoders. A central-difference checker validates the whole
chain block by block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .clustering import UnrollTape, forward_unrolled
from .encoder import encoder_backward_batch
from .exceptions import GradCheckResampleError, TrainingDivergedError
from .losses import margin_loss_batch
from .model import ModelParams, forward_batch

# Relative-error floor: |a - n| / max(|a|, |n|, REL_FLOOR).
REL_FLOOR = 1e-8


def clustering_backward(grad_centers: Optional[np.ndarray], grad_distances: Optional[np.ndarray],
                        tape: UnrollTape, features: np.ndarray, projections: np.ndarray,
                        z: float):
    """Backprop through the unrolled rounds.

    ``grad_centers`` (B, k, m) and ``grad_distances`` (B, p, k) are the
    upstream gradients on the final state. Returns (g_features, g_projections).
    """
    V = tape.projected
    B, k, p, m = V.shape
    g_V = np.zeros_like(V)
    g_d = np.zeros((B, p, k)) if grad_distances is None else np.array(grad_distances, dtype=np.float64)
    last = len(tape.steps) - 1
    for r in range(last, -1, -1):
        s, unit, norms = tape.steps[r]
        g_d_t = np.transpose(g_d, (0, 2, 1))  # (B, k, p)
        # d_r[b,i,j] = -<V[b,j,i], unit[b,j]>
        g_unit = -np.matmul(g_d_t[:, :, None, :], V)[:, :, 0, :]
        g_V -= g_d_t[..., None] * unit[:, :, None, :]
        # unit = c/||c||: project out the radial component
        g_c = (g_unit - np.sum(unit * g_unit, axis=2, keepdims=True) * unit) / norms[:, :, None]
        if r == last and grad_centers is not None:
            g_c = g_c + grad_centers
        # c[b,j] = sum_i s[b,i,j] V[b,j,i]
        g_s = np.matmul(V, g_c[..., None])[..., 0].transpose(0, 2, 1)
        g_V += np.transpose(s, (0, 2, 1))[..., None] * g_c[:, :, None, :]
        # s = softmax(-z * d_prev) over j
        g_logits = s * (g_s - np.sum(s * g_s, axis=2, keepdims=True))
        g_d = -z * g_logits
    # g_d now sits on the identically-zero initial distances: discard.
    g_features = np.matmul(g_V, projections[None]).sum(axis=1)
    g_projections = np.transpose(g_V, (1, 3, 0, 2)).reshape(k, m, B * p) @ \
        features.reshape(B * p, -1)
    return g_features, g_projections


def clustering_loss(audio_features: np.ndarray, visual_features: np.ndarray,
                    negative_features: np.ndarray, projections: np.ndarray,
                    cluster_cfg, margin: float, pairing: str = "same_index"):
    """Mean margin loss of a feature-level batch (no encoders involved)."""
    z, T = cluster_cfg.smoothing, cluster_cfg.iterations
    _, ca, _, _ = forward_unrolled(audio_features, projections, z, T)
    _, cv, _, _ = forward_unrolled(visual_features, projections, z, T)
    _, cn, _, _ = forward_unrolled(negative_features, projections, z, T)
    losses, pos, neg, _, _, _ = margin_loss_batch(ca, cv, cn, margin, pairing)
    return float(np.mean(losses)), pos, neg


def clustering_loss_backward(audio_features: np.ndarray, visual_features: np.ndarray,
                             negative_features: np.ndarray, projections: np.ndarray,
                             cluster_cfg, margin: float, pairing: str = "same_index",
                             freeze_visual: bool = False):
    """Gradients of the mean margin loss w.r.t. features and projections."""
    z, T = cluster_cfg.smoothing, cluster_cfg.iterations
    _, ca, _, tape_a = forward_unrolled(audio_features, projections, z, T, record=True)
    _, cv, _, tape_v = forward_unrolled(visual_features, projections, z, T, record=True)
    _, cn, _, tape_n = forward_unrolled(negative_features, projections, z, T, record=True)
    losses, pos, neg, g_ca, g_cv, g_cn = margin_loss_batch(ca, cv, cn, margin, pairing)
    scale = 1.0 / audio_features.shape[0]
    g_Ua, g_Wa = clustering_backward(scale * g_ca, None, tape_a, audio_features, projections, z)
    g_Un, g_Wn = clustering_backward(scale * g_cn, None, tape_n, negative_features, projections, z)
    if freeze_visual:
        g_Uv = np.zeros_like(visual_features)
        g_Wv = np.zeros_like(projections)
    else:
        g_Uv, g_Wv = clustering_backward(scale * g_cv, None, tape_v, visual_features,
                                         projections, z)
    return (float(np.mean(losses)), pos, neg,
            g_Ua, g_Uv, g_Un, g_Wa + g_Wv + g_Wn)


@dataclass
class GradientBundle:
    """Gradient of the mean batch loss for every differentiable input.

    Trainable blocks mirror ModelParams; the feature gradients are with
    respect to the encoder outputs feeding each clustering run.
    """

    projections: np.ndarray
    visual_weight: np.ndarray
    visual_bias: np.ndarray
    audio_weight: np.ndarray
    audio_bias: np.ndarray
    visual_features: np.ndarray
    audio_features: np.ndarray
    negative_features: np.ndarray

    def trainable(self) -> dict:
        return {
            "visual_encoder.weight": self.visual_weight,
            "visual_encoder.bias": self.visual_bias,
            "audio_encoder.weight": self.audio_weight,
            "audio_encoder.bias": self.audio_bias,
            "projections": self.projections,
        }

    def finite(self) -> bool:
        return all(np.all(np.isfinite(block)) for block in
                   list(self.trainable().values())
                   + [self.visual_features, self.audio_features, self.negative_features])


def batch_loss(batch, params: ModelParams, cluster_cfg, margin: float,
               pairing: str = "same_index"):
    """Forward-only mean loss over a MatchBatch; returns (loss, pos, neg scores)."""
    visual, audio, negative = forward_batch(batch, params, cluster_cfg)
    losses, pos, neg, _, _, _ = margin_loss_batch(audio.centers, visual.centers,
                                                  negative.centers, margin, pairing)
    return float(np.mean(losses)), pos, neg


def backward(batch, params: ModelParams, cluster_cfg, margin: float,
             pairing: str = "same_index", freeze_visual: bool = False):
    """Mean batch loss and its gradient w.r.t. every trainable parameter.

    Gradients flow through all clustering rounds (full unroll). With
    ``freeze_visual`` the visual centers are treated as constants, an
    audio-only diagnostic mode.
    """
    visual, audio, negative = forward_batch(batch, params, cluster_cfg, record=True)
    losses, pos, neg, g_ca, g_cv, g_cn = margin_loss_batch(
        audio.centers, visual.centers, negative.centers, margin, pairing)
    z = cluster_cfg.smoothing
    scale = 1.0 / len(batch.positives)
    g_Ua, g_Wa = clustering_backward(scale * g_ca, None, audio.tape, audio.features,
                                     params.projections, z)
    g_Un, g_Wn = clustering_backward(scale * g_cn, None, negative.tape, negative.features,
                                     params.projections, z)
    if freeze_visual:
        g_Uv = np.zeros_like(visual.features)
        g_Wv = np.zeros_like(params.projections)
        vis_grads_weight = np.zeros_like(params.visual_encoder.weight)
        vis_grads_bias = np.zeros_like(params.visual_encoder.bias)
    else:
        g_Uv, g_Wv = clustering_backward(scale * g_cv, None, visual.tape, visual.features,
                                         params.projections, z)
        vis = encoder_backward_batch(g_Uv, params.visual_encoder, visual.features,
                                     visual.patches)
        vis_grads_weight, vis_grads_bias = vis.weight, vis.bias
    aud_pos = encoder_backward_batch(g_Ua, params.audio_encoder, audio.features, audio.patches)
    aud_neg = encoder_backward_batch(g_Un, params.audio_encoder, negative.features,
                                     negative.patches)
    bundle = GradientBundle(
        projections=g_Wa + g_Wv + g_Wn,
        visual_weight=vis_grads_weight,
        visual_bias=vis_grads_bias,
        audio_weight=aud_pos.weight + aud_neg.weight,
        audio_bias=aud_pos.bias + aud_neg.bias,
        visual_features=g_Uv,
        audio_features=g_Ua,
        negative_features=g_Un,
    )
    return float(np.mean(losses)), bundle, pos, neg


@dataclass
class GradCheckReport:
    """Max relative error across all checked blocks, plus per-block detail."""

    max_rel_error: float
    block_errors: list
    step: float

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_rel_error < tolerance


def finite_difference_check(loss_fn, arrays: dict, analytic: dict, h: float,
                            rng: np.random.Generator, min_coords: int = 200) -> GradCheckReport:
    """Central differences (f(x+h) - f(x-h)) / 2h on a coordinate subsample.

    ``arrays`` are mutated in place coordinate by coordinate and restored;
    ``loss_fn`` must read them afresh on every call.
    """
    block_errors = []
    for name, arr in arrays.items():
        grad = analytic[name]
        size = arr.size
        if size <= min_coords:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=min_coords, replace=False)
        worst = 0.0
        flat = arr.reshape(-1)
        for idx in coords:
            original = flat[idx]
            flat[idx] = original + h
            f_plus = loss_fn()
            flat[idx] = original - h
            f_minus = loss_fn()
            flat[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(grad.reshape(-1)[idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), REL_FLOOR)
            worst = max(worst, rel)
        block_errors.append((name, worst))
    return GradCheckReport(max_rel_error=max(e for _, e in block_errors),
                           block_errors=block_errors, step=h)


def hinge_slacks(batch, params: ModelParams, cluster_cfg, margin: float,
                 pairing: str = "same_index") -> np.ndarray:
    """Signed distances of every hinge argument from its kink."""
    visual, audio, negative = forward_batch(batch, params, cluster_cfg)
    _, pos, neg, _, _, _ = margin_loss_batch(audio.centers, visual.centers, negative.centers,
                                             margin, pairing)
    if pairing == "same_index":
        return (neg - pos + margin).ravel()
    # all_pairs: recompute the full mismatched-score matrix
    un = negative.centers / np.linalg.norm(negative.centers, axis=2, keepdims=True)
    uv = visual.centers / np.linalg.norm(visual.centers, axis=2, keepdims=True)
    S = np.einsum("bjm,bim->bij", un, uv)
    k = S.shape[-1]
    t = S - pos[:, :, None] + margin
    mask = ~np.eye(k, dtype=bool)
    return t[:, mask].ravel()


def grad_check(params: ModelParams, batch, cluster_cfg, margin: float,
               pairing: str = "same_index", h: float = 1e-5, seed: int = 0,
               min_coords: int = 200, kink_tolerance: float = 1e-6,
               corrupt_block: Optional[str] = None) -> GradCheckReport:
    """Check the analytic gradients of the mean batch loss against central
    differences, block by block.

    Trainable blocks are perturbed through the full model; the feature
    blocks re-enter at the clustering stage with the encoders held fixed.
    Raises GradCheckResampleError if any hinge sits within
    ``kink_tolerance`` of its kink (the loss is not differentiable there).
    ``corrupt_block`` deliberately damages one analytic block (fault
    injection hook for tests).
    """
    slacks = hinge_slacks(batch, params, cluster_cfg, margin, pairing)
    if np.any(np.abs(slacks) < kink_tolerance):
        raise GradCheckResampleError(
            f"a hinge sits within {kink_tolerance:g} of its kink; resample the batch")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x67636B]))
    loss, bundle, _, _ = backward(batch, params, cluster_cfg, margin, pairing)
    if not bundle.finite():
        raise TrainingDivergedError("non-finite analytic gradient in grad check")

    arrays = params.to_dict()
    analytic = dict(bundle.trainable())

    visual, audio, negative = forward_batch(batch, params, cluster_cfg)
    feats = {
        "features.audio": audio.features.copy(),
        "features.visual": visual.features.copy(),
        "features.negative": negative.features.copy(),
    }
    feat_analytic = {
        "features.audio": bundle.audio_features,
        "features.visual": bundle.visual_features,
        "features.negative": bundle.negative_features,
    }
    if corrupt_block is not None:
        target = analytic if corrupt_block in analytic else feat_analytic
        target[corrupt_block] = target[corrupt_block].copy()
        target[corrupt_block].reshape(-1)[0] += 1.0

    def model_loss():
        value, _, _ = batch_loss(batch, params, cluster_cfg, margin, pairing)
        return value

    def feature_loss():
        value, _, _ = clustering_loss(feats["features.audio"], feats["features.visual"],
                                      feats["features.negative"], params.projections,
                                      cluster_cfg, margin, pairing)
        return value

    report_params = finite_difference_check(model_loss, arrays, analytic, h, rng, min_coords)
    report_feats = finite_difference_check(feature_loss, feats, feat_analytic, h, rng, min_coords)
    blocks = report_params.block_errors + report_feats.block_errors
    return GradCheckReport(max_rel_error=max(e for _, e in blocks), block_errors=blocks, step=h)
