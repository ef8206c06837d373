"""Sound localization and correspondence evaluation.

Localization follows the single-source protocol: pool the audio centers by
arithmetic mean, pick the visual center with the highest cosine proximity,
and reshape that center's assignment column back onto the visual grid as a
heatmap. Binarized heatmaps are scored against the planted masks with
plain IoU (the single-annotator reduction of consensus IoU), summarized as
success rates at fixed thresholds and as the area under the success curve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .clustering import ClusterConfig, FeatureSet, ProjectionBank, run_clustering
from .encoder import encode
from .exceptions import DegenerateVectorError, ShapeError
from .losses import center_scores
from .model import ModelParams, cluster_config_from
from .numerics import NORM_EPS


@dataclass
class Heatmap:
    """One cluster's assignment coefficients reshaped onto the feature grid."""

    values: np.ndarray  # (rows, cols), entries in [0, 1]


@dataclass
class SceneLocalization:
    """Per-scene localization output."""

    chosen_cluster: int
    scores: np.ndarray  # cosine proximity of pooled audio to each visual center
    heatmap: Heatmap
    mask: np.ndarray  # binarized heatmap at the configured threshold
    assignments: np.ndarray  # full (count, k) visual assignment matrix


@dataclass
class SceneEval:
    index: int
    chosen_cluster: int
    iou: float
    unrelated_iou: float


@dataclass
class LocalizationReport:
    """Dataset-level localization and correspondence metrics."""

    per_scene: List[SceneEval]
    ciou_at_0_5: float
    ciou_at_0_7: float
    auc: float
    match_accuracy: Optional[float] = None

    @property
    def ious(self) -> np.ndarray:
        return np.array([s.iou for s in self.per_scene])

    @property
    def unrelated_ious(self) -> np.ndarray:
        return np.array([s.unrelated_iou for s in self.per_scene])


def pool_audio_centers(centers: np.ndarray) -> np.ndarray:
    """Arithmetic mean over the k audio centers."""
    pooled = np.mean(np.asarray(centers, dtype=np.float64), axis=0)
    if np.linalg.norm(pooled) < NORM_EPS:
        raise DegenerateVectorError("pooled audio center is degenerate")
    return pooled


def select_visual_center(pooled_audio: np.ndarray, visual_centers: np.ndarray):
    """Index of the visual center with maximal cosine proximity (ties: lower index)."""
    scores = center_scores(np.broadcast_to(pooled_audio, visual_centers.shape),
                           visual_centers)
    return int(np.argmax(scores)), scores


def localize(audio_features: FeatureSet, visual_features: FeatureSet, bank: ProjectionBank,
             config: ClusterConfig, threshold: float = 0.7) -> SceneLocalization:
    """Cluster both modalities and return the chosen visual cluster's heatmap."""
    state_a = run_clustering(audio_features, bank, config)
    state_v = run_clustering(visual_features, bank, config)
    pooled = pool_audio_centers(state_a.centers)
    chosen, scores = select_visual_center(pooled, state_v.centers)
    values = state_v.assignments[:, chosen].reshape(visual_features.grid_shape)
    heatmap = Heatmap(values=values)
    return SceneLocalization(chosen_cluster=chosen, scores=scores, heatmap=heatmap,
                             mask=binarize(heatmap, threshold),
                             assignments=state_v.assignments)


def binarize(heatmap, threshold: float) -> np.ndarray:
    """Cell = 1 iff value >= threshold; threshold must lie in [0, 1]."""
    if not (0.0 <= float(threshold) <= 1.0):
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    values = heatmap.values if isinstance(heatmap, Heatmap) else np.asarray(heatmap)
    return (values >= float(threshold)).astype(np.uint8)


def iou(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection over union of two binary grids; empty pred scores 0."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"pred shape {pred.shape} does not match gt shape {gt.shape}")
    p = pred.astype(bool)
    g = gt.astype(bool)
    if not g.any():
        raise ValueError("ground-truth mask is empty")
    union = np.logical_or(p, g).sum()
    return float(np.logical_and(p, g).sum() / union)


def auc_over_threshold(samples, step: float = 0.05) -> float:
    """Area under the success curve: success(tau) = fraction of samples with
    value >= tau, integrated over tau in [0, 1] (trapezoid, both endpoints)."""
    values = np.asarray(samples, dtype=np.float64)
    if values.size == 0:
        raise ValueError("need at least one sample")
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ValueError("samples must lie in [0, 1]")
    steps = round(1.0 / step)
    if step <= 0 or abs(steps * step - 1.0) > 1e-9:
        raise ValueError("step must divide 1 evenly")
    taus = np.linspace(0.0, 1.0, steps + 1)
    success = np.array([np.mean(values >= t) for t in taus])
    return float(np.trapezoid(success, taus))


def match_accuracy(scenes, score_fn, seed: int) -> float:
    """Fraction of scenes whose true audio outscores one mismatched audio.

    ``score_fn(visual_scene, audio_scene)`` returns a scalar correspondence
    score; the mismatch index is drawn uniformly among the other scenes.
    """
    if len(scenes) < 2:
        raise ValueError("need at least two scenes to draw mismatches")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6D617463]))
    hits = 0
    for i, scene in enumerate(scenes):
        j = int(rng.integers(len(scenes) - 1))
        if j >= i:
            j += 1
        true_score = score_fn(scene, scene)
        wrong_score = score_fn(scene, scenes[j])
        hits += int(true_score > wrong_score)
    return hits / len(scenes)


def model_score_fn(params: ModelParams, config):
    """Correspondence scorer: mean per-index cosine of matched centers."""
    cluster_cfg = cluster_config_from(config)
    bank = params.bank

    def score(visual_scene, audio_scene) -> float:
        fv = encode(visual_scene.visual, params.visual_encoder)
        fa = encode(audio_scene.audio, params.audio_encoder)
        sv = run_clustering(fv, bank, cluster_cfg)
        sa = run_clustering(fa, bank, cluster_cfg)
        return float(np.mean(center_scores(sa.centers, sv.centers)))

    return score


def sounding_visual_mask(scene) -> np.ndarray:
    """Union of the visual masks of the scene's sounding components."""
    masks = [m for m, silent in zip(scene.visual_masks, scene.silent_flags) if not silent]
    if not masks:
        raise ValueError("scene has no sounding component")
    return np.logical_or.reduce(masks)


def localize_scene(params: ModelParams, scene, config) -> SceneLocalization:
    fv = encode(scene.visual, params.visual_encoder)
    fa = encode(scene.audio, params.audio_encoder)
    return localize(fa, fv, params.bank, cluster_config_from(config),
                    threshold=config.eval_threshold)


def evaluate_localization(params: ModelParams, scenes, config,
                          with_match_accuracy: bool = True) -> LocalizationReport:
    """Score every scene's chosen-cluster heatmap against the planted masks."""
    per_scene = []
    for i, scene in enumerate(scenes):
        loc = localize_scene(params, scene, config)
        gt = sounding_visual_mask(scene)
        chosen_iou = iou(loc.mask, gt)
        k = loc.assignments.shape[1]
        others = []
        for j in range(k):
            if j == loc.chosen_cluster:
                continue
            other_map = loc.assignments[:, j].reshape(loc.heatmap.values.shape)
            others.append(iou(binarize(other_map, config.eval_threshold), gt))
        unrelated = float(np.mean(others)) if others else 0.0
        per_scene.append(SceneEval(index=i, chosen_cluster=loc.chosen_cluster,
                                   iou=chosen_iou, unrelated_iou=unrelated))
    ious = np.array([s.iou for s in per_scene])
    accuracy = None
    if with_match_accuracy:
        accuracy = match_accuracy(scenes, model_score_fn(params, config), seed=config.seed)
    return LocalizationReport(
        per_scene=per_scene,
        ciou_at_0_5=float(np.mean(ious >= 0.5)),
        ciou_at_0_7=float(np.mean(ious >= 0.7)),
        auc=auc_over_threshold(ious, step=config.auc_step),
        match_accuracy=accuracy,
    )
