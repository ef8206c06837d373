"""scikit-learn style facades over the functional core.

``SmoothAssignmentClustering`` exposes the per-modality clustering as a
fit/transform/predict estimator, so it composes with pipelines and
``clone``. ``CrossModalCorrespondence`` wraps the full trainable model:
``fit`` runs the max-margin training loop, ``score`` reports match
accuracy on held-out scenes.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .clustering import (ClusterConfig, FeatureSet, ProjectionBank, compute_distances,
                         run_clustering, update_assignments)
from .config import RunConfig
from .evaluate import evaluate_localization, localize_scene, match_accuracy, model_score_fn
from .training import train
from .validation import as_float_array


class SmoothAssignmentClustering(ClusterMixin, TransformerMixin, BaseEstimator):
    """Soft clustering by unrolled smooth-min updates.

    Parameters
    ----------
    n_clusters : number of centers.
    n_iterations : alternating update rounds.
    smoothing : softness magnitude; larger values approach hard assignment.
    projections : optional (k, m, n) per-cluster projection stack; identity
        projections of the input dimension are used when omitted.

    After ``fit``: ``centers_`` (k, m), ``assignments_`` (row-stochastic),
    ``distances_``, and ``labels_`` (assignment argmax).
    """

    def __init__(self, n_clusters=2, n_iterations=3, smoothing=1.0, projections=None):
        self.n_clusters = n_clusters
        self.n_iterations = n_iterations
        self.smoothing = smoothing
        self.projections = projections

    def _bank(self, n_features: int) -> ProjectionBank:
        if self.projections is None:
            return ProjectionBank.identity(self.n_clusters, n_features)
        return ProjectionBank(np.asarray(self.projections, dtype=np.float64))

    def _config(self) -> ClusterConfig:
        return ClusterConfig(clusters=self.n_clusters, iterations=self.n_iterations,
                             smoothing=self.smoothing)

    def fit(self, X, y=None):
        X = as_float_array(X, "X", ndim=2)
        features = FeatureSet(X, (X.shape[0], 1))
        bank = self._bank(X.shape[1])
        state = run_clustering(features, bank, self._config())
        self.bank_ = bank
        self.centers_ = state.centers
        self.assignments_ = state.assignments
        self.distances_ = state.distances
        self.labels_ = np.argmax(state.assignments, axis=1)
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "centers_"):
            raise NotFittedError("call fit before transform/predict")

    def transform(self, X):
        """Soft assignments of ``X`` against the fitted centers."""
        self._check_fitted()
        X = as_float_array(X, "X", ndim=2)
        d = compute_distances(FeatureSet(X, (X.shape[0], 1)), self.bank_, self.centers_)
        return update_assignments(d, float(self.smoothing))

    def predict(self, X):
        return np.argmax(self.transform(X), axis=1)


class CrossModalCorrespondence(BaseEstimator):
    """Trainable audiovisual correspondence model.

    ``fit`` expects a sequence of ScenePair objects (see ``avclust.synth``);
    grid geometry is read off the first scene. ``score`` returns match
    accuracy, ``localization_report`` the full localization metrics.
    """

    def __init__(self, clusters=2, cluster_iterations=3, smoothing=1.0,
                 feature_dim=32, center_dim=32, visual_patch=4,
                 audio_patch_frames=4, audio_patch_bins=4, margin=0.5,
                 learning_rate=1e-4, batch_size=16, train_iterations=4000,
                 pairing="same_index", eval_threshold=0.5, localize_threshold=0.7,
                 auc_step=0.05, seed=0):
        self.clusters = clusters
        self.cluster_iterations = cluster_iterations
        self.smoothing = smoothing
        self.feature_dim = feature_dim
        self.center_dim = center_dim
        self.visual_patch = visual_patch
        self.audio_patch_frames = audio_patch_frames
        self.audio_patch_bins = audio_patch_bins
        self.margin = margin
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.train_iterations = train_iterations
        self.pairing = pairing
        self.eval_threshold = eval_threshold
        self.localize_threshold = localize_threshold
        self.auc_step = auc_step
        self.seed = seed

    def _run_config(self, scenes) -> RunConfig:
        first = scenes[0]
        H, W, C = first.visual.shape
        frames, bins = first.audio.shape
        overrides = {f.name: getattr(self, f.name) for f in dataclasses.fields(RunConfig)
                     if hasattr(self, f.name)}
        return RunConfig(visual_height=H, visual_width=W, visual_channels=C,
                         audio_frames=frames, audio_bins=bins, **overrides).validate()

    def fit(self, scenes, y=None):
        if len(scenes) < 2:
            raise ValueError("need at least two scenes to train")
        config = self._run_config(scenes)
        result = train(list(scenes), config)
        self.config_ = config
        self.params_ = result.params
        self.log_ = result.log
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before using the model")

    def score(self, scenes, y=None):
        """Match accuracy: fraction of scenes whose true audio wins."""
        self._check_fitted()
        return match_accuracy(list(scenes), model_score_fn(self.params_, self.config_),
                              seed=self.config_.seed)

    def localize(self, scene):
        self._check_fitted()
        return localize_scene(self.params_, scene, self.config_)

    def localization_report(self, scenes):
        self._check_fitted()
        return evaluate_localization(self.params_, list(scenes), self.config_)
