"""Differentiable audiovisual soft-clustering toolkit.

Feature grids from two modalities are clustered by unrolled smooth-min
updates through a shared bank of per-cluster projections; matched centers
are trained cross-modally with a max-margin loss, and the resulting soft
assignments localize sound sources on the visual grid.
"""

from .clustering import (ClusterConfig, ClusterState, FeatureSet, ObjectiveValue,
                         ProjectionBank, compute_distances, init_state, objective,
                         run_clustering, update_assignments, update_centers)
from .config import RunConfig, load_config, parse_config
from .encoder import EncoderParams, encode, encoder_backward, init_encoder_params
from .estimators import CrossModalCorrespondence, SmoothAssignmentClustering
from .evaluate import (Heatmap, LocalizationReport, auc_over_threshold, binarize,
                       evaluate_localization, iou, localize, match_accuracy)
from .exceptions import (ConfigError, DegenerateVectorError, GradCheckResampleError,
                         ShapeError, TrainingDivergedError)
from .grad import GradCheckReport, GradientBundle, backward, grad_check
from .losses import center_scores, margin_loss
from .model import ModelParams, init_model_params
from .numerics import cosine_similarity, l2_normalize, smooth_max, smooth_min, softmax
from .synth import (ComponentSignature, MatchBatch, SceneGenerator, ScenePair, SceneSpec,
                    generate_pair, make_batch)
from .training import OptimizerState, TrainResult, init_optimizer, optimizer_step, train

__version__ = "0.1.0"

__all__ = [
    "ClusterConfig", "ClusterState", "FeatureSet", "ObjectiveValue", "ProjectionBank",
    "compute_distances", "init_state", "objective", "run_clustering",
    "update_assignments", "update_centers",
    "RunConfig", "load_config", "parse_config",
    "EncoderParams", "encode", "encoder_backward", "init_encoder_params",
    "CrossModalCorrespondence", "SmoothAssignmentClustering",
    "Heatmap", "LocalizationReport", "auc_over_threshold", "binarize",
    "evaluate_localization", "iou", "localize", "match_accuracy",
    "ConfigError", "DegenerateVectorError", "GradCheckResampleError", "ShapeError",
    "TrainingDivergedError",
    "GradCheckReport", "GradientBundle", "backward", "grad_check",
    "center_scores", "margin_loss",
    "ModelParams", "init_model_params",
    "cosine_similarity", "l2_normalize", "smooth_max", "smooth_min", "softmax",
    "ComponentSignature", "MatchBatch", "SceneGenerator", "ScenePair", "SceneSpec",
    "generate_pair", "make_batch",
    "OptimizerState", "TrainResult", "init_optimizer", "optimizer_step", "train",
]
