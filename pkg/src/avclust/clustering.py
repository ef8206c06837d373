"""Smooth alternating clustering over one modality's feature vectors.

Each feature vector u_i is compared with cluster centers through a bank of
per-cluster projections W_j using the agreement distance

    d_ij = -<W_j u_i, c_j / ||c_j||>.

Starting from d = 0 the algorithm alternates, for a fixed number of rounds:
soft assignments s_ij = softmax_j(-z d_ij), centers c_j = sum_i s_ij W_j u_i,
then the distances above. The log-sum-exp smoothing makes the whole loop
differentiable, which is what the gradient module exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DegenerateVectorError, ShapeError
from .numerics import NORM_EPS, logsumexp, softmax
from .validation import as_float_array

MODALITIES = ("audio", "visual")


@dataclass
class FeatureSet:
    """Ordered feature vectors from one modality, with their grid layout.

    ``vectors`` is (count, dim); ``grid_shape`` = (rows, cols) must satisfy
    rows * cols == count so assignments can be reshaped back onto the grid.
    """

    vectors: np.ndarray
    grid_shape: tuple
    modality: str = "visual"

    def __post_init__(self):
        self.vectors = as_float_array(self.vectors, "feature vectors", ndim=2)
        rows, cols = (int(v) for v in self.grid_shape)
        self.grid_shape = (rows, cols)
        if rows < 1 or cols < 1 or rows * cols != self.count:
            raise ShapeError(
                f"grid_shape {self.grid_shape} does not tile {self.count} feature vectors"
            )
        if self.modality not in MODALITIES:
            raise ValueError(f"modality must be one of {MODALITIES}, got {self.modality!r}")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class ProjectionBank:
    """The k per-cluster projection matrices, stacked as one (k, m, n) array.

    The bank is shared across modalities; it both defines the per-cluster
    comparison spaces and carries the magnitude role of the smoothing knob.
    """

    matrices: np.ndarray

    def __post_init__(self):
        self.matrices = as_float_array(self.matrices, "projection matrices", ndim=3)

    @classmethod
    def identity(cls, k: int, n: int) -> "ProjectionBank":
        return cls(np.broadcast_to(np.eye(n), (k, n, n)).copy())

    @property
    def k(self) -> int:
        return self.matrices.shape[0]

    @property
    def m(self) -> int:
        return self.matrices.shape[1]

    @property
    def n(self) -> int:
        return self.matrices.shape[2]


@dataclass
class ClusterConfig:
    """Cluster count, number of alternating rounds, and smoothing magnitude."""

    clusters: int = 2
    iterations: int = 3
    smoothing: float = 1.0

    def __post_init__(self):
        if int(self.clusters) < 1:
            raise ValueError(f"clusters must be >= 1, got {self.clusters}")
        if int(self.iterations) < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not (float(self.smoothing) > 0.0 and math.isfinite(float(self.smoothing))):
            raise ValueError(f"smoothing must be positive, got {self.smoothing}")
        self.clusters = int(self.clusters)
        self.iterations = int(self.iterations)
        self.smoothing = float(self.smoothing)


@dataclass
class ClusterState:
    """Distances, row-stochastic assignments, and centers after ``iteration`` rounds."""

    distances: np.ndarray
    assignments: np.ndarray
    centers: Optional[np.ndarray]
    iteration: int = 0


@dataclass
class ObjectiveValue:
    """Smoothed clustering objective and its exact hard counterpart."""

    smooth: float
    hard: float


def _check_bank_features(features: FeatureSet, bank: ProjectionBank):
    if features.dim != bank.n:
        raise ShapeError(
            f"feature dimension {features.dim} does not match projection input dim {bank.n}"
        )


def init_state(features: FeatureSet, config: ClusterConfig) -> ClusterState:
    """Zero distances and the uniform assignments they induce; centers unset."""
    k = config.clusters
    d = np.zeros((features.count, k))
    return ClusterState(distances=d, assignments=softmax(-config.smoothing * d, axis=1),
                        centers=None, iteration=0)


def project_features(features: FeatureSet, bank: ProjectionBank) -> np.ndarray:
    """All per-cluster projections W_j u_i, shaped (k, count, m)."""
    _check_bank_features(features, bank)
    return np.einsum("pn,kmn->kpm", features.vectors, bank.matrices)


def _normalize_centers(centers: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(centers, axis=-1)
    bad = np.nonzero(norms < NORM_EPS)
    if bad[0].size:
        j = int(bad[-1][0])
        raise DegenerateVectorError(
            f"center {j} has norm {norms[bad][0]:.3e}, below the {NORM_EPS:.0e} guard", index=j
        )
    return centers / norms[..., None]


def compute_distances(features: FeatureSet, bank: ProjectionBank, centers: np.ndarray) -> np.ndarray:
    """Agreement distances d_ij = -<W_j u_i, c_j/||c_j||> as a (count, k) matrix."""
    centers = as_float_array(centers, "centers", ndim=2)
    if centers.shape != (bank.k, bank.m):
        raise ShapeError(f"centers have shape {centers.shape}, expected {(bank.k, bank.m)}")
    projected = project_features(features, bank)
    unit = _normalize_centers(centers)
    return -np.einsum("kpm,km->pk", projected, unit)


def update_assignments(distances: np.ndarray, z: float) -> np.ndarray:
    """Row-wise softmax of -z * distances."""
    distances = as_float_array(distances, "distances", ndim=2)
    if not (float(z) > 0.0 and math.isfinite(float(z))):
        raise ValueError(f"smoothing must be positive, got {z}")
    return softmax(-float(z) * distances, axis=1)


def update_centers(features: FeatureSet, bank: ProjectionBank, assignments: np.ndarray) -> np.ndarray:
    """Assignment-weighted sums c_j = sum_i s_ij W_j u_i, shaped (k, m)."""
    assignments = as_float_array(assignments, "assignments", ndim=2)
    if assignments.shape != (features.count, bank.k):
        raise ShapeError(
            f"assignments have shape {assignments.shape}, expected {(features.count, bank.k)}"
        )
    projected = project_features(features, bank)
    return np.einsum("pk,kpm->km", assignments, projected)


@dataclass
class UnrollTape:
    """Per-round intermediates recorded by the batched forward pass.

    ``steps`` holds (assignments, unit_centers, center_norms) per round;
    the gradient module replays them in reverse.
    """

    projected: np.ndarray  # (B, k, p, m)
    steps: list = field(default_factory=list)


def forward_unrolled(batch_features: np.ndarray, bank_matrices: np.ndarray, z: float,
                     iterations: int, record: bool = False):
    """Run the alternating updates on a (B, p, n) feature batch.

    Returns (assignments, centers, distances, tape): assignments are the ones
    that produced the final centers, distances are recomputed from those
    centers, mirroring the forward loop round for round.
    """
    U = np.asarray(batch_features, dtype=np.float64)
    W = np.asarray(bank_matrices, dtype=np.float64)
    B, p, _ = U.shape
    k = W.shape[0]
    # V[b,j,i] = W_j u_bi; matmul forms keep the hot loop on BLAS
    V = np.matmul(U[:, None], np.transpose(W, (0, 2, 1))[None])  # (B, k, p, m)
    tape = UnrollTape(projected=V) if record else None
    d = np.zeros((B, p, k))
    s = c = None
    for _ in range(int(iterations)):
        s = softmax(-z * d, axis=2)
        # c[b,j] = sum_i s[b,i,j] V[b,j,i]
        c = np.matmul(np.transpose(s, (0, 2, 1))[:, :, None, :], V)[:, :, 0, :]
        norms = np.linalg.norm(c, axis=2)
        bad = np.nonzero(norms < NORM_EPS)
        if bad[0].size:
            j = int(bad[1][0])
            raise DegenerateVectorError(
                f"center {j} collapsed to norm {norms[bad][0]:.3e} during clustering", index=j
            )
        unit = c / norms[:, :, None]
        # d[b,i,j] = -<V[b,j,i], unit[b,j]>
        d = -np.matmul(V, unit[..., None])[..., 0].transpose(0, 2, 1)
        if record:
            tape.steps.append((s, unit, norms))
    return s, c, d, tape


def run_clustering(features: FeatureSet, bank: ProjectionBank, config: ClusterConfig) -> ClusterState:
    """Run ``config.iterations`` alternating rounds and return the final state.

    Deterministic: identical inputs produce bitwise-identical state.
    """
    _check_bank_features(features, bank)
    if bank.k != config.clusters:
        raise ShapeError(f"projection bank holds {bank.k} matrices but config asks for "
                         f"{config.clusters} clusters")
    s, c, d, _ = forward_unrolled(features.vectors[None], bank.matrices,
                                  config.smoothing, config.iterations)
    return ClusterState(distances=d[0], assignments=s[0], centers=c[0],
                        iteration=config.iterations)


def objective(features: FeatureSet, bank: ProjectionBank, state: ClusterState,
              z: float) -> ObjectiveValue:
    """Smoothed objective -(1/z) sum_i log sum_j exp(-z d_ij) and the exact
    per-point-minimum objective on the same distance matrix."""
    d = as_float_array(state.distances, "distances", ndim=2)
    if d.shape != (features.count, bank.k):
        raise ShapeError(f"state distances have shape {d.shape}, expected "
                         f"{(features.count, bank.k)}")
    z = float(z)
    smooth = float(-np.sum(logsumexp(-z * d, axis=1)) / z)
    hard = float(np.sum(np.min(d, axis=1)))
    return ObjectiveValue(smooth=smooth, hard=hard)
