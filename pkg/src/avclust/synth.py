"""Synthetic paired audiovisual scenes with planted components and masks.

Each scene plants one to a few components. A component is a latent vector
that paints a rank-one pattern (outer product of latent projections) into
a disk of the visual grid and a rectangle of the audio grid, so the
cross-modal structure is linearly recoverable by construction. Ground
truth masks are recorded at patch resolution, matching the encoder's
feature grids. A scene may also gain a silent visual distractor: visible,
but contributing no audio energy.

Blob placement is tile-based: the grids are partitioned into disjoint
candidate sites, so planted components never overlap and the packing
capacity is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .exceptions import ConfigError

LATENT_COSINE_CAP = 0.3
_REJECTION_LIMIT = 1000


@dataclass
class SceneSpec:
    """Generator geometry and sampling knobs."""

    visual_height: int = 32
    visual_width: int = 32
    visual_channels: int = 3
    audio_frames: int = 48
    audio_bins: int = 16
    visual_patch: int = 4
    audio_patch_frames: int = 4
    audio_patch_bins: int = 4
    min_components: int = 1
    max_components: int = 3
    noise_sigma: float = 0.05
    latent_dim: int = 8
    amplitude_min: float = 0.5
    amplitude_max: float = 1.0
    visual_blob_radius: int = 4
    audio_span_frames: int = 12
    audio_span_bins: int = 6
    silent_prob: float = 0.3
    basis_seed: int = 7

    @classmethod
    def from_run_config(cls, config) -> "SceneSpec":
        return cls(
            visual_height=config.visual_height, visual_width=config.visual_width,
            visual_channels=config.visual_channels, audio_frames=config.audio_frames,
            audio_bins=config.audio_bins, visual_patch=config.visual_patch,
            audio_patch_frames=config.audio_patch_frames,
            audio_patch_bins=config.audio_patch_bins,
            min_components=config.min_components, max_components=config.max_components,
            noise_sigma=config.noise_sigma, latent_dim=config.latent_dim,
            amplitude_min=config.amplitude_min, amplitude_max=config.amplitude_max,
            visual_blob_radius=config.visual_blob_radius,
            audio_span_frames=config.audio_span_frames,
            audio_span_bins=config.audio_span_bins, silent_prob=config.silent_prob,
        )

    @property
    def visual_grid_shape(self):
        return (self.visual_height // self.visual_patch,
                self.visual_width // self.visual_patch)

    @property
    def audio_grid_shape(self):
        return (self.audio_frames // self.audio_patch_frames,
                self.audio_bins // self.audio_patch_bins)


@dataclass
class ComponentSignature:
    """One planted audiovisual source."""

    id: int
    latent: np.ndarray
    visual_blob: tuple  # (center_row, center_col, radius)
    audio_blob: tuple  # (frame_start, frame_stop, bin_start, bin_stop)
    amplitude: float


@dataclass
class ScenePair:
    """A visual grid and an audio grid with their planted components."""

    visual: np.ndarray  # (H, W, C) in [-1, 1]
    audio: np.ndarray  # (frames, bins) in [-1, 1]
    components: List[ComponentSignature]
    visual_masks: np.ndarray  # (n_components, grid_rows, grid_cols) bool
    audio_masks: np.ndarray
    silent_flags: List[bool]
    seed: int = 0


@dataclass
class MatchBatch:
    """Positive scene pairs plus, per positive, audio from a different scene."""

    positives: List[ScenePair]
    negatives: List[ScenePair]
    positive_indices: List[int] = field(default_factory=list)
    negative_indices: List[int] = field(default_factory=list)


def _orthonormal_columns(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q


class SceneGenerator:
    """Deterministic, seed-driven scene factory for one SceneSpec."""

    def __init__(self, spec: SceneSpec):
        self.spec = spec
        if spec.audio_span_frames < spec.latent_dim:
            raise ConfigError("audio_span_frames must be >= latent_dim")
        box = 2 * spec.visual_blob_radius + 1
        if box < spec.latent_dim:
            raise ConfigError("visual blob box (2*radius+1) must be >= latent_dim")
        self._box = box
        self._visual_tile = box + 1
        self._visual_sites = ((spec.visual_height // self._visual_tile)
                              * (spec.visual_width // self._visual_tile))
        self._audio_sites = ((spec.audio_frames // spec.audio_span_frames)
                             * (spec.audio_bins // spec.audio_span_bins))
        if self._visual_sites < 1 or self._audio_sites < 1:
            raise ConfigError("grids too small to place a single component")
        rng = np.random.default_rng(np.random.SeedSequence([int(spec.basis_seed), 0x626173]))
        L = spec.latent_dim
        # Patterns are rank-one and linear in the latent: the latent projects
        # onto one axis, the other axes carry fixed profiles. Orthonormal
        # columns make inner products of projected latents equal inner
        # products of the latents themselves, so cross-component correlations
        # are controlled exactly.
        self._audio_rows = _orthonormal_columns(rng, spec.audio_span_frames, L)
        self._audio_profile = rng.standard_normal(spec.audio_span_bins)
        self._visual_rows = _orthonormal_columns(rng, box, L)
        self._visual_col_profile = rng.standard_normal(box)
        self._visual_chan_profile = rng.standard_normal(spec.visual_channels)
        rr, cc = np.mgrid[0:box, 0:box]
        self._disk = ((rr - spec.visual_blob_radius) ** 2
                      + (cc - spec.visual_blob_radius) ** 2) <= spec.visual_blob_radius ** 2

    def audio_pattern(self, latent: np.ndarray) -> np.ndarray:
        """Unnormalized rank-one audio pattern: latent along time, fixed
        frequency profile."""
        return np.outer(self._audio_rows @ latent, self._audio_profile)

    def visual_pattern(self, latent: np.ndarray) -> np.ndarray:
        """Unnormalized rank-one visual pattern on the blob bounding box:
        latent along rows, fixed column and channel profiles."""
        pattern = np.einsum("r,c,h->rch", self._visual_rows @ latent,
                            self._visual_col_profile, self._visual_chan_profile)
        return pattern * self._disk[:, :, None]

    def _sample_latents(self, rng: np.random.Generator, count: int) -> np.ndarray:
        latents = []
        for _ in range(count):
            for _attempt in range(_REJECTION_LIMIT):
                v = rng.standard_normal(self.spec.latent_dim)
                v /= np.linalg.norm(v)
                if all(abs(float(v @ u)) < LATENT_COSINE_CAP for u in latents):
                    latents.append(v)
                    break
            else:
                raise ConfigError("could not sample pairwise-decorrelated latents")
        return np.array(latents)

    def generate_pair(self, seed: int) -> ScenePair:
        spec = self.spec
        rng = np.random.default_rng(int(seed))
        count = int(rng.integers(spec.min_components, spec.max_components + 1))
        silent_extra = 1 if (spec.silent_prob > 0 and rng.random() < spec.silent_prob) else 0
        total = count + silent_extra
        if total > self._visual_sites or total > self._audio_sites:
            raise ConfigError(
                f"{total} components exceed blob-packing capacity "
                f"({self._visual_sites} visual / {self._audio_sites} audio sites)")

        latents = self._sample_latents(rng, total)
        visual_site_ids = rng.choice(self._visual_sites, size=total, replace=False)
        audio_site_ids = rng.choice(self._audio_sites, size=total, replace=False)
        amplitudes = rng.uniform(spec.amplitude_min, spec.amplitude_max, size=total)

        visual = np.zeros((spec.visual_height, spec.visual_width, spec.visual_channels))
        audio = np.zeros((spec.audio_frames, spec.audio_bins))
        gvr, gvc = spec.visual_grid_shape
        gar, gac = spec.audio_grid_shape
        visual_masks = np.zeros((total, gvr, gvc), dtype=bool)
        audio_masks = np.zeros((total, gar, gac), dtype=bool)
        components = []
        silent_flags = []

        tiles_per_row = spec.visual_width // self._visual_tile
        audio_tiles_per_row = spec.audio_bins // spec.audio_span_bins
        R = spec.visual_blob_radius
        for c in range(total):
            silent = c >= count
            site = int(visual_site_ids[c])
            tile_r = (site // tiles_per_row) * self._visual_tile
            tile_c = (site % tiles_per_row) * self._visual_tile
            center = (tile_r + R, tile_c + R)
            asite = int(audio_site_ids[c])
            t0 = (asite // audio_tiles_per_row) * spec.audio_span_frames
            f0 = (asite % audio_tiles_per_row) * spec.audio_span_bins
            audio_blob = (t0, t0 + spec.audio_span_frames, f0, f0 + spec.audio_span_bins)

            vpat = self.visual_pattern(latents[c])
            peak = np.max(np.abs(vpat))
            if peak > 0:
                vpat = vpat * (amplitudes[c] / peak)
            r0, c0 = center[0] - R, center[1] - R
            visual[r0:r0 + self._box, c0:c0 + self._box, :] += vpat

            pixel_mask = np.zeros((spec.visual_height, spec.visual_width), dtype=bool)
            pixel_mask[r0:r0 + self._box, c0:c0 + self._box] = self._disk
            visual_masks[c] = pixel_mask.reshape(gvr, spec.visual_patch, gvc,
                                                 spec.visual_patch).any(axis=(1, 3))

            if not silent:
                apat = self.audio_pattern(latents[c])
                apeak = np.max(np.abs(apat))
                if apeak > 0:
                    apat = apat * (amplitudes[c] / apeak)
                audio[audio_blob[0]:audio_blob[1], audio_blob[2]:audio_blob[3]] += apat
                cell_mask = np.zeros((spec.audio_frames, spec.audio_bins), dtype=bool)
                cell_mask[audio_blob[0]:audio_blob[1], audio_blob[2]:audio_blob[3]] = True
                audio_masks[c] = cell_mask.reshape(gar, spec.audio_patch_frames, gac,
                                                   spec.audio_patch_bins).any(axis=(1, 3))

            components.append(ComponentSignature(
                id=c, latent=latents[c], visual_blob=(center[0], center[1], R),
                audio_blob=audio_blob, amplitude=float(amplitudes[c])))
            silent_flags.append(silent)

        if spec.noise_sigma > 0:
            visual += rng.normal(0.0, spec.noise_sigma, size=visual.shape)
            audio += rng.normal(0.0, spec.noise_sigma, size=audio.shape)
        np.clip(visual, -1.0, 1.0, out=visual)
        np.clip(audio, -1.0, 1.0, out=audio)
        return ScenePair(visual=visual, audio=audio, components=components,
                         visual_masks=visual_masks, audio_masks=audio_masks,
                         silent_flags=silent_flags, seed=int(seed))

    def generate_dataset(self, master_seed: int, count: int) -> List[ScenePair]:
        return [self.generate_pair(scene_seed(master_seed, i)) for i in range(count)]


def scene_seed(master_seed: int, index: int) -> int:
    """Per-scene seed derived from the dataset seed; plain and reproducible."""
    return (int(master_seed) * 1_000_003 + int(index)) % (2 ** 63)


def generate_pair(seed: int, spec: SceneSpec) -> ScenePair:
    """One-shot convenience wrapper around SceneGenerator."""
    return SceneGenerator(spec).generate_pair(seed)


def make_batch(dataset: List[ScenePair], indices, seed: int) -> MatchBatch:
    """Pair each chosen positive with a uniformly drawn different scene's audio."""
    if len(dataset) < 2:
        raise ConfigError("need at least two scenes to draw negatives")
    rng = np.random.default_rng(int(seed))
    positives, negatives, neg_idx = [], [], []
    indices = [int(i) for i in indices]
    for i in indices:
        if not 0 <= i < len(dataset):
            raise ConfigError(f"positive index {i} outside dataset of size {len(dataset)}")
        j = int(rng.integers(len(dataset) - 1))
        if j >= i:
            j += 1
        positives.append(dataset[i])
        negatives.append(dataset[j])
        neg_idx.append(j)
    return MatchBatch(positives=positives, negatives=negatives,
                      positive_indices=indices, negative_indices=neg_idx)
