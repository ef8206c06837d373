"""Run configuration: every tunable with a documented default.

Config files are plain text, one ``key = value`` per line, ``#`` starts a
comment. Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .exceptions import ConfigError


@dataclass
class RunConfig:
    # seeding
    seed: int = 0
    # scene geometry
    visual_height: int = 32
    visual_width: int = 32
    visual_channels: int = 3
    audio_frames: int = 48
    audio_bins: int = 16
    visual_patch: int = 4
    audio_patch_frames: int = 4
    audio_patch_bins: int = 4
    # scene generator
    dataset_size: int = 2000
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
    # model
    feature_dim: int = 32
    center_dim: int = 32
    clusters: int = 2
    cluster_iterations: int = 3
    smoothing: float = 1.0
    # training
    margin: float = 0.5
    learning_rate: float = 1e-4
    batch_size: int = 16
    train_iterations: int = 4000
    pairing: str = "same_index"
    # evaluation
    eval_threshold: float = 0.5
    localize_threshold: float = 0.7
    auc_step: float = 0.05

    def validate(self) -> "RunConfig":
        c = self
        positive_ints = [
            ("visual_height", c.visual_height), ("visual_width", c.visual_width),
            ("visual_channels", c.visual_channels), ("audio_frames", c.audio_frames),
            ("audio_bins", c.audio_bins), ("visual_patch", c.visual_patch),
            ("audio_patch_frames", c.audio_patch_frames), ("audio_patch_bins", c.audio_patch_bins),
            ("min_components", c.min_components), ("max_components", c.max_components),
            ("latent_dim", c.latent_dim), ("visual_blob_radius", c.visual_blob_radius),
            ("audio_span_frames", c.audio_span_frames), ("audio_span_bins", c.audio_span_bins),
            ("feature_dim", c.feature_dim), ("center_dim", c.center_dim),
            ("clusters", c.clusters), ("cluster_iterations", c.cluster_iterations),
            ("batch_size", c.batch_size),
        ]
        for name, value in positive_ints:
            if int(value) < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if c.dataset_size < 0 or c.train_iterations < 0:
            raise ConfigError("dataset_size and train_iterations must be >= 0")
        if c.max_components < c.min_components:
            raise ConfigError("max_components must be >= min_components")
        if c.visual_height % c.visual_patch or c.visual_width % c.visual_patch:
            raise ConfigError("visual grid must be divisible by visual_patch")
        if c.audio_frames % c.audio_patch_frames or c.audio_bins % c.audio_patch_bins:
            raise ConfigError("audio grid must be divisible by the audio patch shape")
        if c.audio_span_frames < c.latent_dim:
            raise ConfigError("audio_span_frames must be >= latent_dim "
                              "(the span carries the latent projection)")
        if c.audio_span_frames > c.audio_frames or c.audio_span_bins > c.audio_bins:
            raise ConfigError("audio span must fit inside the audio grid")
        if 2 * c.visual_blob_radius + 2 > min(c.visual_height, c.visual_width):
            raise ConfigError("visual blob does not fit inside the visual grid")
        if not (c.smoothing > 0):
            raise ConfigError("smoothing must be positive")
        if not (c.margin > 0):
            raise ConfigError("margin must be positive")
        if c.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if not (0.0 <= c.noise_sigma):
            raise ConfigError("noise_sigma must be >= 0")
        if not (0.0 < c.amplitude_min <= c.amplitude_max <= 1.0):
            raise ConfigError("need 0 < amplitude_min <= amplitude_max <= 1")
        if not (0.0 <= c.silent_prob <= 1.0):
            raise ConfigError("silent_prob must lie in [0, 1]")
        if c.pairing not in ("same_index", "all_pairs"):
            raise ConfigError(f"pairing must be same_index or all_pairs, got {c.pairing!r}")
        for name, value in (("eval_threshold", c.eval_threshold),
                            ("localize_threshold", c.localize_threshold)):
            if not (0.0 <= value <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1]")
        steps = round(1.0 / c.auc_step)
        if c.auc_step <= 0 or abs(steps * c.auc_step - 1.0) > 1e-9:
            raise ConfigError("auc_step must divide 1 evenly")
        return self


_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELDS[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from exc


def parse_config(path) -> RunConfig:
    """Read ``key = value`` lines; unknown keys raise ConfigError naming the key."""
    text = Path(path).read_text()
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown configuration key {key!r}")
        values[key] = _coerce(key, raw)
    return RunConfig(**values).validate()


def load_config(path=None, seed=None) -> RunConfig:
    """Config from a file (or defaults), with an optional seed override."""
    config = parse_config(path) if path is not None else RunConfig()
    if seed is not None:
        config = dataclasses.replace(config, seed=int(seed))
    return config.validate()
