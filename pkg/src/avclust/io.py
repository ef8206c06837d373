"""On-disk formats: scene files, model files, PGM images, CSV logs.

All binary formats are little-endian with a 4-byte magic and a uint32
format version; loaders reject unknown magics and versions. Floats are
raw 64-bit rows in row-major order, so identical inputs always produce
byte-identical files.

Scene file (magic ``AVSC``, version 1)::

    magic[4] version[u32]
    H W C frames bins n_components latent_dim
    visual_grid_rows visual_grid_cols audio_grid_rows audio_grid_cols   (all u32)
    visual pixels  f64[H*W*C]
    audio cells    f64[frames*bins]
    per component:
        id[u32] silent[u8]
        latent f64[latent_dim]
        center_row center_col radius  (u32 u32 u32)
        frame_start frame_stop bin_start bin_stop (u32 x4)
        amplitude f64
        visual mask u8[grid_rows*grid_cols]
        audio mask  u8[audio_rows*audio_cols]

Model file (magic ``AVCM``, version 1)::

    magic[4] version[u32]
    k m n  visual_patch_rows visual_patch_cols visual_channels
    audio_patch_rows audio_patch_cols
    visual_activation[u8] audio_activation[u8]       (0 tanh, 1 identity)
    visual weight f64[n * visual_patch_dim], visual bias f64[n]
    audio  weight f64[n * audio_patch_dim],  audio bias f64[n]
    projections f64[k*m*n]
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import List

import numpy as np

from .encoder import ACTIVATIONS, EncoderParams
from .exceptions import ConfigError
from .model import ModelParams
from .synth import ComponentSignature, ScenePair

SCENE_MAGIC = b"AVSC"
MODEL_MAGIC = b"AVCM"
SCENE_VERSION = 1
MODEL_VERSION = 1


def fmt_float(x) -> str:
    """Shortest round-trip decimal form; stable across runs."""
    return repr(float(x))


def _u32(*values) -> bytes:
    return struct.pack("<" + "I" * len(values), *[int(v) for v in values])


def _read_u32(buf, offset, count):
    values = struct.unpack_from("<" + "I" * count, buf, offset)
    return values, offset + 4 * count


def _f64_bytes(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _read_f64(buf, offset, shape):
    n = int(np.prod(shape))
    arr = np.frombuffer(buf, dtype="<f8", count=n, offset=offset).reshape(shape)
    return arr.astype(np.float64), offset + 8 * n


def write_scene(path, scene: ScenePair) -> None:
    H, W, C = scene.visual.shape
    frames, bins = scene.audio.shape
    ncomp = len(scene.components)
    latent_dim = scene.components[0].latent.shape[0] if ncomp else 0
    gvr, gvc = scene.visual_masks.shape[1:] if ncomp else (0, 0)
    gar, gac = scene.audio_masks.shape[1:] if ncomp else (0, 0)
    out = [SCENE_MAGIC, _u32(SCENE_VERSION),
           _u32(H, W, C, frames, bins, ncomp, latent_dim, gvr, gvc, gar, gac),
           _f64_bytes(scene.visual), _f64_bytes(scene.audio)]
    for c, comp in enumerate(scene.components):
        out.append(_u32(comp.id))
        out.append(struct.pack("<B", 1 if scene.silent_flags[c] else 0))
        out.append(_f64_bytes(comp.latent))
        out.append(_u32(*comp.visual_blob))
        out.append(_u32(*comp.audio_blob))
        out.append(struct.pack("<d", comp.amplitude))
        out.append(scene.visual_masks[c].astype(np.uint8).tobytes())
        out.append(scene.audio_masks[c].astype(np.uint8).tobytes())
    Path(path).write_bytes(b"".join(out))


def read_scene(path) -> ScenePair:
    buf = Path(path).read_bytes()
    if buf[:4] != SCENE_MAGIC:
        raise ConfigError(f"{path} is not a scene file (bad magic)")
    (version,), offset = _read_u32(buf, 4, 1)
    if version != SCENE_VERSION:
        raise ConfigError(f"unsupported scene file version {version}")
    (H, W, C, frames, bins, ncomp, latent_dim, gvr, gvc, gar, gac), offset = \
        _read_u32(buf, offset, 11)
    visual, offset = _read_f64(buf, offset, (H, W, C))
    audio, offset = _read_f64(buf, offset, (frames, bins))
    components: List[ComponentSignature] = []
    silent_flags: List[bool] = []
    visual_masks = np.zeros((ncomp, gvr, gvc), dtype=bool)
    audio_masks = np.zeros((ncomp, gar, gac), dtype=bool)
    for c in range(ncomp):
        (cid,), offset = _read_u32(buf, offset, 1)
        silent = bool(buf[offset]); offset += 1
        latent, offset = _read_f64(buf, offset, (latent_dim,))
        vblob, offset = _read_u32(buf, offset, 3)
        ablob, offset = _read_u32(buf, offset, 4)
        (amplitude,) = struct.unpack_from("<d", buf, offset); offset += 8
        vmask = np.frombuffer(buf, dtype=np.uint8, count=gvr * gvc, offset=offset)
        offset += gvr * gvc
        amask = np.frombuffer(buf, dtype=np.uint8, count=gar * gac, offset=offset)
        offset += gar * gac
        components.append(ComponentSignature(id=cid, latent=latent, visual_blob=tuple(vblob),
                                             audio_blob=tuple(ablob), amplitude=amplitude))
        silent_flags.append(silent)
        visual_masks[c] = vmask.reshape(gvr, gvc).astype(bool)
        audio_masks[c] = amask.reshape(gar, gac).astype(bool)
    return ScenePair(visual=visual, audio=audio, components=components,
                     visual_masks=visual_masks, audio_masks=audio_masks,
                     silent_flags=silent_flags)


def write_manifest(path, entries) -> None:
    """Manifest CSV: one row per scene file."""
    lines = ["index,filename,seed,components,silent_components"]
    for index, filename, seed, ncomp, nsilent in entries:
        lines.append(f"{index},{filename},{seed},{ncomp},{nsilent}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path):
    lines = Path(path).read_text().splitlines()
    entries = []
    for line in lines[1:]:
        index, filename, seed, ncomp, nsilent = line.split(",")
        entries.append((int(index), filename, int(seed), int(ncomp), int(nsilent)))
    return entries


_ACTIVATION_CODE = {name: i for i, name in enumerate(ACTIVATIONS)}


def save_model(path, params: ModelParams) -> None:
    ve, ae = params.visual_encoder, params.audio_encoder
    k, m, n = params.projections.shape
    visual_channels = ve.patch_dim // (ve.patch_shape[0] * ve.patch_shape[1])
    out = [MODEL_MAGIC, _u32(MODEL_VERSION),
           _u32(k, m, n, ve.patch_shape[0], ve.patch_shape[1], visual_channels,
                ae.patch_shape[0], ae.patch_shape[1]),
           struct.pack("<BB", _ACTIVATION_CODE[ve.activation], _ACTIVATION_CODE[ae.activation]),
           _f64_bytes(ve.weight), _f64_bytes(ve.bias),
           _f64_bytes(ae.weight), _f64_bytes(ae.bias),
           _f64_bytes(params.projections)]
    Path(path).write_bytes(b"".join(out))


def load_model(path) -> ModelParams:
    buf = Path(path).read_bytes()
    if buf[:4] != MODEL_MAGIC:
        raise ConfigError(f"{path} is not a model file (bad magic)")
    (version,), offset = _read_u32(buf, 4, 1)
    if version != MODEL_VERSION:
        raise ConfigError(f"unsupported model file version {version}")
    (k, m, n, vph, vpw, vc, aph, apw), offset = _read_u32(buf, offset, 8)
    va_code, aa_code = struct.unpack_from("<BB", buf, offset)
    offset += 2
    vw, offset = _read_f64(buf, offset, (n, vph * vpw * vc))
    vb, offset = _read_f64(buf, offset, (n,))
    aw, offset = _read_f64(buf, offset, (n, aph * apw))
    ab, offset = _read_f64(buf, offset, (n,))
    projections, offset = _read_f64(buf, offset, (k, m, n))
    return ModelParams(
        visual_encoder=EncoderParams((vph, vpw), vw, vb, ACTIVATIONS[va_code]),
        audio_encoder=EncoderParams((aph, apw), aw, ab, ACTIVATIONS[aa_code]),
        projections=projections,
    )


def write_pgm(path, values) -> None:
    """Binary PGM (P5, maxval 255); input values in [0, 1] scale to round(255 v)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigError(f"PGM output needs a 2-D grid, got shape {arr.shape}")
    scaled = np.clip(np.rint(255.0 * arr), 0, 255).astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + scaled.tobytes())


def write_train_log(path, rows) -> None:
    lines = ["iter,loss,pos_score_mean,neg_score_mean"]
    for row in rows:
        lines.append(f"{row.iteration},{fmt_float(row.loss)},"
                     f"{fmt_float(row.pos_score_mean)},{fmt_float(row.neg_score_mean)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_eval_csv(path, report) -> None:
    """Per-scene rows then one summary row holding the dataset metrics."""
    lines = ["row_type,scene,chosen_cluster,iou,unrelated_iou,"
             "ciou_at_0_5,ciou_at_0_7,auc,match_accuracy"]
    for s in report.per_scene:
        lines.append(f"scene,{s.index},{s.chosen_cluster},{fmt_float(s.iou)},"
                     f"{fmt_float(s.unrelated_iou)},{int(s.iou >= 0.5)},{int(s.iou >= 0.7)},,")
    match = "" if report.match_accuracy is None else fmt_float(report.match_accuracy)
    lines.append(f"summary,,,{fmt_float(float(np.mean(report.ious)))},"
                 f"{fmt_float(float(np.mean(report.unrelated_ious)))},"
                 f"{fmt_float(report.ciou_at_0_5)},{fmt_float(report.ciou_at_0_7)},"
                 f"{fmt_float(report.auc)},{match}")
    Path(path).write_text("\n".join(lines) + "\n")
