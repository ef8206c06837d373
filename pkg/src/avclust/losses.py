"""Cross-modal center scoring and the max-margin hinge loss.

Matched audio/visual center pairs are scored by cosine similarity,
position i against position i (the shared projection bank induces the
correspondence). The hinge demands each positive score beat the paired
negative-clip score by a margin. Two pairing rules exist: ``same_index``
(k hinge terms, the default) pits the negative clip's center i against
positive center i; ``all_pairs`` uses every mismatched (i, j) combination.
"""

from __future__ import annotations

import numpy as np

from .exceptions import DegenerateVectorError
from .numerics import NORM_EPS

PAIRINGS = ("same_index", "all_pairs")


def _unit_rows(centers: np.ndarray, name: str):
    norms = np.linalg.norm(centers, axis=-1)
    if np.any(norms < NORM_EPS):
        j = int(np.argwhere(norms < NORM_EPS)[0][-1])
        raise DegenerateVectorError(f"{name} center {j} is degenerate", index=j)
    return centers / norms[..., None], norms


def center_scores(audio_centers: np.ndarray, visual_centers: np.ndarray) -> np.ndarray:
    """Per-index cosine similarities between two (k, m) center sets."""
    a = np.asarray(audio_centers, dtype=np.float64)
    v = np.asarray(visual_centers, dtype=np.float64)
    if a.shape != v.shape or a.ndim != 2:
        raise ValueError(f"center sets must share shape (k, m), got {a.shape} vs {v.shape}")
    ua, _ = _unit_rows(a, "audio")
    uv, _ = _unit_rows(v, "visual")
    return np.clip(np.sum(ua * uv, axis=1), -1.0, 1.0)


def margin_loss_batch(pos_audio: np.ndarray, visual: np.ndarray, neg_audio: np.ndarray,
                      margin: float, pairing: str = "same_index"):
    """Hinge loss and its center gradients for a (B, k, m) batch of center sets.

    Returns (per-sample losses, pos scores, neg scores, g_pos, g_vis, g_neg)
    where the gradients are of the summed per-sample losses. Hinges exactly
    at the kink contribute zero gradient.
    """
    if pairing not in PAIRINGS:
        raise ValueError(f"pairing must be one of {PAIRINGS}, got {pairing!r}")
    Ca = np.asarray(pos_audio, dtype=np.float64)
    Cv = np.asarray(visual, dtype=np.float64)
    Cn = np.asarray(neg_audio, dtype=np.float64)
    ua, na = _unit_rows(Ca, "positive audio")
    uv, nv = _unit_rows(Cv, "visual")
    un, nn = _unit_rows(Cn, "negative audio")
    margin = float(margin)

    pos = np.sum(ua * uv, axis=-1)  # (B, k)
    if pairing == "same_index":
        neg = np.sum(un * uv, axis=-1)  # (B, k)
        t = neg - pos + margin
        active = (t > 0.0).astype(np.float64)
        losses = np.sum(np.maximum(0.0, t), axis=-1)
        w_pos = -active
        w_neg_rows = active
        # d cos(x, y)/dx = (uy - cos * ux)/||x||
        g_pos = w_pos[..., None] * (uv - pos[..., None] * ua) / na[..., None]
        g_vis = w_pos[..., None] * (ua - pos[..., None] * uv) / nv[..., None]
        g_neg = w_neg_rows[..., None] * (uv - neg[..., None] * un) / nn[..., None]
        g_vis += w_neg_rows[..., None] * (un - neg[..., None] * uv) / nv[..., None]
        return losses, pos, neg, g_pos, g_vis, g_neg

    # all_pairs: S[b, i, j] = cos(neg center j, visual center i), j != i
    S = np.einsum("bjm,bim->bij", un, uv)
    k = S.shape[-1]
    off = 1.0 - np.eye(k)
    t = (S - pos[:, :, None] + margin) * off
    active = ((t > 0.0) & (off > 0.0)).astype(np.float64)
    losses = np.sum(np.maximum(0.0, t) * off, axis=(1, 2))
    w_pos = -active.sum(axis=2)  # (B, i)
    g_pos = w_pos[..., None] * (uv - pos[..., None] * ua) / na[..., None]
    g_vis = w_pos[..., None] * (ua - pos[..., None] * uv) / nv[..., None]
    # negative-pair contributions
    g_neg = np.einsum("bij,bim->bjm", active, uv)
    g_neg -= np.einsum("bij,bij,bjm->bjm", active, S, un)
    g_neg /= nn[..., None]
    g_vis += (np.einsum("bij,bjm->bim", active, un)
              - np.einsum("bij,bij,bim->bim", active, S, uv)) / nv[..., None]
    neg = np.max(S * off - (1.0 - off), axis=2)  # best mismatched score, for logging
    return losses, pos, neg, g_pos, g_vis, g_neg


def margin_loss(pos_audio_centers: np.ndarray, visual_centers: np.ndarray,
                neg_audio_centers: np.ndarray, margin: float,
                pairing: str = "same_index") -> float:
    """Hinge loss for one triple of (k, m) center sets."""
    a = np.asarray(pos_audio_centers, dtype=np.float64)
    v = np.asarray(visual_centers, dtype=np.float64)
    n = np.asarray(neg_audio_centers, dtype=np.float64)
    if not (a.shape == v.shape == n.shape) or a.ndim != 2:
        raise ValueError("all three center sets must share shape (k, m)")
    losses, _, _, _, _, _ = margin_loss_batch(a[None], v[None], n[None], margin, pairing)
    return float(losses[0])
