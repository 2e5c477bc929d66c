"""History- and text-guided flow sampling, plus autoregressive extension.

A denoiser here is any callable ``f(z, grid, text, drop_text) -> flow`` that
accepts batched arrays ``z: [B, L, ...]``, ``grid: [B, L]``, ``text: [B, D]``
and ``drop_text: [B]``.  :class:`vidplan.denoiser.ToyDenoiser` qualifies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import shift_schedule

MAX_CONTEXT = 6
NORMALIZED = "normalized"
LITERAL = "literal_eq4"

FULL, NO_HIST, NO_TEXT = "full", "no_hist", "no_text"


@dataclass
class GuidanceConfig:
    w_hist: float = 2.0
    w_text: float = 5.0
    combine_mode: str = NORMALIZED
    num_steps: int = 16
    shift: float = 3.0

    def __post_init__(self):
        for w in (self.w_hist, self.w_text):
            if not np.isfinite(w) or w < 0:
                raise ValueError(f"guidance weights must be finite and >= 0, got {w}")
        if self.combine_mode not in (NORMALIZED, LITERAL):
            raise ValueError(f"unknown combine_mode {self.combine_mode!r}")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")


def time_grid(num_steps: int, shift: float) -> np.ndarray:
    """Noise levels from 1 down to 0, evenly spaced in schedule time."""
    return shift_schedule(np.linspace(1.0, 0.0, num_steps + 1), shift)


def combine(full, no_hist, no_text, cfg: GuidanceConfig) -> np.ndarray:
    full, no_hist, no_text = (np.asarray(a, dtype=np.float64) for a in (full, no_hist, no_text))
    if not full.shape == no_hist.shape == no_text.shape:
        raise ValueError("score estimates must share a shape")
    wh, wt = cfg.w_hist, cfg.w_text
    if cfg.combine_mode == NORMALIZED:
        return full + wh * (full - no_hist) + wt * (full - no_text)
    # both rows of the printed combination, summed as written
    return (1 + wh) * full - wh * no_hist + (1 + wt) * full - wt * no_text


def _variant_inputs(z, context_len, k, text, which, mask_noise):
    """Batched (z, grid, drop) for one score variant; ``z`` is ``[B, L, ...]``."""
    b, n = z.shape[:2]
    grid = np.full((b, n), k)
    grid[:, :context_len] = 0.0
    drop = np.zeros(b, dtype=bool)
    if which == NO_HIST and context_len:
        z = z.copy()
        z[:, :context_len] = mask_noise
        grid[:, :context_len] = 1.0
    elif which == NO_TEXT:
        drop[:] = True
    elif which != FULL and which != NO_HIST:
        raise ValueError(f"unknown score variant {which!r}")
    return z, grid, text, drop


def score_variant(denoiser, z, context_len: int, k: float, text, which: str,
                  mask_noise=None) -> np.ndarray:
    """One flow estimate for a single clip ``z: [L, ...]``.

    ``full`` keeps context frames at level 0 with text; ``no_hist`` swaps the
    context for pure noise at level 1; ``no_text`` keeps the context but drops
    the text.
    """
    z = np.asarray(z, dtype=np.float64)[None]
    text = np.asarray(text, dtype=np.float64)[None]
    if mask_noise is None:
        mask_noise = np.zeros_like(z[:, :context_len])
    zi, grid, ti, drop = _variant_inputs(z, context_len, k, text, which, mask_noise)
    return np.asarray(denoiser(zi, grid, ti, drop))[0]


def sample_batch(denoiser, context: np.ndarray, window: int, text: np.ndarray,
                 cfg: GuidanceConfig, rng: np.random.Generator) -> np.ndarray:
    """Sample ``B`` windows sharing a guidance config.

    ``context`` is ``[B, Lc, ...]`` (``Lc`` may be 0), ``text`` is ``[B, D]``.
    Returns ``[B, window, ...]`` with the context frames copied through unchanged.
    """
    context = np.asarray(context, dtype=np.float64)
    text = np.asarray(text, dtype=np.float64)
    b, lc = context.shape[:2]
    if lc > MAX_CONTEXT:
        raise ValueError(f"context of {lc} latent frames exceeds {MAX_CONTEXT}")
    if window <= lc:
        raise ValueError(f"window {window} leaves no frames to generate after {lc} context")
    frame_shape = context.shape[2:]
    eps = rng.standard_normal((b, window - lc) + frame_shape)
    mask_noise = rng.standard_normal((b, lc) + frame_shape)
    z = np.concatenate([context, eps], axis=1)

    need = [FULL]
    if cfg.w_hist != 0 and lc > 0:
        need.append(NO_HIST)
    if cfg.w_text != 0:
        need.append(NO_TEXT)

    ks = time_grid(cfg.num_steps, cfg.shift)
    for i in range(cfg.num_steps):
        parts = [_variant_inputs(z, lc, ks[i], text, w, mask_noise) for w in need]
        out = np.asarray(denoiser(np.concatenate([p[0] for p in parts]),
                                  np.concatenate([p[1] for p in parts]),
                                  np.concatenate([p[2] for p in parts]),
                                  np.concatenate([p[3] for p in parts])))
        est = dict(zip(need, np.split(out, len(need))))
        full = est[FULL]
        guided = combine(full, est.get(NO_HIST, full), est.get(NO_TEXT, full), cfg)
        z[:, lc:] = z[:, lc:] + (ks[i + 1] - ks[i]) * guided[:, lc:]
        z[:, :lc] = context
    return z


def sample(denoiser, context: np.ndarray, window: int, text: np.ndarray,
           cfg: GuidanceConfig, seed: int | np.random.Generator = 0) -> np.ndarray:
    """Generate one ``[window, ...]`` latent continuing ``context`` (``[Lc, ...]``)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return sample_batch(denoiser, np.asarray(context)[None], window,
                        np.asarray(text)[None], cfg, rng)[0]


def extend(denoiser, video: np.ndarray, stages: int, texts, cfg: GuidanceConfig,
           window: int = 13, context_len: int = MAX_CONTEXT,
           seed: int | np.random.Generator = 0) -> np.ndarray:
    """Grow a latent video stage by stage, each stage conditioned on the last frames.

    ``texts`` is one text vector reused for every stage or a sequence with one
    vector per stage.
    """
    video = np.asarray(video, dtype=np.float64)
    if video.shape[0] < 1:
        raise ValueError("extend needs at least one latent frame")
    if stages <= 0:
        return video
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    texts = np.asarray(texts, dtype=np.float64)
    if texts.ndim == 1:
        texts = np.broadcast_to(texts, (stages, texts.shape[0]))
    if len(texts) != stages:
        raise ValueError(f"{len(texts)} stage texts for {stages} stages")
    for stage in range(stages):
        lc = min(context_len, MAX_CONTEXT, video.shape[0])
        ctx = video[-lc:]
        out = sample(denoiser, ctx, window, texts[stage], cfg, rng)
        video = np.concatenate([video, out[lc:]], axis=0)
    return video
