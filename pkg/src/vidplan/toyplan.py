"""Desk-scale planning experiment on the moving-square world.

Trains the toy denoiser on latent clips of a square translating in one of
four directions and measures, on held-out starting frames, (a) how close the
first generated future frame is to the true continuation and (b) whether the
generated motion follows the caption.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .denoiser import ToyDenoiser, ToyDenoiserParams, TrainConfig, encode_text, train
from .guidance import GuidanceConfig, sample_batch
from .latent import PatchSpec, decode, encode, latent_from_array
from .synthdata import MOTION_NAMES, ToyWorldSpec, classify_motion, gen_clip


@dataclass
class ToyPlanConfig:
    grid: int = 8
    size: int = 2
    frames: int = 13
    position_stride: int = 4
    caption_accuracy: float = 0.65
    patch: PatchSpec = field(default_factory=lambda: PatchSpec(spatial=4, temporal=4))
    train: TrainConfig = field(default_factory=lambda: TrainConfig(
        lr=1e-3, steps=20000, batch=32, optimizer="adam", grad_clip=0.0, mlp_dim=256,
        max_frames=4, warmup_steps=200, text_drop_prob=0.15,
        lr_decay="cosine"))

    def __post_init__(self):
        if not 0.0 <= self.caption_accuracy <= 1.0:
            raise ValueError("caption_accuracy must lie in [0, 1]")
        if self.grid % self.patch.spatial:
            raise ValueError("grid must be divisible by the spatial patch")


def toy_specs(cfg: ToyPlanConfig) -> list[ToyWorldSpec]:
    pos = range(0, cfg.grid, cfg.position_stride)
    return [ToyWorldSpec(grid=cfg.grid, size=cfg.size, x0=x, y0=y, motion=m, frames=cfg.frames)
            for x in pos for y in pos for m in MOTION_NAMES]


def toy_dataset(cfg: ToyPlanConfig) -> list[tuple[np.ndarray, str]]:
    """Every ``(latent clip, true motion word)`` the world can produce."""
    return [(encode(gen_clip(s)[0], cfg.patch).data, s.motion) for s in toy_specs(cfg)]


def caption_sampler(data, caption_accuracy: float):
    """``rng -> (latent, text)`` draw where the caption is replaced by a uniformly
    random motion word with probability ``1 - caption_accuracy``."""
    def draw(rng: np.random.Generator):
        z, word = data[int(rng.integers(len(data)))]
        if rng.random() >= caption_accuracy:
            word = MOTION_NAMES[int(rng.integers(len(MOTION_NAMES)))]
        return z, encode_text(word)
    return draw


def train_toy(cfg: ToyPlanConfig, seed: int | None = None, log_every: int = 0):
    tc = cfg.train if seed is None else replace(cfg.train, seed=seed)
    return train(caption_sampler(toy_dataset(cfg), cfg.caption_accuracy), tc, log_every=log_every)


@dataclass
class ToyEval:
    mse: np.ndarray          # [N] first-future-frame MSE per episode
    correct: np.ndarray      # [N] motion matches the caption


def evaluate(params: ToyDenoiserParams, cfg: ToyPlanConfig, guidance: GuidanceConfig,
             episodes: int = 100, seed: int = 123, sample_seed: int = 7) -> ToyEval:
    """Condition on the first latent frame and the true caption; score the generated window."""
    rng = np.random.default_rng(seed)
    pool = toy_specs(cfg)
    specs = [pool[int(i)] for i in rng.integers(len(pool), size=episodes)]
    gts = np.stack([encode(gen_clip(s)[0], cfg.patch).data for s in specs])
    text = np.stack([encode_text(s.motion) for s in specs])
    out = sample_batch(ToyDenoiser(params), gts[:, :1], gts.shape[1], text, guidance,
                       np.random.default_rng(sample_seed))
    mse = np.mean((out[:, 1] - gts[:, 1]) ** 2, axis=tuple(range(1, out.ndim - 1)))
    correct = np.array([
        classify_motion(decode(latent_from_array(o, cfg.patch, 1), cfg.patch)[:cfg.frames])
        == s.motion for o, s in zip(out, specs)])
    return ToyEval(mse, correct)


def history_guidance_test(params, cfg: ToyPlanConfig, w_hist: float = 2.0, w_text: float = 5.0,
                          episodes: int = 100, num_steps: int = 16):
    """One-sided paired t-test that history guidance lowers first-frame MSE."""
    base = GuidanceConfig(w_hist=0.0, w_text=w_text, num_steps=num_steps,
                          shift=cfg.train.schedule.shift)
    r0 = evaluate(params, cfg, base, episodes)
    r1 = evaluate(params, cfg, replace(base, w_hist=w_hist), episodes)
    p = stats.ttest_rel(r1.mse, r0.mse, alternative="less").pvalue
    return r0, r1, float(p)


def text_guidance_accuracy(params, cfg: ToyPlanConfig, w_text: float, w_hist: float = 2.0,
                           episodes: int = 100, num_steps: int = 16) -> float:
    g = GuidanceConfig(w_hist=w_hist, w_text=w_text, num_steps=num_steps,
                       shift=cfg.train.schedule.shift)
    return float(evaluate(params, cfg, g, episodes).correct.mean())


__all__ = ["ToyPlanConfig", "ToyEval", "toy_specs", "toy_dataset", "caption_sampler",
           "train_toy", "evaluate", "history_guidance_test", "text_guidance_accuracy"]
