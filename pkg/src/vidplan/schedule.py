"""Flow-matching noise path, shifted time schedule and training loss."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PLAIN_FLOW = "plain_flow"
K_SCALED = "k_scaled"
LOSS_VARIANTS = (PLAIN_FLOW, K_SCALED)


@dataclass
class ScheduleConfig:
    shift: float = 3.0
    num_steps: int = 16
    loss_variant: str = PLAIN_FLOW

    def __post_init__(self):
        if not self.shift > 0:
            raise ValueError(f"shift must be > 0, got {self.shift}")
        if self.num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {self.num_steps}")
        if self.loss_variant not in LOSS_VARIANTS:
            raise ValueError(f"unknown loss_variant {self.loss_variant!r}")


def _frame_levels(k, like: np.ndarray) -> np.ndarray:
    """Broadcast a scalar or per-frame level vector against a ``[frames, ...]`` array."""
    k = np.asarray(k, dtype=np.float64)
    if k.ndim == 0:
        return k
    if k.ndim != 1 or k.shape[0] != like.shape[0]:
        raise ValueError(f"noise grid of length {k.shape} does not match {like.shape[0]} frames")
    return k.reshape((-1,) + (1,) * (like.ndim - 1))


def _check_same(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def interpolate_noise(z0, eps, k) -> np.ndarray:
    """``(1 - k) * z0 + k * eps`` with ``k`` a scalar or one level per frame.

    Endpoints are selected rather than computed so that ``k = 0`` returns the
    clean frame bit-for-bit.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_same(z0, eps)
    kk = _frame_levels(k, z0)
    out = (1.0 - kk) * z0 + kk * eps
    out = np.where(kk == 0.0, z0, out)
    return np.where(kk == 1.0, eps, out)


def shift_schedule(t, shift: float = 3.0):
    """Warp uniform time ``t`` towards high noise: ``shift * t / (1 + (shift - 1) * t)``."""
    if not shift > 0:
        raise ValueError(f"shift must be > 0, got {shift}")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > 1) or np.any(np.isnan(t_arr)):
        raise ValueError("t must lie in [0, 1]")
    k = shift * t_arr / (1.0 + (shift - 1.0) * t_arr)
    k = np.clip(k, 0.0, 1.0)
    return float(k) if np.ndim(t) == 0 else k


def flow_target(z0, eps, k=None, variant: str = PLAIN_FLOW) -> np.ndarray:
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_same(z0, eps)
    if variant == PLAIN_FLOW:
        return eps - z0
    if variant == K_SCALED:
        if k is None:
            raise ValueError("k_scaled target needs noise levels")
        return _frame_levels(k, z0) * (eps - z0)
    raise ValueError(f"unknown loss_variant {variant!r}")


def flow_matching_loss(pred, z0, eps, k_grid, variant: str = PLAIN_FLOW) -> float:
    """Mean squared error between ``pred`` and :func:`flow_target`."""
    pred = np.asarray(pred, dtype=np.float64)
    target = flow_target(z0, eps, k_grid, variant)
    _check_same(pred, target)
    return float(np.mean((pred - target) ** 2))
