"""Diffusion-forcing training plans.

Each training clip is split into a history prefix and a future suffix.  The
two segments receive independent noise levels and, half of the time, the
history is left clean so the model also sees the plain image/video
conditioning case.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedule import ScheduleConfig, interpolate_noise, shift_schedule

MAX_HISTORY = 6


@dataclass(frozen=True)
class ForcingPlan:
    history_len: int
    k_hist: float
    k_future: float
    clean_history: bool

    def __post_init__(self):
        if self.history_len < 0:
            raise ValueError("history_len must be >= 0")
        if self.clean_history and self.k_hist != 0.0:
            raise ValueError("clean_history plans must have k_hist == 0")
        for k in (self.k_hist, self.k_future):
            if not 0.0 <= k <= 1.0:
                raise ValueError(f"noise level {k} outside [0, 1]")


def sample_forcing_plan(rng: np.random.Generator, latent_frames: int,
                        schedule: ScheduleConfig | None = None,
                        max_history: int = MAX_HISTORY,
                        clean_history_prob: float = 0.5) -> ForcingPlan:
    if latent_frames < 1:
        raise ValueError("latent_frames must be >= 1")
    shift = schedule.shift if schedule is not None else ScheduleConfig().shift
    history_len = int(rng.integers(0, min(max_history, latent_frames - 1) + 1))
    k_hist = shift_schedule(float(rng.random()), shift)
    k_future = shift_schedule(float(rng.random()), shift)
    clean = bool(rng.random() < clean_history_prob)
    if clean:
        k_hist = 0.0
    return ForcingPlan(history_len, k_hist, k_future, clean)


def plan_to_grid(plan: ForcingPlan, latent_frames: int) -> np.ndarray:
    if plan.history_len > latent_frames:
        raise ValueError(
            f"history_len {plan.history_len} exceeds {latent_frames} latent frames")
    grid = np.full(latent_frames, plan.k_future, dtype=np.float64)
    grid[:plan.history_len] = plan.k_hist
    return grid


def noised_batch(z0: np.ndarray, eps: np.ndarray, plan: ForcingPlan):
    """Return ``(z_noisy, grid)`` for one clip under ``plan``."""
    z0 = np.asarray(z0, dtype=np.float64)
    grid = plan_to_grid(plan, z0.shape[0])
    return interpolate_noise(z0, eps, grid), grid
