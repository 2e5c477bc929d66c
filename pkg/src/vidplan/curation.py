"""Clip curation: speed alignment, motion filtering, caption keywords, quality rules, mixing."""
from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, Mapping, Protocol, Sequence

import numpy as np

from . import _kernels

SOURCES = ("Bridge", "DROID", "Language-Table", "AgiBot-World", "Ego4D",
           "Epic-Kitchens", "Something-Something", "Panda-70M")

# filtered clip counts per source
SOURCE_SIZES = {"Bridge": 25_000, "DROID": 192_000, "Language-Table": 71_000,
                "AgiBot-World": 863_000, "Ego4D": 39_000, "Epic-Kitchens": 7_000,
                "Something-Something": 93_000, "Panda-70M": 196_000}

MIX_WEIGHTS = {"AgiBot-World": 0.375, "DROID": 0.75, "Ego4D": 1.5, "Panda-70M": 0.5,
               "Something-Something": 0.5, "Bridge": 1.0, "Epic-Kitchens": 2.0,
               "Language-Table": 0.05}


@dataclass
class ClipRecord:
    clip_id: str
    source: str
    fps: float
    duration: float
    resolution: tuple[int, int]          # (height, width)
    captions: list[str] = field(default_factory=list)
    flow_stat: float | None = None
    embodiment_visible: bool = True
    success: bool | None = None
    speed_factor: float = 1.0
    mean_luma: float | None = None       # 0..255

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if not self.duration > 0:
            raise ValueError(f"{self.clip_id}: duration must be positive")
        if not self.speed_factor > 0:
            raise ValueError(f"{self.clip_id}: speed_factor must be positive")
        self.resolution = tuple(self.resolution)


def read_clips(path) -> list[ClipRecord]:
    with open(path) as fh:
        return [ClipRecord(**json.loads(ln)) for ln in fh if ln.strip()]


def write_clips(path, clips: Sequence[ClipRecord], extra: Sequence[dict] | None = None) -> None:
    with open(path, "w") as fh:
        for i, c in enumerate(clips):
            row = asdict(c)
            if extra is not None:
                row.update(extra[i])
            fh.write(json.dumps(row) + "\n")


# --------------------------------------------------------------------------- temporal alignment


def resample_clip(frames: np.ndarray, fps: float, speed_factor: float = 1.0,
                  target_fps: float = 16.0, target_len: float = 3.0) -> np.ndarray:
    """Nearest-frame resampling of a sped-up (or slowed) clip to a fixed length.

    Source frame ``i`` plays at ``i / (fps * speed_factor)`` seconds; the output
    has ``target_len * target_fps + 1`` frames and holds the last frame if the
    clip runs out.
    """
    frames = np.asarray(frames)
    if len(frames) == 0:
        raise ValueError("empty clip")
    if not speed_factor > 0:
        raise ValueError("speed_factor must be positive")
    n_out = int(round(target_len * target_fps)) + 1
    src = np.arange(n_out) / target_fps * fps * speed_factor
    idx = np.minimum(np.floor(src + 0.5 + 1e-9).astype(int), len(frames) - 1)
    return frames[idx]


# --------------------------------------------------------------------------- motion statistics


def _gray(frames: np.ndarray) -> np.ndarray:
    f = np.asarray(frames, dtype=np.float64)
    if f.ndim == 4:
        if f.shape[1] == 3:
            f = 0.299 * f[:, 0] + 0.587 * f[:, 1] + 0.114 * f[:, 2]
        else:
            f = f.mean(axis=1)
    if f.ndim != 3:
        raise ValueError(f"expected [N, H, W] or [N, C, H, W] frames, got {f.shape}")
    return f


def _resize(frame: np.ndarray, size: int) -> np.ndarray:
    if frame.shape == (size, size):
        return frame
    ys = (np.arange(size) * frame.shape[0] / size).astype(int)
    xs = (np.arange(size) * frame.shape[1] / size).astype(int)
    return frame[ys[:, None], xs[None, :]]


def flow_stat(frames: np.ndarray, estimator: str = "block_match", fps: float | None = None,
              sample_fps: float = 4.0, size: int = 256, block: int = 16,
              radius: int = 8) -> float:
    """Spatio-temporal mean motion magnitude of a clip.

    With ``fps`` given the clip is first subsampled to ``sample_fps``; every
    kept frame is resized (nearest neighbour) to ``size x size``.
    ``frame_diff`` averages ``|I[t+1] - I[t]|``; ``block_match`` averages the
    length of the best integer displacement of each interior block.
    """
    g = _gray(frames)
    if fps is not None and fps > sample_fps:
        step = fps / sample_fps
        g = g[np.floor(np.arange(0, len(g), step) + 1e-9).astype(int)]
    if len(g) < 2:
        raise ValueError("motion statistics need at least two frames")
    g = np.stack([_resize(f, size) for f in g])
    if estimator == "frame_diff":
        return float(np.mean(np.abs(np.diff(g, axis=0))))
    if estimator == "block_match":
        mags = [np.linalg.norm(_kernels.block_match(a, b, block, radius), axis=-1).mean()
                for a, b in zip(g[:-1], g[1:])]
        return float(np.mean(mags))
    raise ValueError(f"unknown estimator {estimator!r}")


def filter_top_flow(clips: Sequence[ClipRecord], fraction: float = 0.30) -> list[ClipRecord]:
    """Drop the ``fraction`` of clips with the largest ``flow_stat``; ties broken by ``clip_id``."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    for c in clips:
        if c.flow_stat is None:
            raise ValueError(f"{c.clip_id}: flow_stat not computed")
    n = len(clips)
    keep = math.ceil(round((1.0 - fraction) * n, 9))
    ranked = sorted(clips, key=lambda c: (c.flow_stat, c.clip_id))
    return ranked[:keep]


# --------------------------------------------------------------------------- captions

_WORD = re.compile(r"[a-z0-9']+")


def tokenize(text: str) -> list[str]:
    return _WORD.findall(text.casefold())


def _contains(tokens: list[str], phrase: str) -> bool:
    words = tokenize(phrase)
    if not words:
        return False
    n = len(words)
    return any(tokens[i:i + n] == words for i in range(len(tokens) - n + 1))


def keyword_filter(caption: str, whitelist, blacklist) -> bool:
    """True iff a whitelist term occurs and no blacklist term does (whole words/phrases)."""
    tokens = tokenize(caption)
    if not tokens:
        return False
    if any(_contains(tokens, b) for b in blacklist):
        return False
    return any(_contains(tokens, w) for w in whitelist)


def load_keywords(path=None, which: str = "whitelist") -> list[str]:
    """Read a one-term-per-line list; without ``path`` the bundled list is used."""
    if path is None:
        text = resources.files("vidplan").joinpath(f"data/{which}.txt").read_text()
    else:
        text = Path(path).read_text()
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def segment_clips(duration: float, clip_len: float = 4.0) -> list[tuple[float, float]]:
    """Non-overlapping ``[start, end)`` windows; the remainder is dropped."""
    n = int(math.floor(duration / clip_len + 1e-9))
    return [(i * clip_len, (i + 1) * clip_len) for i in range(n)]


# --------------------------------------------------------------------------- quality rules


@dataclass
class QualityRules:
    min_height: int = 240
    min_width: int = 320
    min_duration: float = 1.0
    max_duration: float = 60.0
    luma_low: float = 30.0
    luma_high: float = 230.0


def quality_filter(clip: ClipRecord, rules: QualityRules = QualityRules()) -> tuple[bool, str]:
    """``(accepted, reason)``; the reason names the first failing rule or is ``"ok"``."""
    h, w = clip.resolution
    if h < rules.min_height or w < rules.min_width:
        return False, "resolution"
    if not rules.min_duration <= clip.duration <= rules.max_duration:
        return False, "duration"
    if clip.mean_luma is not None and not rules.luma_low <= clip.mean_luma <= rules.luma_high:
        return False, "lighting"
    if not clip.embodiment_visible:
        return False, "embodiment"
    if clip.success is False:
        return False, "expert_motion"
    return True, "ok"


class AnnotationProvider(Protocol):
    def annotate(self, clip: ClipRecord) -> ClipRecord:
        """Fill captions / detector answers for ``clip``."""


class EchoAnnotations:
    """Returns clips unchanged: annotations are expected to be precomputed columns."""

    def annotate(self, clip: ClipRecord) -> ClipRecord:
        return clip


# --------------------------------------------------------------------------- mixing

PER_CLIP = "per_clip"
PER_SOURCE = "per_source"


def mixture(sizes: Mapping[str, int], weights: Mapping[str, float],
            mode: str = PER_CLIP) -> dict[str, float]:
    """Probability of drawing from each source."""
    if mode not in (PER_CLIP, PER_SOURCE):
        raise ValueError(f"unknown weighting mode {mode!r}")
    raw = {}
    for name, n in sizes.items():
        w = float(weights.get(name, 0.0))
        if w < 0:
            raise ValueError(f"negative weight for {name}")
        raw[name] = w * n if mode == PER_CLIP else (w if n > 0 else 0.0)
    total = sum(raw.values())
    if total <= 0:
        raise ValueError("all source weights are zero")
    return {k: v / total for k, v in raw.items()}


def weighted_sampler(sources: Mapping[str, Sequence | int], weights: Mapping[str, float],
                     rng: np.random.Generator, mode: str = PER_CLIP) -> Iterator[tuple[str, object]]:
    """Endless stream of ``(source, clip)``; integer sources yield clip indices."""
    sizes = {k: (v if isinstance(v, (int, np.integer)) else len(v)) for k, v in sources.items()}
    probs = mixture(sizes, weights, mode)
    names = list(probs)
    p = np.array([probs[k] for k in names])
    while True:
        name = names[int(rng.choice(len(names), p=p))]
        i = int(rng.integers(sizes[name]))
        src = sources[name]
        yield name, (i if isinstance(src, (int, np.integer)) else src[i])


def sample_sources(sizes: Mapping[str, int], weights: Mapping[str, float], n: int,
                   rng: np.random.Generator, mode: str = PER_CLIP) -> np.ndarray:
    """Vectorised source draws (indices into ``list(sizes)``) for large ``n``."""
    probs = mixture(sizes, weights, mode)
    return rng.choice(len(probs), size=n, p=np.array(list(probs.values())))
