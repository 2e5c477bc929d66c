"""Lossless pixel <-> latent conversion by spatiotemporal space-to-depth.

Stands in for a learned video autoencoder while keeping its shape
arithmetic: the first frame is replicated ``temporal`` times, the rest of
the clip is grouped into blocks of ``temporal`` frames, and every
``spatial x spatial x temporal`` patch is folded into the channel axis.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ShapeError(ValueError):
    """Raised when tensor dimensions do not fit the patch geometry."""


@dataclass(frozen=True)
class PatchSpec:
    spatial: int = 8
    temporal: int = 4

    def __post_init__(self):
        if self.spatial < 1 or self.temporal < 1:
            raise ValueError("patch sizes must be positive")


@dataclass
class LatentVideo:
    """Latent frames ``[1 + ceil(T / temporal), C * s * s * temporal, H / s, W / s]``.

    ``pixel_frames`` remembers ``1 + T`` so that :func:`decode` can drop the
    hold-padding added to the last temporal block.
    """

    data: np.ndarray
    pixel_frames: int
    pixel_channels: int

    @property
    def latent_frames(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape


def latent_shape(frames: int, channels: int, height: int, width: int,
                 patch: PatchSpec = PatchSpec()) -> tuple[int, int, int, int]:
    if frames < 1:
        raise ShapeError("a video needs at least one frame")
    if height % patch.spatial or width % patch.spatial:
        raise ShapeError(
            f"H={height}, W={width} not divisible by spatial patch {patch.spatial}")
    t = frames - 1
    return (1 + math.ceil(t / patch.temporal),
            channels * patch.spatial ** 2 * patch.temporal,
            height // patch.spatial,
            width // patch.spatial)


def _fold(block: np.ndarray, s: int) -> np.ndarray:
    # block: [p_t, C, H, W] -> [C * p_t * s * s, H / s, W / s]
    pt, c, h, w = block.shape
    x = block.reshape(pt, c, h // s, s, w // s, s)
    x = x.transpose(1, 0, 3, 5, 2, 4)
    return x.reshape(c * pt * s * s, h // s, w // s)


def _unfold(z: np.ndarray, c: int, pt: int, s: int) -> np.ndarray:
    _, h, w = z.shape
    x = z.reshape(c, pt, s, s, h, w)
    x = x.transpose(1, 0, 4, 2, 5, 3)
    return x.reshape(pt, c, h * s, w * s)


def encode(video: np.ndarray, patch: PatchSpec = PatchSpec()) -> LatentVideo:
    """Encode a ``[1 + T, C, H, W]`` pixel video."""
    video = np.asarray(video)
    if video.ndim != 4:
        raise ShapeError(f"expected [frames, C, H, W], got shape {video.shape}")
    n, c, h, w = video.shape
    out_shape = latent_shape(n, c, h, w, patch)
    pt = patch.temporal
    rest = video[1:]
    pad = (-len(rest)) % pt
    if pad:
        rest = np.concatenate([rest, np.repeat(rest[-1:], pad, axis=0)])
    blocks = [np.repeat(video[:1], pt, axis=0)]
    blocks += [rest[i:i + pt] for i in range(0, len(rest), pt)]
    data = np.stack([_fold(b, patch.spatial) for b in blocks])
    assert data.shape == out_shape
    return LatentVideo(data=data, pixel_frames=n, pixel_channels=c)


def decode(latent: LatentVideo, patch: PatchSpec = PatchSpec()) -> np.ndarray:
    """Exact inverse of :func:`encode` for the same ``patch``."""
    data = np.asarray(latent.data)
    c, pt, s = latent.pixel_channels, patch.temporal, patch.spatial
    if data.ndim != 4 or data.shape[1] != c * pt * s * s:
        raise ShapeError(
            f"latent channels {data.shape[1] if data.ndim == 4 else '?'} do not match "
            f"{c} pixel channels with patch {s}x{s}x{pt}")
    blocks = [_unfold(z, c, pt, s) for z in data]
    frames = [blocks[0][:1]] + blocks[1:]
    video = np.concatenate(frames, axis=0)
    return video[:latent.pixel_frames]


def latent_from_array(data: np.ndarray, patch: PatchSpec, pixel_channels: int) -> LatentVideo:
    """Wrap a bare latent array; the pixel frame count is the largest it can hold."""
    data = np.asarray(data)
    return LatentVideo(data=data, pixel_frames=1 + (data.shape[0] - 1) * patch.temporal,
                       pixel_channels=pixel_channels)


# raw tensor files: int32 ndim, int32 dims..., float32 payload, all little-endian

def write_tensor(path, array: np.ndarray) -> None:
    array = np.ascontiguousarray(array, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<i", array.ndim))
        fh.write(struct.pack(f"<{array.ndim}i", *array.shape))
        fh.write(array.tobytes())


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (ndim,) = struct.unpack_from("<i", raw, 0)
    dims = struct.unpack_from(f"<{ndim}i", raw, 4)
    offset = 4 + 4 * ndim
    count = int(np.prod(dims)) if dims else 1
    expected = offset + 4 * count
    if len(raw) != expected:
        raise ShapeError(f"{path}: expected {expected} bytes for dims {dims}, found {len(raw)}")
    return np.frombuffer(raw, dtype="<f4", offset=offset, count=count).reshape(dims).copy()


def read_png_dir(path) -> np.ndarray:
    """Load ``*.png`` frames (sorted by name) into a ``[N, C, H, W]`` array in [-1, 1]."""
    from PIL import Image

    files = sorted(Path(path).glob("*.png"))
    if not files:
        raise FileNotFoundError(f"no PNG frames in {path}")
    frames = []
    for f in files:
        img = np.asarray(Image.open(f), dtype=np.float64)
        if img.ndim == 2:
            img = img[..., None]
        frames.append(img.transpose(2, 0, 1) / 127.5 - 1.0)
    return np.stack(frames)


def write_png_dir(path, video: np.ndarray) -> None:
    from PIL import Image

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(np.asarray(video)):
        img = np.clip((frame + 1.0) * 127.5, 0, 255).round().astype(np.uint8)
        img = img.transpose(1, 2, 0)
        if img.shape[2] == 1:
            img = img[..., 0]
        Image.fromarray(img).save(path / f"{i:05d}.png")
