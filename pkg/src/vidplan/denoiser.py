"""Tiny per-frame-token denoiser with hand-written gradients.

Every latent frame is one token.  Tokens get an input projection, a learned
position embedding and an embedding of their *own* noise level, which is
what lets one network serve image-, video- and unconditioned generation
under diffusion forcing.  Text enters through FiLM; a dropped text uses a
learned null vector.  One single-head non-causal attention block and one
tanh MLP block follow, each residual.

The head predicts a clean-latent estimate ``x0``; the returned flow is
``(skip * z - x0) / max(k, k_floor)``, so the linear head never has to carry
the full-rank noise component through the narrow residual stream.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .forcing import noised_batch, sample_forcing_plan
from .schedule import ScheduleConfig, flow_matching_loss, flow_target

PARAM_LIMIT = 100_000
TEXT_DIM = 32


# --------------------------------------------------------------------------- text


def encode_text(text: str, dim: int = TEXT_DIM) -> np.ndarray:
    """Bag of hashed, signed word tokens, L2-normalised."""
    vec = np.zeros(dim)
    for tok in text.lower().split():
        h = hashlib.blake2b(tok.encode(), digest_size=8).digest()
        idx = int.from_bytes(h[:4], "little") % dim
        sign = 1.0 if h[4] & 1 else -1.0
        vec[idx] += sign
    n = np.linalg.norm(vec)
    return vec / n if n > 0 else vec


# --------------------------------------------------------------------------- params


@dataclass(frozen=True)
class DenoiserDims:
    token_dim: int
    d_model: int = 64
    mlp_dim: int = 128
    noise_dim: int = 16
    text_dim: int = TEXT_DIM
    max_frames: int = 13
    k_floor: float = 0.05


def _param_shapes(d: DenoiserDims) -> dict[str, tuple[int, ...]]:
    return {
        "w_in": (d.token_dim, d.d_model), "b_in": (d.d_model,),
        "pos": (d.max_frames, d.d_model),
        "w_noise": (d.noise_dim, d.d_model), "b_noise": (d.d_model,),
        "w_gamma": (d.text_dim, d.d_model), "w_beta": (d.text_dim, d.d_model),
        "null_text": (d.text_dim,),
        "wq": (d.d_model, d.d_model), "wk": (d.d_model, d.d_model),
        "wv": (d.d_model, d.d_model), "wo": (d.d_model, d.d_model),
        "w1": (d.d_model, d.mlp_dim), "b1": (d.mlp_dim,),
        "w2": (d.mlp_dim, d.d_model), "b2": (d.d_model,),
        "w_out": (d.d_model, d.token_dim), "b_out": (d.token_dim,),
        "skip": (1,),
    }


@dataclass
class ToyDenoiserParams:
    dims: DenoiserDims
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        shapes = _param_shapes(self.dims)
        if set(self.tensors) != set(shapes):
            missing = set(shapes) ^ set(self.tensors)
            raise ValueError(f"parameter set mismatch: {sorted(missing)}")
        for name, shape in shapes.items():
            if self.tensors[name].shape != shape:
                raise ValueError(f"{name}: expected {shape}, got {self.tensors[name].shape}")

    @classmethod
    def init(cls, dims: DenoiserDims, rng: np.random.Generator) -> "ToyDenoiserParams":
        t = {}
        for name, shape in _param_shapes(dims).items():
            if name.startswith("b_") or name in ("b1", "b2"):
                t[name] = np.zeros(shape)
            elif name == "skip":
                t[name] = np.ones(shape)
            elif name == "w_out":
                t[name] = np.zeros(shape)
            elif name in ("pos", "null_text"):
                t[name] = 0.02 * rng.standard_normal(shape)
            elif name in ("w_gamma", "w_beta"):
                t[name] = 0.1 * rng.standard_normal(shape)
            else:
                t[name] = rng.standard_normal(shape) / math.sqrt(shape[0])
        return cls(dims, t)

    @classmethod
    def zeros(cls, dims: DenoiserDims) -> "ToyDenoiserParams":
        return cls(dims, {k: np.zeros(s) for k, s in _param_shapes(dims).items()})

    def num_params(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def copy(self) -> "ToyDenoiserParams":
        return ToyDenoiserParams(self.dims, {k: v.copy() for k, v in self.tensors.items()})

    def check_finite(self) -> None:
        for name, v in self.tensors.items():
            if not np.all(np.isfinite(v)):
                raise FloatingPointError(f"parameter {name} has non-finite entries")


@dataclass
class DenoiserInput:
    """A single clip ``[L, c, h, w]`` or a batch ``[B, L, c, h, w]``.

    ``grid`` is ``[L]`` / ``[B, L]``, ``text_cond`` is ``[text_dim]`` / ``[B, text_dim]``
    and ``drop_text`` a bool or ``[B]`` bool array.
    """

    z_noisy: np.ndarray
    grid: np.ndarray
    text_cond: np.ndarray
    drop_text: bool | np.ndarray = False


def noise_embedding(k: np.ndarray, dim: int) -> np.ndarray:
    half = dim // 2
    freqs = math.pi * 2.0 ** np.linspace(0.0, 5.0, half)
    ang = k[..., None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


def _batched(inp: DenoiserInput):
    z = np.asarray(inp.z_noisy, dtype=np.float64)
    single = z.ndim == 4
    if single:
        z = z[None]
    if z.ndim != 5:
        raise ValueError(f"z_noisy must be [L,c,h,w] or [B,L,c,h,w], got {z.shape}")
    b, n = z.shape[:2]
    grid = np.asarray(inp.grid, dtype=np.float64).reshape(b, -1) if single else \
        np.asarray(inp.grid, dtype=np.float64)
    if grid.shape != (b, n):
        raise ValueError(f"noise grid shape {grid.shape} does not match {n} frames")
    text = np.asarray(inp.text_cond, dtype=np.float64)
    text = text.reshape(1, -1) if single else text
    if text.shape[0] != b:
        raise ValueError("text_cond batch size mismatch")
    if not np.all(np.isfinite(text)):
        raise ValueError("text_cond must be finite")
    drop = np.broadcast_to(np.asarray(inp.drop_text, dtype=bool), (b,))
    return z, grid, text, drop, single


# --------------------------------------------------------------------------- model


def _forward(p: ToyDenoiserParams, inp: DenoiserInput):
    d = p.dims
    t = p.tensors
    z, grid, text, drop, single = _batched(inp)
    b, n = z.shape[:2]
    if n > d.max_frames:
        raise ValueError(f"{n} latent frames exceed max_frames={d.max_frames}")
    x = z.reshape(b, n, -1)
    if x.shape[2] != d.token_dim:
        raise ValueError(f"token dim {x.shape[2]} != {d.token_dim}")

    cond = np.where(drop[:, None], t["null_text"][None, :], text)
    phi = noise_embedding(grid, d.noise_dim)
    h0 = x @ t["w_in"] + t["b_in"] + t["pos"][:n] + phi @ t["w_noise"] + t["b_noise"]
    gamma = cond @ t["w_gamma"]
    beta = cond @ t["w_beta"]
    h1 = h0 * (1.0 + gamma[:, None]) + beta[:, None]

    q, k, v = h1 @ t["wq"], h1 @ t["wk"], h1 @ t["wv"]
    scale = 1.0 / math.sqrt(d.d_model)
    s = np.einsum("bid,bjd->bij", q, k) * scale
    s = s - s.max(axis=-1, keepdims=True)
    a = np.exp(s)
    a /= a.sum(axis=-1, keepdims=True)
    o = a @ v
    h2 = h1 + o @ t["wo"]

    g = np.tanh(h2 @ t["w1"] + t["b1"])
    h3 = h2 + g @ t["w2"] + t["b2"]
    x0 = h3 @ t["w_out"] + t["b_out"]

    keff = np.maximum(grid, d.k_floor)[..., None]
    flow = (t["skip"][0] * x - x0) / keff
    cache = dict(x=x, cond=cond, drop=drop, phi=phi, h0=h0, gamma=gamma, h1=h1,
                 q=q, k=k, v=v, a=a, o=o, h2=h2, g=g, h3=h3, keff=keff, scale=scale)
    return flow.reshape(z.shape), cache, single


def forward(params: ToyDenoiserParams, inp: DenoiserInput) -> np.ndarray:
    """Flow prediction with the same shape as ``inp.z_noisy``."""
    params.check_finite()
    flow, _, single = _forward(params, inp)
    return flow[0] if single else flow


def _backward(p: ToyDenoiserParams, c: dict, upstream: np.ndarray) -> dict[str, np.ndarray]:
    t = p.tensors
    b, n, f = c["x"].shape
    gflow = upstream.reshape(b, n, f)
    gr = {}

    gr["skip"] = np.array([np.sum(gflow * c["x"] / c["keff"])])
    gx0 = -gflow / c["keff"]

    gr["w_out"] = np.einsum("bnd,bnf->df", c["h3"], gx0)
    gr["b_out"] = gx0.sum(axis=(0, 1))
    gh3 = gx0 @ t["w_out"].T

    gr["w2"] = np.einsum("bnm,bnd->md", c["g"], gh3)
    gr["b2"] = gh3.sum(axis=(0, 1))
    gu = (gh3 @ t["w2"].T) * (1.0 - c["g"] ** 2)
    gr["w1"] = np.einsum("bnd,bnm->dm", c["h2"], gu)
    gr["b1"] = gu.sum(axis=(0, 1))
    gh2 = gh3 + gu @ t["w1"].T

    gr["wo"] = np.einsum("bnd,bne->de", c["o"], gh2)
    go = gh2 @ t["wo"].T
    a = c["a"]
    ga = go @ c["v"].transpose(0, 2, 1)
    gv = a.transpose(0, 2, 1) @ go
    gs = a * (ga - np.sum(ga * a, axis=-1, keepdims=True)) * c["scale"]
    gq = gs @ c["k"]
    gk = gs.transpose(0, 2, 1) @ c["q"]
    h1 = c["h1"]
    gr["wq"] = np.einsum("bnd,bne->de", h1, gq)
    gr["wk"] = np.einsum("bnd,bne->de", h1, gk)
    gr["wv"] = np.einsum("bnd,bne->de", h1, gv)
    gh1 = gh2 + gq @ t["wq"].T + gk @ t["wk"].T + gv @ t["wv"].T

    ggamma = np.sum(gh1 * c["h0"], axis=1)
    gbeta = gh1.sum(axis=1)
    gr["w_gamma"] = c["cond"].T @ ggamma
    gr["w_beta"] = c["cond"].T @ gbeta
    gcond = ggamma @ t["w_gamma"].T + gbeta @ t["w_beta"].T
    gr["null_text"] = gcond[c["drop"]].sum(axis=0)
    gh0 = gh1 * (1.0 + c["gamma"][:, None])

    gr["w_in"] = np.einsum("bnf,bnd->fd", c["x"], gh0)
    gr["b_in"] = gh0.sum(axis=(0, 1))
    gpos = np.zeros_like(t["pos"])
    gpos[:n] = gh0.sum(axis=0)
    gr["pos"] = gpos
    gr["w_noise"] = np.einsum("bne,bnd->ed", c["phi"], gh0)
    gr["b_noise"] = gh0.sum(axis=(0, 1))
    return gr


def backward(params: ToyDenoiserParams, inp: DenoiserInput,
             upstream_grad: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients of ``sum(upstream_grad * forward(params, inp))``."""
    flow, cache, _ = _forward(params, inp)
    up = np.asarray(upstream_grad, dtype=np.float64)
    if up.size != flow.size:
        raise ValueError(f"upstream gradient shape {up.shape} does not match output {flow.shape}")
    return _backward(params, cache, up)


def loss_and_grad(params: ToyDenoiserParams, inp: DenoiserInput, z0: np.ndarray,
                  eps: np.ndarray, variant: str = "plain_flow"):
    """Flow-matching loss of a (batched) input and its exact parameter gradient."""
    flow, cache, single = _forward(params, inp)
    z0 = np.asarray(z0, dtype=np.float64).reshape(flow.shape)
    eps = np.asarray(eps, dtype=np.float64).reshape(flow.shape)
    grid = np.asarray(inp.grid, dtype=np.float64).reshape(flow.shape[:2])
    target = flow_target(z0, eps, None, "plain_flow")
    if variant == "k_scaled":
        target = target * grid.reshape(grid.shape + (1,) * (flow.ndim - 2))
    elif variant != "plain_flow":
        raise ValueError(f"unknown loss_variant {variant!r}")
    diff = flow - target
    loss = float(np.mean(diff ** 2))
    grads = _backward(params, cache, 2.0 * diff / diff.size)
    return loss, grads


class ToyDenoiser:
    """Callable wrapper used by the sampler: ``(z, grid, text, drop_text) -> flow``."""

    def __init__(self, params: ToyDenoiserParams):
        self.params = params

    def __call__(self, z_noisy, grid, text_cond, drop_text=False):
        return forward(self.params, DenoiserInput(z_noisy, grid, text_cond, drop_text))


# --------------------------------------------------------------------------- training


@dataclass
class TrainConfig:
    lr: float = 0.05
    warmup_steps: int = 200
    steps: int = 4000
    batch: int = 16
    seed: int = 0
    text_drop_prob: float = 0.1
    grad_clip: float = 1.0
    optimizer: str = "sgd"
    lr_decay: str = "constant"      # or "cosine" (to zero after warm-up)
    adam_betas: tuple[float, float] = (0.9, 0.999)
    d_model: int = 64
    mlp_dim: int = 128
    noise_dim: int = 16
    max_frames: int = 13
    k_floor: float = 0.05
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    max_history: int = 6
    clean_history_prob: float = 0.5


class DivergenceError(FloatingPointError):
    pass


Example = tuple[np.ndarray, np.ndarray]


def train(dataset: Sequence[Example] | Callable[[np.random.Generator], Example],
          config: TrainConfig, params: ToyDenoiserParams | None = None,
          log_every: int = 0) -> tuple[ToyDenoiserParams, list[float]]:
    """Diffusion-forcing flow-matching training with warmed-up gradient descent.

    ``dataset`` is either a sequence of ``(latent [L, c, h, w], text_cond)`` pairs,
    drawn uniformly, or a callable ``rng -> pair``.  Passing ``params`` continues
    training from them, which is how the two-stage recipe (broad pretraining,
    then finetuning on a filtered subset) is run.
    """
    rng = np.random.default_rng(config.seed)
    if callable(dataset):
        draw = dataset
    else:
        if len(dataset) == 0:
            raise ValueError("empty dataset")
        items = list(dataset)
        draw = lambda r: items[int(r.integers(len(items)))]  # noqa: E731

    first = np.asarray(draw(np.random.default_rng(config.seed))[0])
    if params is None:
        dims = DenoiserDims(token_dim=int(np.prod(first.shape[1:])), d_model=config.d_model,
                            mlp_dim=config.mlp_dim, noise_dim=config.noise_dim,
                            text_dim=TEXT_DIM, max_frames=config.max_frames,
                            k_floor=config.k_floor)
        params = ToyDenoiserParams.init(dims, rng)
    else:
        params = params.copy()
    if params.num_params() > PARAM_LIMIT:
        raise ValueError(f"{params.num_params()} parameters exceed the {PARAM_LIMIT} budget")

    if config.optimizer not in ("sgd", "adam"):
        raise ValueError(f"unknown optimizer {config.optimizer!r}")
    if config.lr_decay not in ("constant", "cosine"):
        raise ValueError(f"unknown lr_decay {config.lr_decay!r}")
    moments = {k: (np.zeros_like(v), np.zeros_like(v)) for k, v in params.tensors.items()}
    b1, b2 = config.adam_betas

    losses: list[float] = []
    for step in range(config.steps):
        z0s, epss, zns, grids, texts = [], [], [], [], []
        for _ in range(config.batch):
            z0, text = draw(rng)
            z0 = np.asarray(z0, dtype=np.float64)
            plan = sample_forcing_plan(rng, z0.shape[0], config.schedule,
                                       config.max_history, config.clean_history_prob)
            eps = rng.standard_normal(z0.shape)
            zn, grid = noised_batch(z0, eps, plan)
            z0s.append(z0)
            epss.append(eps)
            zns.append(zn)
            grids.append(grid)
            texts.append(text)
        drop = rng.random(config.batch) < config.text_drop_prob
        inp = DenoiserInput(np.stack(zns), np.stack(grids), np.stack(texts), drop)
        loss, grads = loss_and_grad(params, inp, np.stack(z0s), np.stack(epss),
                                    config.schedule.loss_variant)
        if not math.isfinite(loss):
            raise DivergenceError(f"loss became non-finite at step {step}")
        losses.append(loss)

        lr = config.lr * min(1.0, (step + 1) / max(config.warmup_steps, 1))
        if config.lr_decay == "cosine" and step >= config.warmup_steps:
            frac = (step - config.warmup_steps) / max(config.steps - config.warmup_steps, 1)
            lr *= 0.5 * (1.0 + math.cos(math.pi * frac))
        if config.grad_clip > 0:
            norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if norm > config.grad_clip:
                lr *= config.grad_clip / norm
        if config.optimizer == "sgd":
            for name, g in grads.items():
                params.tensors[name] -= lr * g
        else:
            for name, g in grads.items():
                m, v = moments[name]
                m *= b1
                m += (1 - b1) * g
                v *= b2
                v += (1 - b2) * g * g
                mhat = m / (1 - b1 ** (step + 1))
                vhat = v / (1 - b2 ** (step + 1))
                params.tensors[name] -= lr * mhat / (np.sqrt(vhat) + 1e-8)
        if log_every and step % log_every == 0:
            print(f"step {step:6d} loss {loss:.5f}")
    return params, losses


def batch_loss(params: ToyDenoiserParams, inp: DenoiserInput, z0, eps,
               variant: str = "plain_flow") -> float:
    pred = forward(params, inp)
    grid = np.asarray(inp.grid, dtype=np.float64)
    if pred.ndim == 4:
        return flow_matching_loss(pred, z0, eps, grid, variant)
    # equal-sized clips, so the mean of per-clip means is the global mean
    return float(np.mean([flow_matching_loss(p, a, e, g, variant)
                          for p, a, e, g in zip(pred, z0, eps, grid)]))


# --------------------------------------------------------------------------- checkpoints
#
# layout (little-endian): b"VPCK" | u32 version | u32 json_len | json dims |
# u32 count | per tensor: u16 name_len | name | u32 ndim | u32 dims... | f64 data

MAGIC = b"VPCK"
VERSION = 1


def save_checkpoint(path, params: ToyDenoiserParams) -> None:
    meta = json.dumps(asdict(params.dims), sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<I", len(params.tensors)))
        for name in sorted(params.tensors):
            arr = np.ascontiguousarray(params.tensors[name], dtype="<f8")
            nb = name.encode()
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> ToyDenoiserParams:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a denoiser checkpoint")
    version, mlen = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    dims = DenoiserDims(**json.loads(raw[off:off + mlen]))
    off += mlen
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + nlen].decode()
        off += nlen
        (ndim,) = struct.unpack_from("<I", raw, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}I", raw, off)
        off += 4 * ndim
        size = int(np.prod(shape)) if shape else 1
        tensors[name] = np.frombuffer(raw, "<f8", size, off).reshape(shape).copy()
        off += 8 * size
    return ToyDenoiserParams(dims, tensors)


def grad_check(params: ToyDenoiserParams, inp: DenoiserInput, z0, eps,
               n_params: int = 100, h: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples ``n_params`` scalar entries across all tensors.  The relative error
    uses ``|a - n| / max(|a| + |n|, 1e-8)`` so near-zero entries do not dominate.
    """
    rng = np.random.default_rng(seed)
    _, grads = loss_and_grad(params, inp, z0, eps)
    names = sorted(params.tensors)
    sizes = np.array([params.tensors[n].size for n in names])
    flat_idx = rng.choice(sizes.sum(), size=min(n_params, sizes.sum()), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    work = params.copy()
    for fi in flat_idx:
        ti = int(np.searchsorted(offsets, fi, side="right") - 1)
        name = names[ti]
        local = int(fi - offsets[ti])
        arr = work.tensors[name].reshape(-1)
        orig = arr[local]
        arr[local] = orig + h
        lp = batch_loss(work, inp, z0, eps)
        arr[local] = orig - h
        lm = batch_loss(work, inp, z0, eps)
        arr[local] = orig
        num = (lp - lm) / (2 * h)
        ana = grads[name].reshape(-1)[local]
        rel = abs(ana - num) / max(abs(ana) + abs(num), 1e-8)
        worst = max(worst, rel)
    return worst
