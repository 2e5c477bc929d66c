"""``vidplan`` command-line entry point."""
from __future__ import annotations

import argparse
import json
import shutil
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as C

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _error_record(cmd: str | None, kind: str, message: str) -> str:
    return json.dumps({"status": "error", "subcommand": cmd, "error": kind, "message": message})


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args, cfg: C.GlobalConfig) -> int:
    return cfg.seed if args.seed is None else args.seed


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"missing input: {p}")
    return p


# --------------------------------------------------------------------------- builders


def _train_config(cfg: C.GlobalConfig, seed: int):
    from .denoiser import TrainConfig
    from .schedule import ScheduleConfig

    s, t, f = cfg["schedule"], cfg["train"], cfg["forcing"]
    return TrainConfig(
        lr=t["lr"], warmup_steps=t["warmup_steps"], steps=t["steps"], batch=t["batch"],
        seed=seed, text_drop_prob=t["text_drop_prob"], grad_clip=t["grad_clip"],
        optimizer=t["optimizer"], lr_decay=t["lr_decay"], d_model=t["d_model"], mlp_dim=t["mlp_dim"],
        noise_dim=t["noise_dim"], k_floor=t["k_floor"],
        max_frames=max(cfg["guidance"]["window"], 1),
        schedule=ScheduleConfig(s["shift"], s["num_steps"], s["loss_variant"]),
        max_history=f["max_history_latent_frames"], clean_history_prob=f["clean_history_prob"])


def _toy_config(cfg: C.GlobalConfig, seed: int):
    from .latent import PatchSpec
    from .toyplan import ToyPlanConfig

    d = cfg["synthdata"]
    patch = PatchSpec(d["spatial_patch"], d["temporal_patch"])
    tc = _train_config(cfg, seed)
    n_latent = 1 + -(-(d["frames"] - 1) // patch.temporal)
    return ToyPlanConfig(grid=d["grid"], size=d["size"], frames=d["frames"],
                         position_stride=d["position_stride"],
                         caption_accuracy=d["caption_accuracy"], patch=patch,
                         train=replace(tc, max_frames=max(n_latent, tc.max_frames)))


def _guidance(cfg: C.GlobalConfig):
    from .guidance import GuidanceConfig

    g, s = cfg["guidance"], cfg["schedule"]
    return GuidanceConfig(g["w_hist"], g["w_text"], g["combine_mode"], s["num_steps"], s["shift"])


def _patch(cfg):
    from .latent import PatchSpec

    return PatchSpec(cfg["synthdata"]["spatial_patch"], cfg["synthdata"]["temporal_patch"])


# --------------------------------------------------------------------------- subcommands


def cmd_gen_data(args, cfg) -> dict:
    """Write toy clips (raw tensors + captions) or a synthetic pose trace."""
    out, seed = _out_dir(args), _seed(args, cfg)
    if args.kind == "trace":
        from .retarget.camera import CameraModel
        from .synthdata import circle_path, gen_pose_trace
        from .retarget.trace import write_trace

        cam = CameraModel(fx=600.0, fy=600.0, cx=320.0, cy=240.0)
        frames, _ = gen_pose_trace(circle_path(args.count), cam, args.noise_px, args.dropout, seed)
        path = out / "trace.jsonl"
        write_trace(path, frames, cam)
        return {"trace": str(path), "frames": len(frames)}

    from .latent import write_tensor
    from .synthdata import ToyWorldSpec, gen_clip, random_spec

    d = cfg["synthdata"]
    rng = np.random.default_rng(seed)
    base = ToyWorldSpec(grid=d["grid"], size=d["size"], frames=d["frames"])
    stride = d["position_stride"]
    rows = []
    for i in range(args.count if args.count else d["clips"]):
        spec = random_spec(rng, base)
        spec = replace(spec, x0=spec.x0 - spec.x0 % stride, y0=spec.y0 - spec.y0 % stride)
        video, caption = gen_clip(spec)
        name = f"clip_{i:05d}.bin"
        write_tensor(out / name, video)
        rows.append({"file": name, "caption": caption})
    with open(out / "captions.jsonl", "w") as fh:
        fh.writelines(json.dumps(r) + "\n" for r in rows)
    return {"clips": len(rows), "dir": str(out)}


def _load_clips(data_dir: Path, patch):
    from .latent import encode, read_tensor

    rows = [json.loads(ln) for ln in (data_dir / "captions.jsonl").read_text().splitlines() if ln]
    if not rows:
        raise ValueError(f"no clips listed in {data_dir / 'captions.jsonl'}")
    return [(encode(read_tensor(data_dir / r["file"]), patch).data, r["caption"]) for r in rows]


def cmd_train(args, cfg) -> dict:
    from .denoiser import save_checkpoint, train
    from .toyplan import caption_sampler

    out, seed = _out_dir(args), _seed(args, cfg)
    tcfg = _toy_config(cfg, seed)
    data = _load_clips(_require(args.data), tcfg.patch)
    tc = tcfg.train
    if args.steps is not None:
        tc = replace(tc, steps=args.steps)
    params, losses = train(caption_sampler(data, tcfg.caption_accuracy), tc)
    ckpt = out / "model.ckpt"
    save_checkpoint(ckpt, params)
    np.savetxt(out / "losses.txt", losses)
    return {"checkpoint": str(ckpt), "final_loss": float(np.mean(losses[-100:])),
            "params": params.num_params()}


def _context_latent(path, patch, context_len: int):
    from .latent import encode, read_tensor

    video = read_tensor(_require(path))
    lat = encode(video, patch)
    return video, lat, min(context_len, lat.latent_frames)


def cmd_sample(args, cfg) -> dict:
    from .denoiser import ToyDenoiser, encode_text, load_checkpoint
    from .guidance import sample
    from .latent import decode, latent_from_array, write_tensor, write_png_dir

    out, seed = _out_dir(args), _seed(args, cfg)
    patch = _patch(cfg)
    den = ToyDenoiser(load_checkpoint(_require(args.ckpt)))
    video, lat, lc = _context_latent(args.context, patch, cfg["guidance"]["context_len"])
    window = args.window or cfg["guidance"]["window"]
    z = sample(den, lat.data[-lc:], window, encode_text(args.text), _guidance(cfg), seed)
    pix = decode(latent_from_array(z, patch, video.shape[1]), patch)
    path = out / "sample.bin"
    write_tensor(path, pix)
    if args.png:
        write_png_dir(out / "sample_png", pix)
    return {"video": str(path), "frames": int(pix.shape[0])}


def cmd_extend(args, cfg) -> dict:
    from .latent import decode, latent_from_array, write_tensor

    out, seed = _out_dir(args), _seed(args, cfg)
    src = _require(args.video)
    path = out / "extended.bin"
    if args.stages <= 0:
        shutil.copyfile(src, path)
        return {"video": str(path), "stages": 0}

    from .denoiser import ToyDenoiser, encode_text, load_checkpoint
    from .guidance import extend

    patch = _patch(cfg)
    g = cfg["guidance"]
    den = ToyDenoiser(load_checkpoint(_require(args.ckpt)))
    video, lat, _ = _context_latent(src, patch, g["context_len"])
    z = extend(den, lat.data, args.stages, encode_text(args.text), _guidance(cfg),
               window=g["window"], context_len=g["context_len"], seed=seed)
    pix = decode(latent_from_array(z, patch, video.shape[1]), patch)
    write_tensor(path, pix)
    return {"video": str(path), "stages": args.stages, "latent_frames": int(z.shape[0])}


def _retarget_config(cfg):
    from .retarget.pipeline import RetargetConfig

    r = dict(cfg["retarget"])
    M = np.array(C.floats(r.pop("M"), 9)).reshape(3, 3)
    t = np.array(C.floats(r.pop("t_align"), 3))
    return RetargetConfig(M=M, t_align=t, **r)


def cmd_retarget(args, cfg) -> dict:
    from .retarget import (RobotModel, five_finger_hand, load_robot, plan_to_actions,
                           read_trace, six_dof_arm, write_actions_csv)

    out = _out_dir(args)
    frames, cam = read_trace(_require(args.trace))
    robot = load_robot(_require(args.robot)) if args.robot else \
        RobotModel(six_dof_arm(), five_finger_hand())
    plan = plan_to_actions(frames, cam, robot, _retarget_config(cfg))
    path = out / "actions.csv"
    write_actions_csv(path, plan, robot)
    return {"actions": str(path), "frames": len(plan.t_sec),
            "ik_converged": float(plan.converged.mean())}


def cmd_curate(args, cfg) -> dict:
    from . import curation as cu

    out, seed = _out_dir(args), _seed(args, cfg)
    c = cfg["curation"]
    clips = cu.read_clips(_require(args.clips))
    rules = cu.QualityRules(c["min_height"], c["min_width"], c["min_duration"],
                            c["max_duration"], c["luma_low"], c["luma_high"])
    white = cu.load_keywords(c["whitelist"] or None, "whitelist")
    black = cu.load_keywords(c["blacklist"] or None, "blacklist")

    kept, rejected, reasons = [], [], []
    for clip in clips:
        ok, why = cu.quality_filter(clip, rules)
        if ok and not any(cu.keyword_filter(cap, white, black) for cap in clip.captions):
            ok, why = False, "keywords"
        if ok and clip.flow_stat is None:
            ok, why = False, "no_flow_stat"
        if ok:
            kept.append(clip)
        else:
            rejected.append(clip)
            reasons.append({"reason": why})
    survivors = {id(x) for x in cu.filter_top_flow(kept, c["flow_fraction"])}
    for clip in kept:
        if id(clip) not in survivors:
            rejected.append(clip)
            reasons.append({"reason": "flow"})
    kept = [x for x in kept if id(x) in survivors]

    cu.write_clips(out / "retained.jsonl", kept)
    cu.write_clips(out / "rejected.jsonl", rejected, reasons)
    weights = {name: c["w_" + name.lower().replace("-", "_")] for name in cu.SOURCES}
    sizes = {name: sum(x.source == name for x in kept) for name in cu.SOURCES}
    mix = cu.mixture(sizes, weights, c["weighting"]) if any(
        sizes[k] and weights[k] for k in sizes) else {}
    return {"retained": len(kept), "rejected": len(rejected), "mixture": mix, "seed": seed}


def cmd_eval(args, cfg) -> dict:
    from .eval import ValidationError, aggregate, read_annotations, report, validate

    out = _out_dir(args)
    ann = read_annotations(_require(args.annotations))
    bad = validate(ann)
    if bad:
        raise ValidationError(bad)
    text, machine = report(aggregate(ann, check=False))
    print(text)
    (out / "report.txt").write_text(text + "\n")
    (out / "report.json").write_text(machine + "\n")
    return json.loads(machine)


def cmd_grad_check(args, cfg) -> dict:
    from .denoiser import DenoiserDims, DenoiserInput, ToyDenoiserParams, encode_text, grad_check
    from .forcing import noised_batch, sample_forcing_plan

    seed = _seed(args, cfg)
    rng = np.random.default_rng(seed)
    t = cfg["train"]
    dims = DenoiserDims(token_dim=16, d_model=16, mlp_dim=32, noise_dim=t["noise_dim"],
                        max_frames=5, k_floor=t["k_floor"])
    params = ToyDenoiserParams.init(dims, rng)
    z0 = rng.standard_normal((2, 5, 4, 2, 2))
    eps = rng.standard_normal(z0.shape)
    zn, grid = zip(*(noised_batch(a, e, sample_forcing_plan(rng, 5)) for a, e in zip(z0, eps)))
    inp = DenoiserInput(np.stack(zn), np.stack(grid),
                        np.stack([encode_text("right"), encode_text("up")]), np.array([False, True]))
    err = grad_check(params, inp, z0, eps, n_params=args.n_params, seed=seed)
    print(f"max relative error {err:.3e}")
    return {"max_rel_error": err, "passed": bool(err < 1e-4)}


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help=f"INI config file (default: ${C.ENV_VAR})")
    common.add_argument("--seed", type=int, help="overrides [global] seed")
    common.add_argument("--out", default=".", help="output directory")

    p = _Parser(prog="vidplan", description="Video planning toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("gen-data", parents=[common], help="synthetic clips or pose traces")
    s.add_argument("--kind", choices=("video", "trace"), default="video")
    s.add_argument("--count", type=int, default=0, help="clips, or trace frames")
    s.add_argument("--noise-px", type=float, default=2.0)
    s.add_argument("--dropout", type=float, default=0.1)
    s.set_defaults(fn=cmd_gen_data)

    s = sub.add_parser("train", parents=[common], help="train the toy denoiser")
    s.add_argument("--data", required=True, help="directory written by gen-data")
    s.add_argument("--steps", type=int, help="overrides [train] steps")
    s.set_defaults(fn=cmd_train)

    for name, fn in (("sample", cmd_sample), ("extend", cmd_extend)):
        s = sub.add_parser(name, parents=[common], help=f"{name} with history/text guidance")
        s.add_argument("--ckpt", required=(name == "sample"))
        s.add_argument("--text", default="right")
        if name == "sample":
            s.add_argument("--context", required=True, help="raw tensor pixel video")
            s.add_argument("--window", type=int, default=0)
            s.add_argument("--png", action="store_true", help="also dump PNG frames")
        else:
            s.add_argument("--video", required=True, help="raw tensor pixel video")
            s.add_argument("--stages", type=int, default=1)
        s.set_defaults(fn=fn)

    s = sub.add_parser("retarget", parents=[common], help="pose trace to robot actions")
    s.add_argument("--trace", required=True)
    s.add_argument("--robot", help="robot JSON (default: built-in 6-DoF arm + hand)")
    s.set_defaults(fn=cmd_retarget)

    s = sub.add_parser("curate", parents=[common], help="filter a clip manifest")
    s.add_argument("--clips", required=True, help="clip metadata JSONL")
    s.set_defaults(fn=cmd_curate)

    s = sub.add_parser("eval", parents=[common], help="aggregate success annotations")
    s.add_argument("--annotations", required=True, help="annotation CSV")
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("grad-check", parents=[common], help="finite-difference gradient check")
    s.add_argument("--n-params", type=int, default=100)
    s.set_defaults(fn=cmd_grad_check)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    cmd = next((a for a in argv if not a.startswith("-")), None)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(_error_record(cmd, "usage", str(e)), file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = C.load_config(args.config)
        result = args.fn(args, cfg)
    except C.ConfigError as e:
        print(_error_record(args.command, "config", str(e)), file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(_error_record(args.command, "missing_input", str(e)), file=sys.stderr)
        return EXIT_FAIL
    except Exception as e:  # noqa: BLE001 - every failure becomes an error record
        print(_error_record(args.command, type(e).__name__, str(e)), file=sys.stderr)
        return EXIT_FAIL
    print(json.dumps({"status": "ok", "subcommand": args.command, **result}))
    if args.command == "grad-check" and not result["passed"]:
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
