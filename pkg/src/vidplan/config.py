"""Global INI-style configuration with centralised, typed defaults."""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

ENV_VAR = "VIDPLAN_CONFIG"

# every key the config file may carry, with its default; types follow the default
DEFAULTS: dict[str, dict[str, object]] = {
    "global": {"seed": 0},
    "schedule": {"shift": 3.0, "num_steps": 16, "loss_variant": "plain_flow"},
    "forcing": {"max_history_latent_frames": 6, "clean_history_prob": 0.5},
    "train": {"lr": 1e-3, "warmup_steps": 200, "steps": 20000, "batch": 32,
              "optimizer": "adam", "grad_clip": 0.0, "text_drop_prob": 0.15,
              "lr_decay": "cosine",
              "d_model": 64, "mlp_dim": 256, "noise_dim": 16, "k_floor": 0.05},
    "guidance": {"w_hist": 2.0, "w_text": 5.0, "combine_mode": "normalized",
                 "window": 13, "context_len": 6},
    "retarget": {"rotation_map_mode": "conjugate", "sg_window": 9, "sg_order": 3,
                 "alpha": 1.0, "beta": 0.05, "grasp_close_threshold": 0.03,
                 "grasp_open_threshold": 0.06, "hand_mode": "dexterous", "ik_restarts": 4,
                 "M": "1 0 0 0 1 0 0 0 1", "t_align": "0 0 0"},
    "curation": {"target_fps": 16.0, "target_len": 3.0, "flow_fraction": 0.30,
                 "flow_estimator": "block_match", "weighting": "per_clip",
                 "whitelist": "", "blacklist": "",
                 "min_height": 240, "min_width": 320, "min_duration": 1.0,
                 "max_duration": 60.0, "luma_low": 30.0, "luma_high": 230.0,
                 "w_agibot_world": 0.375, "w_droid": 0.75, "w_ego4d": 1.5,
                 "w_panda_70m": 0.5, "w_something_something": 0.5, "w_bridge": 1.0,
                 "w_epic_kitchens": 2.0, "w_language_table": 0.05},
    "eval": {"gens_per_prompt": 4},
    "synthdata": {"grid": 8, "size": 2, "frames": 13, "position_stride": 4,
                  "caption_accuracy": 0.65, "spatial_patch": 4, "temporal_patch": 4,
                  "clips": 64},
}


class ConfigError(ValueError):
    pass


def _coerce(section: str, key: str, raw: str):
    default = DEFAULTS[section][key]
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as "
                          f"{type(default).__name__}") from None
    return raw.strip()


@dataclass
class GlobalConfig:
    values: dict[str, dict[str, object]] = field(
        default_factory=lambda: {s: dict(v) for s, v in DEFAULTS.items()})

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.values[section]

    @property
    def seed(self) -> int:
        return int(self.values["global"]["seed"])

    def dumps(self) -> str:
        out = []
        for s, kv in self.values.items():
            out.append(f"[{s}]")
            out.extend(f"{k} = {v}" for k, v in kv.items())
            out.append("")
        return "\n".join(out)


def parse_config(text: str) -> GlobalConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    cfg = GlobalConfig()
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in DEFAULTS[section]:
                raise ConfigError(f"[{section}] unknown key {key!r}")
            cfg.values[section][key] = _coerce(section, key, raw)
    return cfg


def load_config(path=None) -> GlobalConfig:
    """Read ``path``, else the file named by ``$VIDPLAN_CONFIG``, else defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return GlobalConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text())


def floats(s: str, n: int) -> list[float]:
    vals = [float(x) for x in str(s).replace(",", " ").split()]
    if len(vals) != n:
        raise ConfigError(f"expected {n} numbers, got {len(vals)}")
    return vals
