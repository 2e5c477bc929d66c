import pytest

from vidplan.config import DEFAULTS, ENV_VAR, ConfigError, GlobalConfig, floats, load_config, parse_config


def test_defaults_every_section():
    cfg = GlobalConfig()
    assert set(DEFAULTS) == {"global", "schedule", "forcing", "train", "guidance", "retarget",
                             "curation", "eval", "synthdata"}
    assert cfg.seed == 0 and cfg["schedule"]["shift"] == 3.0


def test_parse_coerces_types():
    cfg = parse_config("[train]\nsteps = 50\nlr = 0.01\n[guidance]\ncombine_mode = literal_eq4\n")
    assert cfg["train"]["steps"] == 50 and cfg["train"]["lr"] == 0.01
    assert cfg["guidance"]["combine_mode"] == "literal_eq4"
    assert cfg["train"]["batch"] == DEFAULTS["train"]["batch"]


@pytest.mark.parametrize("text", ["[nope]\na = 1\n", "[train]\nsteps2 = 1\n",
                                  "[train]\nsteps = many\n", "not ini"])
def test_rejects_bad_files(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_dumps_round_trip():
    cfg = parse_config("[global]\nseed = 7\n")
    assert parse_config(cfg.dumps()).values == cfg.values


def test_load_from_env(tmp_path, monkeypatch):
    p = tmp_path / "c.ini"
    p.write_text("[global]\nseed = 11\n")
    monkeypatch.setenv(ENV_VAR, str(p))
    assert load_config().seed == 11
    monkeypatch.delenv(ENV_VAR)
    assert load_config().seed == 0
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_floats():
    assert floats("1 0, 2", 3) == [1.0, 0.0, 2.0]
    with pytest.raises(ConfigError):
        floats("1 2", 3)
