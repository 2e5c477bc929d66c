import json

import numpy as np
import pytest

from vidplan.cli import main
from vidplan.eval import Annotation, write_annotations
from vidplan.latent import read_tensor


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _last_json(text):
    return json.loads(text.strip().splitlines()[-1])


def test_grad_check(capsys, tmp_path):
    code, out, _ = _run(capsys, "grad-check", "--out", tmp_path, "--n-params", 30)
    assert code == 0
    rec = _last_json(out)
    assert rec["status"] == "ok" and rec["max_rel_error"] < 1e-4


def test_eval_fixture(capsys, tmp_path):
    anns = [Annotation("A", g, g == 1, g == 1, g == 1, False) for g in range(1, 5)]
    anns += [Annotation("B", g, False, False, False, False) for g in range(1, 5)]
    write_annotations(tmp_path / "a.csv", anns)
    code, out, _ = _run(capsys, "eval", "--annotations", tmp_path / "a.csv", "--out", tmp_path)
    assert code == 0
    lvl3 = _last_json(out)["levels"][2]
    assert (lvl3["average_pct"], lvl3["best_at_4_pct"]) == (12.5, 50.0)
    assert "12.5" in (tmp_path / "report.txt").read_text()


def test_eval_invalid_set(capsys, tmp_path):
    write_annotations(tmp_path / "a.csv", [Annotation("A", 1, False, False, False, True)])
    code, _, err = _run(capsys, "eval", "--annotations", tmp_path / "a.csv", "--out", tmp_path)
    assert code == 1 and _last_json(err)["error"] == "ValidationError"


def test_extend_zero_stages_copies(capsys, tmp_path):
    src = tmp_path / "v.bin"
    src.write_bytes(bytes(range(256)) * 3)
    code, _, _ = _run(capsys, "extend", "--video", src, "--stages", 0, "--out", tmp_path / "o")
    assert code == 0
    assert (tmp_path / "o" / "extended.bin").read_bytes() == src.read_bytes()


def test_error_records(capsys, tmp_path):
    code, _, err = _run(capsys, "eval", "--bogus")
    rec = _last_json(err)
    assert code == 2 and rec["status"] == "error" and rec["error"] == "usage"
    code, _, err = _run(capsys, "eval", "--annotations", tmp_path / "none.csv")
    assert code == 1 and _last_json(err)["error"] == "missing_input"
    (tmp_path / "bad.ini").write_text("[train]\nwat = 1\n")
    code, _, err = _run(capsys, "grad-check", "--config", tmp_path / "bad.ini")
    assert code == 2 and _last_json(err)["error"] == "config"
    code, _, err = _run(capsys, "frobnicate")
    assert code == 2


def test_toy_pipeline_reproducible(capsys, tmp_path):
    for run in ("a", "b"):
        d = tmp_path / run
        assert _run(capsys, "gen-data", "--count", 8, "--seed", 3, "--out", d / "data")[0] == 0
        assert _run(capsys, "train", "--data", d / "data", "--steps", 5, "--out", d / "m")[0] == 0
        ctx = d / "data" / "clip_00000.bin"
        code, out, _ = _run(capsys, "sample", "--ckpt", d / "m" / "model.ckpt", "--context", ctx,
                            "--text", "up", "--out", d / "s")
        assert code == 0 and _last_json(out)["frames"] == 49
        code, out, _ = _run(capsys, "extend", "--ckpt", d / "m" / "model.ckpt", "--video", ctx,
                            "--stages", 2, "--out", d / "e")
        assert code == 0
    for name in ("m/model.ckpt", "s/sample.bin", "e/extended.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ext = read_tensor(tmp_path / "a" / "e" / "extended.bin")
    ctx = read_tensor(tmp_path / "a" / "data" / "clip_00000.bin")
    np.testing.assert_array_equal(ext[:13], ctx)


def test_retarget_and_curate(capsys, tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[retarget]\nM = 0 0 1 -1 0 0 0 -1 0\nt_align = -0.6 0 0.4\nhand_mode = gripper\n")
    assert _run(capsys, "gen-data", "--kind", "trace", "--count", 40, "--out", tmp_path)[0] == 0
    code, out, _ = _run(capsys, "retarget", "--trace", tmp_path / "trace.jsonl",
                        "--config", ini, "--out", tmp_path)
    assert code == 0 and _last_json(out)["frames"] == 40
    from vidplan.curation import ClipRecord, write_clips
    clips = [ClipRecord(f"c{i}", "Bridge", 16.0, 4.0, (480, 640), ["robot grasping a cup"],
                        flow_stat=float(i)) for i in range(10)]
    clips.append(ClipRecord("x", "Bridge", 16.0, 4.0, (480, 640), ["cartoon grasping"], flow_stat=0.0))
    write_clips(tmp_path / "clips.jsonl", clips)
    code, out, _ = _run(capsys, "curate", "--clips", tmp_path / "clips.jsonl", "--out", tmp_path)
    rec = _last_json(out)
    assert code == 0 and rec["retained"] == 7 and rec["rejected"] == 4
    assert rec["mixture"] == {"Bridge": 1.0, **{k: 0.0 for k in rec["mixture"] if k != "Bridge"}}
