import json
import shutil
import time

import pytest

from conftest import CORPUS3, CORPUS5, SEEDED
from verifiable.cli import cmd_analyze, cmd_batch, cmd_report, cmd_scan, cmd_verify, main
from verifiable.config import PipelineConfig
from verifiable.translator import GarbageClient
from verifiable.translator.templates import template_dir


def cfg(tmp_path, **kw):
    return PipelineConfig(output_dir=str(tmp_path / "out"), **kw)


def test_scan(capsys):
    assert cmd_scan(CORPUS5) == 0
    out = capsys.readouterr().out
    assert "com.example.beacon" in out and "com.example.calc" not in out


def test_scan_json(capsys):
    assert main(["scan", str(CORPUS5), "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert isinstance(rows, list) and [r["app_id"] for r in rows] == ["com.example.beacon", "com.example.bulb"]


def test_scan_errors(tmp_path):
    assert cmd_scan(tmp_path / "missing") == 2
    assert cmd_scan(tmp_path) == 2


@pytest.mark.parametrize("app,code", [("com.example.tracker", 0), ("com.example.bulb", 1),
                                      ("com.example.smartlock", 1)])
def test_analyze_exit_codes(tmp_path, capsys, app, code):
    c = cfg(tmp_path)
    assert cmd_analyze(CORPUS3 / app, c) == code
    report = json.loads((tmp_path / "out" / f"{app}.json").read_text())
    assert report["secure"] == (code == 0)
    if code == 1:
        assert "attacks:" in capsys.readouterr().out and report["attacks"]


def test_analyze_pipeline_failure_still_writes_report(tmp_path):
    c = cfg(tmp_path, max_retries=0)
    assert cmd_analyze(CORPUS3 / "com.example.bulb", c, client=GarbageClient()) == 3
    report = json.loads((tmp_path / "out" / "com.example.bulb.json").read_text())
    assert report["pipeline_failure"] and report["warnings"][0].startswith("PIPELINE FAILURE")


def test_analyze_usage_errors(tmp_path):
    assert cmd_analyze(tmp_path / "missing", cfg(tmp_path)) == 2
    apk = tmp_path / "x.apk"
    apk.write_bytes(b"PK")
    assert cmd_analyze(apk, cfg(tmp_path)) == 2


def test_analyze_apk_through_decompiler_hook(tmp_path):
    apk = tmp_path / "bulb.apk"
    apk.write_bytes(b"PK")
    src = CORPUS3 / "com.example.bulb" / "src"
    hook = f"cp -r {src} {{out}}"
    assert cmd_analyze(apk, cfg(tmp_path, decompiler=hook)) == 1


def test_batch_parallel_determinism(tmp_path):
    start = time.monotonic()
    a, b = tmp_path / "p1", tmp_path / "p4"
    assert main(["batch", str(CORPUS3), "--out", str(a), "--parallel", "1"]) == 0
    assert main(["--parallel", "4", "batch", str(CORPUS3), "--out", str(b)]) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == ["com.example.bulb.json", "com.example.smartlock.json",
                     "com.example.tracker.json", "corpus.json"]
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert time.monotonic() - start < 30


def test_batch_composes_per_app_reports(tmp_path):
    assert cmd_batch(CORPUS3, cfg(tmp_path)) == 0
    out = tmp_path / "out"
    singles = tmp_path / "single"
    for app in ("com.example.bulb", "com.example.smartlock", "com.example.tracker"):
        cmd_analyze(CORPUS3 / app, PipelineConfig(output_dir=str(singles)))
        assert (out / f"{app}.json").read_bytes() == (singles / f"{app}.json").read_bytes()
    stats = json.loads((out / "corpus.json").read_text())
    assert stats["total"] == 3 and stats["secure"] == 1
    labels = {r["label"]: r["count"] for r in stats["combinations"]}
    assert labels["TTT"] == labels["TFF"] == labels["FFF"] == 1


def test_batch_continues_past_failures(tmp_path):
    assert cmd_batch(CORPUS3, cfg(tmp_path, max_retries=0), client=GarbageClient()) == 0
    stats = json.loads((tmp_path / "out" / "corpus.json").read_text())
    assert stats["pipeline_failures"] == 3


def test_batch_setup_errors(tmp_path):
    (tmp_path / "empty").mkdir()
    assert cmd_batch(tmp_path / "empty", cfg(tmp_path)) == 2
    assert cmd_batch(tmp_path / "missing", cfg(tmp_path)) == 2


def test_verify(capsys, tmp_path):
    assert cmd_verify(template_dir() / "challenge_response.pv") == 0
    assert "holds" in capsys.readouterr().out
    assert cmd_verify(template_dir() / "enc_auth.pv") == 1
    assert "attack trace" in capsys.readouterr().out
    assert cmd_verify(SEEDED / "02_missing_period.pv") == 2
    assert "E_SYNTAX" in capsys.readouterr().out
    assert cmd_verify(tmp_path / "none.pv") == 2


def test_verify_unknown_exit(tmp_path):
    assert cmd_verify(template_dir() / "challenge_response.pv", PipelineConfig(state_cap=3)) == 3


def test_verify_json(capsys):
    assert main(["verify", str(template_dir() / "plaintext.pv"), "--json"]) == 1
    data = json.loads(capsys.readouterr().out)
    assert [v["status"] for v in data["verdicts"]] == ["violated"] * 3


def test_report_command(tmp_path, capsys):
    out = tmp_path / "out"
    cmd_batch(CORPUS3, cfg(tmp_path))
    capsys.readouterr()
    assert cmd_report(out, group_by="category", evolution=True) == 0
    text = capsys.readouterr().out
    assert "Smart Home" in text and "v40" in text
    assert main(["report", str(out), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["total"] == 3
    assert cmd_report(tmp_path / "missing") == 2
    (tmp_path / "blank").mkdir()
    assert cmd_report(tmp_path / "blank") == 2


def test_usage_errors(tmp_path):
    assert main([]) == 2
    assert main(["scan"]) == 2
    assert main(["analyze", str(CORPUS3 / "com.example.bulb"), "--mode", "cloud"]) == 2
    assert main(["analyze", str(CORPUS3 / "com.example.bulb"), "--max-retries", "999",
                 "--out", str(tmp_path)]) == 2
    assert main(["--config", str(tmp_path / "missing.toml"), "scan", str(CORPUS5)]) == 2


def test_config_file_and_flags(tmp_path):
    conf = tmp_path / "v.toml"
    conf.write_text(f'output_dir = "{tmp_path / "from_file"}"\n')
    assert main(["--config", str(conf), "analyze", str(CORPUS3 / "com.example.tracker")]) == 0
    assert (tmp_path / "from_file" / "com.example.tracker.json").is_file()
    assert main(["analyze", str(CORPUS3 / "com.example.tracker"), "--config", str(conf),
                 "--out", str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "com.example.tracker.json").is_file()


def test_remote_mode_unreachable_is_pipeline_failure(tmp_path):
    c = cfg(tmp_path, mode="remote", endpoint="http://127.0.0.1:9/", request_timeout=2)
    assert cmd_analyze(CORPUS3 / "com.example.bulb", c) == 3


def test_failing_decompiler_is_a_usage_error(tmp_path):
    apk = tmp_path / "bulb.apk"
    apk.write_bytes(b"PK")
    assert cmd_analyze(apk, cfg(tmp_path, decompiler="false {apk} {out}")) == 2
    assert cmd_analyze(apk, cfg(tmp_path, decompiler="no-such-tool {apk}")) == 2
