import json
import subprocess
import sys

import pytest

from camtestbed import scenarios
from camtestbed.cli import main


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "camtestbed", *args], capture_output=True, text=True)


def test_list(capsys):
    assert main(["list"]) == 0
    assert capsys.readouterr().out.split() == scenarios.list_scenarios()


def test_show(capsys):
    assert main(["show", "dos-flood"]) == 0
    assert json.loads(capsys.readouterr().out)["attacker"]["flood"]["rate"] == 100
    assert main(["show", "nope"]) == 2


@pytest.mark.parametrize("name", scenarios.list_scenarios())
def test_run_every_builtin_exits_zero(name, tmp_path, capsys):
    out = tmp_path / name
    assert main(["run", name, "--out", str(out)]) == 0
    assert (out / "report.json").exists()
    assert "FAIL" not in capsys.readouterr().out


def test_run_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        assert main(["run", "motion-suppress", "--seed", "7", "--out", str(d)]) == 0
        outs.append([(p.relative_to(d), p.read_bytes()) for p in sorted(d.rglob("*")) if p.is_file()])
    assert outs[0] == outs[1]


def test_run_default_out_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["run", "motion-suppress", "--seed", "3"]) == 0
    assert (tmp_path / "runs" / "motion-suppress-3" / "report.json").exists()


def test_run_bad_config_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "x", "duration": "long"}))
    assert main(["run", str(bad)]) == 2
    assert "duration" in capsys.readouterr().err
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_run_custom_failing_scenario_exits_one(tmp_path):
    cfg = {"name": "tp", "duration": 5, "app": {"third_party_user": {"user": "cam", "password": "pw", "at": 0.1}},
           "thirdparty": {"uri": "rtsp://cam:pw@10.0.0.7/stream/1", "start": 1},
           "attacker": {"taps": [["camera", "client"]], "extract": {"tap": "camera-client", "expect": "none"}}}
    path = tmp_path / "tp.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 1


def test_analyze_commands(tmp_path, capsys):
    main(["run", "eavesdrop-thirdparty", "--out", str(tmp_path / "e")])
    capsys.readouterr()
    assert main(["analyze", "extract", str(tmp_path / "e/captures/camera-client.jsonl"),
                 "--out", str(tmp_path / "video.264")]) == 0
    assert capsys.readouterr().out.startswith("590 frames (59 I-frames)")
    assert (tmp_path / "video.264").read_bytes().startswith(b"\x00\x00\x00\x01\x65")

    main(["run", "motion-oracle-overnight", "--out", str(tmp_path / "m")])
    capsys.readouterr()
    assert main(["analyze", "histogram", str(tmp_path / "m/captures/camera-cloud.jsonl"), "--bin", "3600"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "bin_start_ms,count" and len(rows) == 9
    assert sum(int(r.split(",")[1]) for r in rows[1:]) == 826
    assert main(["analyze", "histogram", str(tmp_path / "m/captures/camera-cloud.jsonl"), "--bin", "0"]) == 2


def test_analyze_unreadable_capture(tmp_path):
    bad = tmp_path / "x.jsonl"
    bad.write_text("not json\n")
    assert main(["analyze", "extract", str(bad)]) == 2
    assert main(["analyze", "histogram", str(tmp_path / "none.jsonl")]) == 2


def test_analyze_extract_nothing(tmp_path, capsys):
    main(["run", "baseline-proprietary", "--out", str(tmp_path / "b")])
    capsys.readouterr()
    assert main(["analyze", "extract", str(tmp_path / "b/captures/app-camera.jsonl")]) == 0
    assert capsys.readouterr().out.strip() == "NoValidFrames"


def test_cvss_subcommand():
    ok = run_cli("cvss", "score", "CVSS:3.1/AV:A/AC:L/PR:N/UI:N/S:U/C:L/I:N/A:L")
    assert (ok.returncode, ok.stdout.strip()) == (0, "5.4 Medium")
    bad = run_cli("cvss", "score", "CVSS:3.1/AV:X")
    assert bad.returncode == 2 and "MalformedVector" in bad.stderr
