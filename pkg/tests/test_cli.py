from __future__ import annotations

import json
import shutil

from apex.cli import main


def test_synth_then_replay_roundtrip(tmp_path, capsys):
    out = tmp_path / "synth"
    assert main([
        "synth", "--sop", "rie", "--frames-per-step", "4",
        "--flip", "0.2", "--seed", "9", "--out", str(out),
    ]) == 0
    rec = out / "rie_seed9.rec"
    truth = out / "rie_seed9.truth.json"
    assert rec.exists() and truth.exists()

    replay_out = tmp_path / "replay"
    assert main([
        "replay", "--recording", str(rec), "--truth", str(truth),
        "--answer", "oracle", "--out", str(replay_out),
    ]) == 0
    metrics = json.loads((replay_out / "metrics.json").read_text())
    assert metrics["frames"] == 32
    log = json.loads((replay_out / "session_log.json").read_text())
    assert log["partial"] is False


def test_replay_golden_fixture(fixtures_dir, capsys):
    assert main([
        "replay",
        "--recording", str(fixtures_dir / "rie_golden.rec"),
        "--truth", str(fixtures_dir / "rie_golden.truth.json"),
    ]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["step_accuracy"] == 1.0
    assert printed["hitl_count"] == 0


def test_bench_suite_pass_and_fail(tmp_path, fixtures_dir, capsys):
    suite = tmp_path / "suite"
    suite.mkdir()
    for name in ("rie_golden.rec", "rie_golden.truth.json"):
        shutil.copy(fixtures_dir / name, suite / name)
    (suite / "suite.json").write_text(json.dumps({
        "cases": [
            {
                "name": "golden",
                "recording": "rie_golden.rec",
                "truth": "rie_golden.truth.json",
                "answer": "oracle",
                "expect": {"min_step_accuracy": 1.0, "max_hitl": 0, "alerts": 0},
            }
        ]
    }))
    assert main(["bench", "--suite", str(suite), "--out", str(tmp_path / "bench")]) == 0
    table = capsys.readouterr().out
    assert "golden" in table and "1.0000" in table
    report = json.loads((tmp_path / "bench" / "bench.json").read_text())
    assert report["golden"]["step_accuracy"] == 1.0

    # impossible expectation flips the exit code
    (suite / "suite.json").write_text(json.dumps({
        "cases": [
            {
                "name": "golden",
                "recording": "rie_golden.rec",
                "truth": "rie_golden.truth.json",
                "expect": {"max_hitl": -1},
            }
        ]
    }))
    assert main(["bench", "--suite", str(suite)]) == 1
