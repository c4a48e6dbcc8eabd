"""CLI surface: synth -> features -> split -> train -> segment -> eval, exit codes."""

import json

import numpy as np
import pytest

from choreoseg.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A tiny synthetic dataset written to disk once for the whole module."""
    root = tmp_path_factory.mktemp("cli")
    code = main(["synth", "--seed", "3", "--videos", "5", "--frames", "420",
                 "--fps", "60", "--tempo", "120", "--out", str(root / "ds")])
    assert code == 0
    return root


def test_synth_writes_index(workspace, capsys):
    index = json.loads((workspace / "ds" / "index.json").read_text())
    assert len(index["entries"]) == 5


def test_features_command(workspace, tmp_path, capsys):
    kp = workspace / "ds" / "keypoints" / "synth000.jsonl"
    wav = workspace / "ds" / "audio" / "synth000.wav"
    code, out = _run(capsys, "features", "--keypoints", str(kp), "--audio", str(wav),
                     "--fps", "60", "--video-id", "v0", "--out", str(tmp_path))
    assert code == 0
    info = json.loads(out)
    assert (tmp_path / info["bones"]).exists()
    assert (tmp_path / info["spectrogram"]).exists()


def test_split_train_segment_eval(workspace, capsys):
    ds = workspace / "ds"
    code, out = _run(capsys, "split", "--index", str(ds / "index.json"),
                     "--seed", "1", "--divisions", "2", "--out", str(workspace / "div.json"))
    assert code == 0
    assert json.loads(out)["divisions"] == 2

    cfg_path = workspace / "config.json"
    cfg_path.write_text(json.dumps({"train": {"max_epochs": 1, "patience": 10}}))
    code, out = _run(capsys, "train", "--index", str(ds / "index.json"),
                     "--divisions", str(workspace / "div.json"), "--division", "0",
                     "--config", str(cfg_path), "--out", str(workspace / "model.dseg"))
    assert code == 0
    assert json.loads(out)["epochs_run"] == 1

    code, out = _run(capsys, "segment", "--model", str(workspace / "model.dseg"),
                     "--bones", str(ds / "features" / "synth000.bones.npy"),
                     "--spectrogram", str(ds / "features" / "synth000.spec.dspc"),
                     "--fps", "60", "--out-prefix", str(workspace / "seg" / "synth000"))
    assert code == 0
    csv_lines = (workspace / "seg" / "synth000.prob.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "frame,probability"
    peaks = json.loads((workspace / "seg" / "synth000.peaks.json").read_text())
    assert peaks["threshold_used"] == 0.3

    code, out = _run(capsys, "eval", "--model", str(workspace / "model.dseg"),
                     "--index", str(ds / "index.json"),
                     "--divisions", str(workspace / "div.json"), "--part", "test")
    assert code == 0
    report = json.loads(out)
    assert set(report) >= {"precision", "recall", "f_measure", "test_loss", "per_video"}


def test_missing_file_is_usage_error(tmp_path, capsys):
    code, _ = _run(capsys, "segment", "--model", str(tmp_path / "absent.dseg"),
                   "--bones", str(tmp_path / "b.npy"),
                   "--spectrogram", str(tmp_path / "s.dspc"),
                   "--fps", "60", "--out-prefix", str(tmp_path / "x"))
    assert code == 1


def test_bad_config_is_usage_error(workspace, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"train": {"bogus_field": 1}}))
    code, _ = _run(capsys, "train", "--index", str(workspace / "ds" / "index.json"),
                   "--divisions", str(workspace / "div.json"),
                   "--config", str(bad), "--out", str(tmp_path / "m.dseg"))
    assert code == 1
