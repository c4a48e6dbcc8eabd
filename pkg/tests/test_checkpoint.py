"""Checkpoint binary format."""

import numpy as np
import pytest

from choreoseg.errors import FormatError
from choreoseg.nn.checkpoint import load_checkpoint, save_checkpoint


def test_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {
        "a/weight": rng.normal(size=(3, 4)).astype(np.float32),
        "a/bias": rng.normal(size=4).astype(np.float32),
        "scalar": np.float32(2.5).reshape(()),
    }
    path = tmp_path / "x.dseg"
    save_checkpoint(path, tensors, meta={"k": [1, 2], "name": "model"})
    loaded, meta = load_checkpoint(path)
    assert meta == {"k": [1, 2], "name": "model"}
    assert set(loaded) == set(tensors)
    for name, arr in tensors.items():
        assert loaded[name].shape == np.asarray(arr).shape
        assert np.array_equal(loaded[name], arr)


def test_magic_and_version(tmp_path):
    path = tmp_path / "x.dseg"
    save_checkpoint(path, {"t": np.zeros(2, dtype=np.float32)})
    raw = path.read_bytes()
    assert raw[:4] == b"DSEG"
    assert raw[4] == 1


def test_float64_values_stored_as_f32(tmp_path):
    path = tmp_path / "x.dseg"
    v = np.array([1.0 / 3.0], dtype=np.float64)
    save_checkpoint(path, {"t": v})
    loaded, _ = load_checkpoint(path)
    assert loaded["t"].dtype == np.float32
    assert loaded["t"][0] == np.float32(1.0 / 3.0)


def test_deterministic_bytes(tmp_path):
    tensors = {"b": np.ones(3, dtype=np.float32), "a": np.zeros(2, dtype=np.float32)}
    p1, p2 = tmp_path / "1.dseg", tmp_path / "2.dseg"
    save_checkpoint(p1, tensors, meta={"x": 1})
    save_checkpoint(p2, dict(reversed(tensors.items())), meta={"x": 1})
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.dseg"
    path.write_bytes(b"XXXX\x01")
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_truncation_rejected(tmp_path):
    path = tmp_path / "x.dseg"
    save_checkpoint(path, {"t": np.ones(100, dtype=np.float32)})
    raw = path.read_bytes()
    (tmp_path / "cut.dseg").write_bytes(raw[:-10])
    with pytest.raises(FormatError):
        load_checkpoint(tmp_path / "cut.dseg")


def test_reserved_name_rejected(tmp_path):
    with pytest.raises(FormatError):
        save_checkpoint(tmp_path / "x.dseg", {"meta/json": np.zeros(1)})
