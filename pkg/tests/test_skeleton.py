"""Pose ingestion: dancer resolution, gap interpolation, bone normalization."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from choreoseg import skeleton
from choreoseg.errors import FormatError


def _person(rng, conf=None):
    kp = rng.uniform(0, 1000, size=(68, 2))
    c = np.full(68, 0.5) if conf is None else np.full(68, conf / 68.0)
    return skeleton.PersonDetection(keypoints=kp, confidences=c)


def test_topology_is_a_tree():
    topo = skeleton.default_topology()
    assert topo.edges.shape == (67, 2)


def test_topology_file_roundtrip(tmp_path):
    topo = skeleton.default_topology()
    path = tmp_path / "topo.json"
    skeleton.save_topology(path, topo)
    loaded = skeleton.load_topology(path)
    assert np.array_equal(loaded.edges, topo.edges)


def test_topology_rejects_cycle(tmp_path):
    edges = skeleton.default_topology().edges.copy()
    edges[-1] = edges[0]  # duplicate edge creates a cycle / disconnects a node
    path = tmp_path / "bad.json"
    with open(path, "w") as fh:
        json.dump(edges.tolist(), fh)
    with pytest.raises(FormatError):
        skeleton.load_topology(path)


# ---------------------------------------------------------- resolve_dancer

def test_resolve_single_person_is_identity():
    rng = np.random.default_rng(0)
    person = _person(rng)
    frame = skeleton.RawDetectionFrame(persons=[person], frame_index=0)
    assert skeleton.resolve_dancer(frame) is person


def test_resolve_picks_highest_confidence_sum():
    rng = np.random.default_rng(1)
    weak = _person(rng, conf=30.0)
    strong = _person(rng, conf=45.0)
    frame = skeleton.RawDetectionFrame(persons=[weak, strong], frame_index=0)
    assert skeleton.resolve_dancer(frame) is strong


def test_resolve_tie_breaks_to_lowest_index():
    rng = np.random.default_rng(2)
    a = _person(rng, conf=40.0)
    b = _person(rng, conf=40.0)
    # check every ordering of the tie
    for persons, expected in ([[a, b], a], [[b, a], b]):
        frame = skeleton.RawDetectionFrame(persons=persons, frame_index=0)
        assert skeleton.resolve_dancer(frame) is expected


def test_resolve_empty_frame():
    assert skeleton.resolve_dancer(skeleton.RawDetectionFrame(persons=[], frame_index=3)) is None


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=5), st.integers(0, 2**31 - 1))
def test_resolve_result_is_member(confs, seed):
    rng = np.random.default_rng(seed)
    persons = [_person(rng, conf=c * 68.0) for c in confs]
    frame = skeleton.RawDetectionFrame(persons=persons, frame_index=0)
    assert skeleton.resolve_dancer(frame) in persons


# ------------------------------------------------------ interpolate_missing

def _track_with_gaps(detections, T, fps=60.0):
    """detections: {frame: (x, y)} for keypoint 0; everything else detected at 0."""
    frames = np.zeros((T, 68, 2))
    mask = np.zeros((T, 68), dtype=bool)
    mask[:, 1:] = True
    for t, xy in detections.items():
        frames[t, 0] = xy
        mask[t, 0] = True
    return skeleton.KeypointSequence(frames=frames, detected_mask=mask, fps=fps)


def test_interpolate_midpoint():
    track = _track_with_gaps({10: (0.0, 0.0), 20: (10.0, 20.0)}, T=30)
    out = skeleton.interpolate_missing(track)
    assert np.allclose(out.frames[15, 0], [5.0, 10.0])


def test_interpolate_weighted():
    # t=12 between t_p=10 and t_n=20: weights 0.8 / 0.2
    track = _track_with_gaps({10: (0.0, 0.0), 20: (10.0, 20.0)}, T=30)
    out = skeleton.interpolate_missing(track)
    assert np.allclose(out.frames[12, 0], [2.0, 4.0])


def test_interpolate_constant_extension():
    track = _track_with_gaps({5: (7.0, -3.0)}, T=12)
    out = skeleton.interpolate_missing(track)
    assert np.allclose(out.frames[:, 0, 0], 7.0)
    assert np.allclose(out.frames[:, 0, 1], -3.0)


def test_interpolate_never_detected_goes_to_origin():
    track = _track_with_gaps({}, T=8)
    out = skeleton.interpolate_missing(track)
    assert np.array_equal(out.frames[:, 0], np.zeros((8, 2)))


def test_interpolate_idempotent_and_preserves_detected():
    rng = np.random.default_rng(7)
    frames = rng.uniform(0, 1920, size=(40, 68, 2))
    mask = rng.random((40, 68)) > 0.3
    mask[0, :] = True
    track = skeleton.KeypointSequence(frames=frames, detected_mask=mask, fps=60)
    once = skeleton.interpolate_missing(track)
    assert np.isfinite(once.frames).all()
    assert np.array_equal(once.frames[mask], frames[mask])  # bit-identical where detected
    twice = skeleton.interpolate_missing(once)
    assert np.array_equal(twice.frames, once.frames)


# ------------------------------------------------------------ bone_vectors

def test_bone_lengths_are_half():
    rng = np.random.default_rng(8)
    kp = rng.uniform(0, 1000, size=(68, 2))
    bones = skeleton.bone_vectors(kp, skeleton.default_topology())
    lengths = np.linalg.norm(bones, axis=1)
    nonzero = lengths > 0
    assert np.all(np.abs(lengths[nonzero] - 0.5) < 1e-6)
    assert bones.shape == (67, 2)


def test_bone_simple_scaling():
    topo = skeleton.SkeletonTopology(skeleton.default_topology().edges)
    kp = np.zeros((68, 2))
    # first edge of the default topology is pelvis(19) -> neck(18)
    kp[19] = (0.0, 0.0)
    kp[18] = (3.0, 4.0)
    bones = skeleton.bone_vectors(kp, topo)
    assert np.allclose(bones[0], [0.3, 0.4])


def test_bone_degenerate_is_zero():
    kp = np.zeros((68, 2))
    bones = skeleton.bone_vectors(kp, skeleton.default_topology())
    assert np.array_equal(bones, np.zeros((67, 2)))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 50.0), st.floats(-5000.0, 5000.0), st.floats(-5000.0, 5000.0),
       st.integers(0, 2**31 - 1))
def test_bone_invariance_under_similarity(scale, tx, ty, seed):
    rng = np.random.default_rng(seed)
    kp = rng.uniform(0, 1000, size=(68, 2))
    topo = skeleton.default_topology()
    base = skeleton.bone_vectors(kp, topo)
    transformed = kp * scale + np.array([tx, ty])
    moved = skeleton.bone_vectors(transformed, topo)
    assert np.allclose(moved, base, atol=1e-9)


def test_sequence_bones_match_per_frame():
    rng = np.random.default_rng(9)
    frames = rng.uniform(0, 1000, size=(6, 68, 2))
    track = skeleton.KeypointSequence(frames=frames, detected_mask=np.ones((6, 68), bool), fps=60)
    topo = skeleton.default_topology()
    flat = skeleton.bones_for_sequence(track, topo)
    assert flat.shape == (6, 134)
    for t in range(6):
        assert np.allclose(flat[t].reshape(67, 2), skeleton.bone_vectors(frames[t], topo))


# ------------------------------------------------------------------- I/O

def test_jsonl_roundtrip(tmp_path):
    rng = np.random.default_rng(10)
    path = tmp_path / "kp.jsonl"
    with open(path, "w") as fh:
        for idx in range(4):
            kp = rng.uniform(0, 100, size=(68, 3)).tolist()
            fh.write(json.dumps({"idx": idx, "people": [{"kp": kp}]}) + "\n")
    frames = skeleton.frames_from_jsonl(path)
    assert len(frames) == 4
    assert all(len(f.persons) == 1 for f in frames)
    seq = skeleton.sequence_from_frames(frames, fps=59.94)
    assert len(seq) == 4 and seq.fps == 59.94


def test_jsonl_missing_frames_become_empty(tmp_path):
    path = tmp_path / "kp.jsonl"
    kp = np.zeros((68, 3)).tolist()
    with open(path, "w") as fh:
        fh.write(json.dumps({"idx": 0, "people": [{"kp": kp}]}) + "\n")
        fh.write(json.dumps({"idx": 3, "people": [{"kp": kp}]}) + "\n")
    frames = skeleton.frames_from_jsonl(path)
    assert len(frames) == 4
    assert frames[1].persons == [] and frames[2].persons == []


def test_jsonl_rejects_wrong_keypoint_count(tmp_path):
    path = tmp_path / "kp.jsonl"
    with open(path, "w") as fh:
        fh.write(json.dumps({"idx": 0, "people": [{"kp": np.zeros((67, 3)).tolist()}]}) + "\n")
    with pytest.raises(FormatError):
        skeleton.frames_from_jsonl(path)


def test_zero_confidence_counts_as_undetected(tmp_path):
    path = tmp_path / "kp.jsonl"
    kp = np.ones((68, 3))
    kp[5, 2] = 0.0
    with open(path, "w") as fh:
        fh.write(json.dumps({"idx": 0, "people": [{"kp": kp.tolist()}]}) + "\n")
    seq = skeleton.sequence_from_frames(skeleton.frames_from_jsonl(path), fps=60)
    assert not seq.detected_mask[0, 5]
    assert seq.detected_mask[0, 4]


def test_alphapose_adapter(tmp_path):
    rng = np.random.default_rng(11)
    entries = []
    for idx in (0, 0, 2):  # two people on frame 0, nobody on frame 1
        entries.append({
            "image_id": f"{idx}.jpg",
            "keypoints": rng.uniform(0, 100, size=68 * 3).tolist(),
            "score": 1.0,
        })
    src = tmp_path / "alphapose-results.json"
    with open(src, "w") as fh:
        json.dump(entries, fh)
    out = tmp_path / "kp.jsonl"
    total = skeleton.convert_alphapose_results(src, out)
    assert total == 3
    frames = skeleton.frames_from_jsonl(out)
    assert len(frames[0].persons) == 2
    assert len(frames[1].persons) == 0
    assert len(frames[2].persons) == 1
