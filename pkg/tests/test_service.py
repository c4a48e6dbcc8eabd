"""HTTP service contracts: registration, segmentation caching, annotations, persistence."""

import io
import json
import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from choreoseg import audio, labels, segnet, service, skeleton
from choreoseg.pipeline import synth


@pytest.fixture(scope="module")
def model_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "model.dseg"
    cfg = segnet.ModelConfig()
    segnet.save_model(path, segnet.init_params(cfg, seed=0), cfg)
    return path


@pytest.fixture()
def synth_video(tmp_path):
    video = synth.synth_dataset(seed=21, n_videos=1, total_frames=420, fps=60, tempo_bpm=120)[0]
    kp_path = tmp_path / "kp.jsonl"
    synth._write_keypoints_jsonl(kp_path, video, np.random.default_rng(0))
    wav_path = tmp_path / "a.wav"
    audio.save_wav(wav_path, video.waveform)
    return video, kp_path, wav_path


def _register(client, video, kp_path, wav_path, video_id=None):
    return client.post(
        "/api/videos",
        data={
            "video_id": video_id or video.video_id,
            "fps": str(video.meta.fps),
            "tempo_bpm": str(video.meta.tempo_bpm),
            "n_beats": str(video.meta.n_beats),
        },
        files={
            "keypoints": ("kp.jsonl", kp_path.read_bytes()),
            "wav": ("a.wav", wav_path.read_bytes()),
        },
    )


def test_register_and_list(tmp_path, model_path, synth_video):
    video, kp_path, wav_path = synth_video
    app = service.create_app(tmp_path / "data", model_path)
    client = TestClient(app)
    r = _register(client, video, kp_path, wav_path)
    assert r.status_code == 201, r.text
    body = r.json()
    assert body["video_id"] == video.video_id
    assert body["total_frames"] == video.meta.total_frames
    assert body["onset_c0"] == pytest.approx(video.meta.onset_c0, abs=1e-6)

    r = client.get("/api/videos")
    assert [v["video_id"] for v in r.json()["videos"]] == [video.video_id]


def test_register_duplicate_conflicts(tmp_path, model_path, synth_video):
    video, kp_path, wav_path = synth_video
    client = TestClient(service.create_app(tmp_path / "data", model_path))
    assert _register(client, video, kp_path, wav_path).status_code == 201
    assert _register(client, video, kp_path, wav_path).status_code == 409


def test_register_bad_keypoints_rejected(tmp_path, model_path):
    client = TestClient(service.create_app(tmp_path / "data", model_path))
    bad = json.dumps({"idx": 0, "people": [{"kp": [[0, 0, 1]] * 67}]}) + "\n"
    r = client.post(
        "/api/videos",
        data={"video_id": "bad", "fps": "60", "tempo_bpm": "120", "n_beats": "4"},
        files={"keypoints": ("kp.jsonl", bad.encode()),
               "wav": ("a.wav", b"RIFFxxxx")},
    )
    assert r.status_code == 400


def test_segment_defaults_and_determinism(tmp_path, model_path, synth_video):
    video, kp_path, wav_path = synth_video
    client = TestClient(service.create_app(tmp_path / "data", model_path))
    _register(client, video, kp_path, wav_path)
    r1 = client.post(f"/api/videos/{video.video_id}/segment", json={})
    r2 = client.post(f"/api/videos/{video.video_id}/segment", json={})
    assert r1.status_code == 200
    assert r1.content == r2.content  # byte-identical
    body = r1.json()
    assert body["threshold_used"] == 0.25
    assert body["min_distance_used"] == 60
    assert body["window_used"] == 20
    assert len(body["probability"]) == video.meta.total_frames
    assert all(b - a >= 60 for a, b in zip(body["peaks"], body["peaks"][1:]))


def test_segment_monotone_in_threshold(tmp_path, model_path, synth_video):
    video, kp_path, wav_path = synth_video
    client = TestClient(service.create_app(tmp_path / "data", model_path))
    _register(client, video, kp_path, wav_path)
    counts = []
    for h in (0.9, 0.6, 0.4, 0.2, 0.05):
        r = client.post(f"/api/videos/{video.video_id}/segment", json={"h": h, "d": 0})
        counts.append(len(r.json()["peaks"]))
    assert counts == sorted(counts)  # lowering h never loses peaks


def test_segment_large_distance_keeps_one_peak(tmp_path, model_path, synth_video):
    video, kp_path, wav_path = synth_video
    client = TestClient(service.create_app(tmp_path / "data", model_path))
    _register(client, video, kp_path, wav_path)
    r = client.post(f"/api/videos/{video.video_id}/segment",
                    json={"h": 0.0, "d": video.meta.total_frames + 1})
    assert len(r.json()["peaks"]) <= 1


def test_segment_unknown_video_404(tmp_path, model_path):
    client = TestClient(service.create_app(tmp_path / "data", model_path))
    assert client.post("/api/videos/nope/segment", json={}).status_code == 404


def test_segment_without_model_503(tmp_path, synth_video):
    video, kp_path, wav_path = synth_video
    client = TestClient(service.create_app(tmp_path / "data", model_path=None))
    _register(client, video, kp_path, wav_path)
    assert client.post(f"/api/videos/{video.video_id}/segment", json={}).status_code == 503


def test_candidates_count_and_shape(tmp_path, model_path, synth_video):
    video, kp_path, wav_path = synth_video
    client = TestClient(service.create_app(tmp_path / "data", model_path))
    _register(client, video, kp_path, wav_path)
    r = client.get(f"/api/videos/{video.video_id}/candidates")
    cands = r.json()["candidates"]
    assert len(cands) == 2 * video.meta.n_beats
    assert cands[0]["is_beat"] and not cands[1]["is_beat"]
    assert cands[0]["time_seconds"] == pytest.approx(video.meta.onset_c0, abs=1e-6)


def test_annotation_roundtrip_to_groundtruth(tmp_path, model_path, synth_video):
    video, kp_path, wav_path = synth_video
    client = TestClient(service.create_app(tmp_path / "data", model_path))
    _register(client, video, kp_path, wav_path)
    vid = video.video_id
    assert client.get(f"/api/videos/{vid}/groundtruth").status_code == 404
    for i, pts in enumerate(([100, 200], [101, 199], [100, 205])):
        r = client.post(f"/api/videos/{vid}/annotations",
                        json={"annotator": f"p{i}", "points_frames": pts})
        assert r.status_code == 201
    r = client.get(f"/api/videos/{vid}/groundtruth")
    body = r.json()
    assert body["n_annotators"] == 3
    values = np.array(body["values"])
    assert values.size == video.meta.total_frames
    sigma = labels.sigma_frames(video.meta)
    ann = labels.AnnotationSet(annotators=[
        labels.AnnotatorPoints("p0", [100, 200]),
        labels.AnnotatorPoints("p1", [101, 199]),
        labels.AnnotatorPoints("p2", [100, 205]),
    ])
    expected = labels.ground_truth(ann, sigma, video.meta.total_frames).values
    assert np.allclose(values, expected, atol=1e-9)


def test_annotation_validation(tmp_path, model_path, synth_video):
    video, kp_path, wav_path = synth_video
    client = TestClient(service.create_app(tmp_path / "data", model_path))
    _register(client, video, kp_path, wav_path)
    vid = video.video_id
    r = client.post(f"/api/videos/{vid}/annotations",
                    json={"annotator": "x", "points_frames": [200, 100]})
    assert r.status_code == 400
    r = client.post(f"/api/videos/{vid}/annotations",
                    json={"annotator": "x", "points_frames": [video.meta.total_frames]})
    assert r.status_code == 400
    assert client.post("/api/videos/nope/annotations",
                       json={"annotator": "x", "points_frames": [1]}).status_code == 404


def test_persistence_survives_restart(tmp_path, model_path, synth_video):
    video, kp_path, wav_path = synth_video
    data_dir = tmp_path / "data"
    client = TestClient(service.create_app(data_dir, model_path))
    _register(client, video, kp_path, wav_path)
    client.post(f"/api/videos/{video.video_id}/annotations",
                json={"annotator": "p0", "points_frames": [50]})
    seg1 = client.post(f"/api/videos/{video.video_id}/segment", json={})

    # a fresh app instance on the same directory sees everything
    client2 = TestClient(service.create_app(data_dir, model_path))
    assert client2.get("/api/videos").json()["videos"][0]["video_id"] == video.video_id
    seg2 = client2.post(f"/api/videos/{video.video_id}/segment", json={})
    assert seg1.content == seg2.content
    ann = client2.get(f"/api/videos/{video.video_id}/annotations").json()
    assert ann["annotators"] == [{"id": "p0", "points_frames": [50]}]


def test_probability_csv(tmp_path, model_path, synth_video):
    video, kp_path, wav_path = synth_video
    client = TestClient(service.create_app(tmp_path / "data", model_path))
    _register(client, video, kp_path, wav_path)
    r = client.get(f"/api/videos/{video.video_id}/probability")
    assert r.status_code == 200
    lines = r.text.strip().splitlines()
    assert lines[0] == "frame,probability"
    assert len(lines) == video.meta.total_frames + 1


def test_concurrent_segments_do_not_interfere(tmp_path, model_path):
    videos = synth.synth_dataset(seed=31, n_videos=2, total_frames=420, fps=60, tempo_bpm=120)
    client = TestClient(service.create_app(tmp_path / "data", model_path))
    rng = np.random.default_rng(0)
    for v in videos:
        kp = tmp_path / f"{v.video_id}.jsonl"
        synth._write_keypoints_jsonl(kp, v, rng)
        wav = tmp_path / f"{v.video_id}.wav"
        audio.save_wav(wav, v.waveform)
        _register(client, v, kp, wav)

    serial = {v.video_id: client.post(f"/api/videos/{v.video_id}/segment", json={}).content
              for v in videos}

    results = {}
    def hit(vid):
        for _ in range(5):
            results.setdefault(vid, []).append(
                client.post(f"/api/videos/{vid}/segment", json={}).content
            )
    threads = [threading.Thread(target=hit, args=(v.video_id,)) for v in videos for _ in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for vid, bodies in results.items():
        assert all(b == serial[vid] for b in bodies)
