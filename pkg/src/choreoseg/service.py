"""HTTP inference and annotation service.

Videos register with their metadata plus keypoint/audio artifacts; features
are computed once and cached on disk (directory per video, JSON metadata,
binary caches). Segmenting runs inference once per video and caches the
probability curve, so slider-driven re-requests only redo the cheap peak
picking. Writes to one video serialize behind a per-video lock; the model is
shared read-only.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse, Response
from pydantic import BaseModel

from choreoseg import audio, labels, segnet, skeleton
from choreoseg.errors import ChoreosegError, FormatError, OnsetNotFound
from choreoseg.pipeline.peaks import enforce_min_distance, pick_peaks

DEFAULT_THRESHOLD = 0.25
DEFAULT_MIN_DISTANCE = 60
PEAK_WINDOW = 20


class SegmentRequest(BaseModel):
    h: float | None = None  # peak threshold; the UI's sensitivity slider lowers it
    d: float | None = None  # minimum distance between peaks, frames


class AnnotationSubmission(BaseModel):
    annotator: str
    points_frames: list[int]


class VideoStore:
    """Directory-per-video persistence with per-video write locks."""

    def __init__(self, root: Path):
        self.root = Path(root)
        (self.root / "videos").mkdir(parents=True, exist_ok=True)
        self._locks: dict = {}
        self._locks_guard = threading.Lock()

    def _lock(self, video_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(video_id, threading.Lock())

    def dir(self, video_id: str) -> Path:
        return self.root / "videos" / video_id

    def exists(self, video_id: str) -> bool:
        return (self.dir(video_id) / "meta.json").exists()

    def list_ids(self) -> list:
        return sorted(p.parent.name for p in (self.root / "videos").glob("*/meta.json"))

    def meta(self, video_id: str) -> labels.VideoMeta:
        with open(self.dir(video_id) / "meta.json") as fh:
            return labels.meta_from_dict(json.load(fh))

    def register(self, meta: labels.VideoMeta, bones: np.ndarray,
                 spec: audio.MelSpectrogram, keypoints_raw: bytes, audio_raw: bytes) -> None:
        d = self.dir(meta.video_id)
        d.mkdir(parents=True, exist_ok=True)
        (d / "keypoints.jsonl").write_bytes(keypoints_raw)
        (d / "audio.wav").write_bytes(audio_raw)
        np.save(d / "bones.npy", bones.astype(np.float32))
        audio.save_spectrogram_cache(d / "spec.dspc", spec)
        with open(d / "annotations.json", "w") as fh:
            json.dump({"annotators": []}, fh)
        with open(d / "meta.json", "w") as fh:
            json.dump(labels.meta_dict(meta), fh)

    def features(self, video_id: str):
        d = self.dir(video_id)
        bones = np.load(d / "bones.npy").astype(np.float32)
        spec = audio.load_spectrogram_cache(d / "spec.dspc")
        return bones, spec

    def cached_probability(self, video_id: str):
        path = self.dir(video_id) / "prob.npy"
        if path.exists():
            return np.load(path)
        return None

    def cache_probability(self, video_id: str, p: np.ndarray) -> None:
        np.save(self.dir(video_id) / "prob.npy", p)

    def annotations(self, video_id: str) -> labels.AnnotationSet:
        with open(self.dir(video_id) / "annotations.json") as fh:
            data = json.load(fh)
        return labels.AnnotationSet(annotators=[
            labels.AnnotatorPoints(a["id"], [int(p) for p in a["points_frames"]])
            for a in data["annotators"]
        ])

    def append_annotation(self, video_id: str, annotator: str, points: list) -> int:
        path = self.dir(video_id) / "annotations.json"
        with open(path) as fh:
            data = json.load(fh)
        data["annotators"].append({"id": annotator, "points_frames": points})
        with open(path, "w") as fh:
            json.dump(data, fh)
        return len(data["annotators"])


def create_app(data_dir, model_path=None) -> FastAPI:
    store = VideoStore(Path(data_dir))
    model = {"params": None, "cfg": None}
    if model_path is not None and Path(model_path).exists():
        params, cfg, _ = segnet.load_model(model_path)
        model["params"], model["cfg"] = params, cfg

    app = FastAPI(title="choreoseg service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    app.state.store = store

    def _require_video(video_id: str) -> labels.VideoMeta:
        if not store.exists(video_id):
            raise HTTPException(status_code=404, detail=f"unknown video {video_id!r}")
        return store.meta(video_id)

    def _probability(video_id: str, meta: labels.VideoMeta) -> np.ndarray:
        p = store.cached_probability(video_id)
        if p is not None:
            return p
        if model["params"] is None:
            raise HTTPException(status_code=503, detail="no model checkpoint loaded")
        bones, spec = store.features(video_id)
        slices = audio.slices_for_video(spec, meta.total_frames, meta.fps).astype(np.float32)
        p = segnet.forward_full(bones, slices, model["params"], model["cfg"], training=False)
        with store._lock(video_id):
            store.cache_probability(video_id, p)
        return p

    @app.get("/api/videos")
    def list_videos():
        out = []
        for vid in store.list_ids():
            out.append(labels.meta_dict(store.meta(vid)))
        return {"videos": out}

    @app.post("/api/videos", status_code=201)
    async def register_video(
        video_id: str = Form(...),
        fps: float = Form(...),
        tempo_bpm: float = Form(...),
        n_beats: int = Form(...),
        c0_seconds: float | None = Form(None),
        keypoints: UploadFile = File(...),
        wav: UploadFile = File(...),
    ):
        """Register a video: parse artifacts, precompute features, persist."""
        if store.exists(video_id):
            raise HTTPException(status_code=409, detail=f"video {video_id!r} already registered")
        kp_raw = await keypoints.read()
        wav_raw = await wav.read()
        tmp = store.root / f".upload-{video_id}"
        tmp.mkdir(parents=True, exist_ok=True)
        try:
            kp_path = tmp / "kp.jsonl"
            kp_path.write_bytes(kp_raw)
            wav_path = tmp / "a.wav"
            wav_path.write_bytes(wav_raw)
            seq = skeleton.load_sequence(kp_path, fps)
            bones = skeleton.bones_for_sequence(seq, skeleton.default_topology())
            wave = audio.load_wav(wav_path)
            spec = audio.normalize_spectrogram(audio.mel_spectrogram(wave))
            onset = c0_seconds if c0_seconds is not None else audio.detect_onset(wave)
            meta = labels.VideoMeta(video_id=video_id, fps=fps, tempo_bpm=tempo_bpm,
                                    n_beats=n_beats, onset_c0=onset,
                                    total_frames=len(seq))
        except (FormatError, OnsetNotFound, ChoreosegError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        finally:
            for f in tmp.glob("*"):
                f.unlink()
            tmp.rmdir()
        with store._lock(video_id):
            store.register(meta, bones, spec, kp_raw, wav_raw)
        return {"video_id": video_id, "total_frames": meta.total_frames, "onset_c0": meta.onset_c0}

    @app.post("/api/videos/{video_id}/segment")
    def segment(video_id: str, req: SegmentRequest):
        """Probability curve + picked peaks; h and d default to the app's sliders."""
        meta = _require_video(video_id)
        h = DEFAULT_THRESHOLD if req.h is None else req.h
        d = DEFAULT_MIN_DISTANCE if req.d is None else req.d
        if not 0.0 <= h <= 1.0:
            raise HTTPException(status_code=400, detail="h must be in [0, 1]")
        if d < 0:
            raise HTTPException(status_code=400, detail="d must be non-negative")
        p = _probability(video_id, meta)
        found = pick_peaks(p, h, PEAK_WINDOW)
        found = enforce_min_distance(found, p, d)
        body = json.dumps({
            "video_id": video_id,
            "probability": [float(v) for v in p],
            "peaks": found,
            "threshold_used": h,
            "window_used": PEAK_WINDOW,
            "min_distance_used": d,
        }, sort_keys=True)
        return Response(content=body, media_type="application/json")

    @app.get("/api/videos/{video_id}/probability", response_class=PlainTextResponse)
    def probability_csv(video_id: str):
        meta = _require_video(video_id)
        p = _probability(video_id, meta)
        lines = ["frame,probability"]
        lines.extend(f"{t},{v:.9g}" for t, v in enumerate(p))
        return "\n".join(lines) + "\n"

    @app.get("/api/videos/{video_id}/candidates")
    def candidates(video_id: str):
        meta = _require_video(video_id)
        times = labels.candidates(meta)
        frames = labels.candidate_frames(meta)
        return {
            "video_id": video_id,
            "candidates": [
                {"index": i, "time_seconds": float(t), "frame": int(f), "is_beat": i % 2 == 0}
                for i, (t, f) in enumerate(zip(times, frames))
            ],
        }

    @app.get("/api/videos/{video_id}/annotations")
    def get_annotations(video_id: str):
        _require_video(video_id)
        ann = store.annotations(video_id)
        return {
            "video_id": video_id,
            "annotators": [
                {"id": a.annotator_id, "points_frames": a.points_frames}
                for a in ann.annotators
            ],
        }

    @app.post("/api/videos/{video_id}/annotations", status_code=201)
    def post_annotation(video_id: str, sub: AnnotationSubmission):
        meta = _require_video(video_id)
        pts = labels.AnnotatorPoints(sub.annotator, list(sub.points_frames))
        try:
            pts.validate(meta.total_frames)
        except ChoreosegError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        with store._lock(video_id):
            count = store.append_annotation(video_id, sub.annotator, list(sub.points_frames))
        return {"video_id": video_id, "annotators": count}

    @app.get("/api/videos/{video_id}/groundtruth")
    def groundtruth(video_id: str):
        meta = _require_video(video_id)
        ann = store.annotations(video_id)
        if not ann.annotators:
            raise HTTPException(status_code=404, detail="no annotations stored")
        sigma = labels.sigma_frames(meta)
        label = labels.ground_truth(ann, sigma, meta.total_frames)
        return {
            "video_id": video_id,
            "sigma_frames": sigma,
            "n_annotators": len(ann.annotators),
            "values": [float(v) for v in label.values],
        }

    return app
