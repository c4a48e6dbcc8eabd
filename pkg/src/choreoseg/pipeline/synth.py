"""Synthetic dance-video stand-ins with planted segment boundaries.

Each generated video is a stick figure whose whole pose flips around its root
every four beats (so every bone vector reverses direction at the planted
boundaries), plus an audio track with a click at every beat; boundary beats
get a longer, lower-pitched click. Three simulated annotators mark each
boundary with a small jitter, capped at sigma (a third of a beat) so the
ground-truth curve provably peaks within sigma of the boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from choreoseg import audio, labels, skeleton
from choreoseg.pipeline import features as feat
from choreoseg.pipeline.data import DatasetIndex, IndexEntry, VideoItem

N_ANNOTATORS = 3
BEATS_PER_SEGMENT = 4


@dataclass
class SynthVideo:
    video_id: str
    meta: labels.VideoMeta
    sequence: skeleton.KeypointSequence   # raw, with detection gaps
    waveform: audio.Waveform
    annotations: labels.AnnotationSet
    boundary_frames: list


def _base_pose(rng) -> np.ndarray:
    """A plausible 68-point stick figure as offsets from the pelvis, in pixels."""
    pose = np.zeros((skeleton.N_KEYPOINTS, 2))
    body = {
        19: (0, 0), 18: (0, -120), 17: (0, -150), 0: (0, -165),
        1: (-8, -170), 2: (8, -170), 3: (-16, -168), 4: (16, -168),
        5: (-45, -115), 6: (45, -115), 7: (-70, -60), 8: (70, -60),
        9: (-85, -5), 10: (85, -5), 11: (-25, 5), 12: (25, 5),
        13: (-28, 90), 14: (28, 90), 15: (-30, 175), 16: (30, 175),
        20: (-35, 195), 21: (35, 195), 22: (-45, 192), 23: (45, 192),
        24: (-25, 185), 25: (25, 185),
    }
    for idx, (x, y) in body.items():
        pose[idx] = (x, y)
    for root, wrist in ((26, 9), (47, 10)):
        hand_dir = -1.0 if root == 26 else 1.0
        pose[root] = pose[wrist] + (hand_dir * 6, 6)
        for finger in range(5):
            base = root + 1 + 4 * finger
            angle = -0.5 + 0.25 * finger + (0.0 if hand_dir < 0 else np.pi)
            step = np.array([np.cos(angle), np.sin(angle)]) * 7
            for j in range(4):
                pose[base + j] = pose[root] + step * (j + 1) + (hand_dir * 2 * finger, 4 * finger)
    pose += rng.normal(scale=2.0, size=pose.shape)
    return pose


def _click(sr: float, freq: float, amp: float, decay: float, length: float) -> np.ndarray:
    n = int(sr * length)
    t = np.arange(n) / sr
    return amp * np.cos(2 * np.pi * freq * t) * np.exp(-t / decay)


def synth_video(rng, video_id: str, total_frames: int, fps: float, tempo_bpm: float,
                sample_rate: float = 44100.0) -> SynthVideo:
    T = int(total_frames)
    beat = 60.0 / tempo_bpm
    sigma = labels.sigma_frames(
        labels.VideoMeta(video_id, fps, tempo_bpm, 1, 0.0, T)
    )

    # ---- audio: quiet noise + a click on every beat; the first click defines the onset
    n_samples = int(np.ceil(T / fps * sample_rate))
    wave = rng.normal(scale=0.01, size=n_samples)
    np.clip(wave, -0.45, 0.45, out=wave)
    c0_nominal = 0.4 + 0.2 * rng.random()
    onset_sample = int(round(c0_nominal * sample_rate))
    c0 = onset_sample / sample_rate
    usable = (T - 1) / fps - 0.1
    max_half_steps = int(np.floor((usable - c0) / (beat / 2.0)))
    n_beats = max(1, (max_half_steps + 1) // 2)
    for j in range(n_beats):
        start = int(round((c0 + j * beat) * sample_rate))
        if j > 0 and j % BEATS_PER_SEGMENT == 0:
            # segment-boundary accent: low fundamental plus a broadband thump
            click = _click(sample_rate, freq=60.0, amp=0.95, decay=0.08, length=0.15)
            burst = rng.normal(scale=0.25, size=click.size) * np.exp(-np.arange(click.size) / (0.08 * sample_rate))
            burst[0] = 0.0  # keep the first sample at the deterministic peak
            click = np.clip(click + burst, -0.98, 0.98)
        else:
            click = _click(sample_rate, freq=2500.0, amp=0.9, decay=0.01, length=0.04)
        end = min(n_samples, start + click.size)
        wave[start:end] = click[:end - start]
    waveform = audio.Waveform(samples=wave, sample_rate=sample_rate)

    # ---- planted boundaries on every 4th beat, kept clear of the video edges
    margin = int(np.ceil(3 * sigma)) + 5
    boundary_frames = []
    for j in range(BEATS_PER_SEGMENT, n_beats, BEATS_PER_SEGMENT):
        frame = int(round((c0 + j * beat) * fps))
        if margin <= frame < T - margin:
            boundary_frames.append(frame)

    # ---- keypoints: every segment re-poses the dancer by rotating each bone
    # about its joint by an independent random angle capped at +-40 degrees,
    # and flips the whole pose sign; flip + bounded articulation means every
    # bone vector reverses direction at every boundary while the exact
    # directions vary segment to segment without a fixed polarity
    pose = _base_pose(rng)
    topo = skeleton.default_topology()  # edges are listed parents-first
    base_bones = pose[topo.edges[:, 1]] - pose[topo.edges[:, 0]]
    seg_of_frame = np.zeros(T, dtype=np.int64)
    for b in boundary_frames:
        seg_of_frame[b:] += 1
    n_segments = len(boundary_frames) + 1
    seg_sign = np.array([1.0 if k % 2 == 0 else -1.0 for k in range(n_segments)])
    phi = rng.uniform(-0.7, 0.7, size=(n_segments, skeleton.N_BONES))
    cos_p, sin_p = np.cos(phi), np.sin(phi)
    seg_pose = np.zeros((n_segments, skeleton.N_KEYPOINTS, 2))
    for e, (parent, child) in enumerate(topo.edges):
        bx, by = base_bones[e]
        rx = seg_sign * (cos_p[:, e] * bx - sin_p[:, e] * by)
        ry = seg_sign * (sin_p[:, e] * bx + cos_p[:, e] * by)
        seg_pose[:, child, 0] = seg_pose[:, parent, 0] + rx
        seg_pose[:, child, 1] = seg_pose[:, parent, 1] + ry
    # mild per-joint scatter so the flip is not a perfectly clean two-state
    # signal, sized to the local bone scale to keep the reversal dominant
    scatter = np.full(skeleton.N_KEYPOINTS, 1.5)
    scatter[:26] = 10.0
    scatter[[0, 1, 2, 3, 4, 17]] = 2.0
    seg_pose += rng.normal(size=seg_pose.shape) * scatter[None, :, None]
    target = seg_pose[seg_of_frame]
    # ramp the transition over ~5 frames like a real movement
    kernel = np.ones(5) / 5.0
    padded = np.pad(target, ((2, 2), (0, 0), (0, 0)), mode="edge")
    target = np.apply_along_axis(lambda m: np.convolve(m, kernel, mode="valid"), 0, padded)
    root = np.array([960.0, 540.0])
    cam_shift = rng.normal(scale=2.0, size=(T, 1, 2)).cumsum(axis=0) * 0.1
    cam_scale = 1.0 + 0.05 * np.sin(np.arange(T) / fps * 0.5 + rng.random() * 6.28)
    noise = rng.normal(scale=1.5, size=(T, skeleton.N_KEYPOINTS, 2))
    frames = (target + noise) * cam_scale[:, None, None]
    frames += root[None, None, :] + cam_shift

    mask = rng.random((T, skeleton.N_KEYPOINTS)) >= 0.02
    missed = rng.random(T) < 0.005
    mask[missed] = False
    mask[0] = True  # anchor the first frame so every keypoint has a detection
    sequence = skeleton.KeypointSequence(frames=frames, detected_mask=mask, fps=fps)

    # ---- simulated annotators: planted boundary +- jitter capped at sigma
    jit = int(np.floor(sigma))
    annotators = []
    for a in range(N_ANNOTATORS):
        pts = [int(np.clip(b + rng.integers(-jit, jit + 1), 0, T - 1)) for b in boundary_frames]
        annotators.append(labels.AnnotatorPoints(annotator_id=f"sim{a}", points_frames=pts))
    meta = labels.VideoMeta(video_id=video_id, fps=fps, tempo_bpm=tempo_bpm,
                            n_beats=n_beats, onset_c0=c0, total_frames=T)
    annotations = labels.AnnotationSet(annotators=annotators)
    annotations.validate(T)
    return SynthVideo(video_id=video_id, meta=meta, sequence=sequence,
                      waveform=waveform, annotations=annotations,
                      boundary_frames=boundary_frames)


def synth_dataset(seed: int, n_videos: int, total_frames: int, fps: float,
                  tempo_bpm: float) -> list:
    """Deterministic list of SynthVideo; frame counts vary a little around
    `total_frames` so videos are not all the same length."""
    rng = np.random.default_rng(seed)
    videos = []
    for v in range(n_videos):
        T = total_frames + int(rng.integers(-40, 41))
        videos.append(synth_video(rng, f"synth{v:03d}", T, fps, tempo_bpm))
    return videos


def materialize_item(video: SynthVideo,
                     topo: skeleton.SkeletonTopology | None = None,
                     spec_cfg: audio.SpectrogramConfig = audio.SpectrogramConfig()) -> VideoItem:
    """Run the real feature/label path over a synthetic video."""
    topo = topo if topo is not None else skeleton.default_topology()
    seq = skeleton.interpolate_missing(video.sequence)
    bones = skeleton.bones_for_sequence(seq, topo)
    spec = audio.normalize_spectrogram(audio.mel_spectrogram(video.waveform, spec_cfg))
    slices = audio.slices_for_video(spec, video.meta.total_frames, video.meta.fps)
    label = labels.ground_truth(
        video.annotations, labels.sigma_frames(video.meta), video.meta.total_frames
    ).values
    return VideoItem(video_id=video.video_id, bones=bones.astype(np.float32),
                     slices=slices.astype(np.float32), label=label, meta=video.meta)


def materialize_items(videos, topo=None, spec_cfg=audio.SpectrogramConfig()) -> list:
    topo = topo if topo is not None else skeleton.default_topology()
    return [materialize_item(v, topo, spec_cfg) for v in videos]


# ---------------------------------------------------------------- disk form

def _write_keypoints_jsonl(path, video: SynthVideo, rng) -> None:
    seq = video.sequence
    with open(path, "w") as fh:
        for t in range(len(seq)):
            people = []
            if seq.detected_mask[t].any():
                conf = np.where(seq.detected_mask[t], 0.6 + 0.4 * rng.random(skeleton.N_KEYPOINTS), 0.0)
                kp = np.concatenate([seq.frames[t], conf[:, None]], axis=1)
                people.append({"kp": [[float(x), float(y), float(c)] for x, y, c in kp]})
            fh.write(json.dumps({"idx": t, "people": people}) + "\n")


def write_synth_dataset(videos, out_dir, with_features=True) -> Path:
    """Write keypoints/audio/annotations (and optionally feature caches) plus
    an index file; returns the index path."""
    out = Path(out_dir)
    for sub in ("keypoints", "audio", "annotations", "features"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0)
    entries = []
    for video in videos:
        vid = video.video_id
        _write_keypoints_jsonl(out / "keypoints" / f"{vid}.jsonl", video, rng)
        audio.save_wav(out / "audio" / f"{vid}.wav", video.waveform)
        labels.save_annotations(out / "annotations" / f"{vid}.json", video.meta, video.annotations)
        bones_rel = spec_rel = ""
        if with_features:
            feats = feat.extract_features(
                out / "keypoints" / f"{vid}.jsonl", out / "audio" / f"{vid}.wav", video.meta.fps
            )
            bones_name, spec_name = feat.write_feature_cache(out / "features", vid, feats)
            bones_rel = f"features/{bones_name}"
            spec_rel = f"features/{spec_name}"
        entries.append(IndexEntry(
            video_id=vid, category="basic",
            bones_path=str(out / bones_rel) if bones_rel else "",
            spectrogram_path=str(out / spec_rel) if spec_rel else "",
            annotation_path=str(out / "annotations" / f"{vid}.json"),
            meta=video.meta,
        ))
    index = DatasetIndex(entries=entries)
    index_path = out / "index.json"
    # store paths relative to the index file
    rel_entries = []
    for e in index.entries:
        rel_entries.append({
            "video_id": e.video_id,
            "category": e.category,
            "bones_path": str(Path(e.bones_path).relative_to(out)) if e.bones_path else "",
            "spectrogram_path": str(Path(e.spectrogram_path).relative_to(out)) if e.spectrogram_path else "",
            "annotation_path": str(Path(e.annotation_path).relative_to(out)),
            "meta": labels.meta_dict(e.meta),
        })
    with open(index_path, "w") as fh:
        json.dump({"entries": rel_entries}, fh, indent=2)
    return index_path
