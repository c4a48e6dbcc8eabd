"""Segmentation candidates, annotator labels, and ground-truth curves.

Annotators mark frames on a beat/half-beat grid anchored at the audio onset.
Each annotator's marks become a sum of unit-height Gaussians (sigma = one
third of a beat, clipped at 1); the ground truth is the mean curve over
annotators.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from choreoseg.errors import ConfigError, FormatError


@dataclass
class VideoMeta:
    video_id: str
    fps: float
    tempo_bpm: float
    n_beats: int
    onset_c0: float      # seconds
    total_frames: int

    def __post_init__(self):
        if self.tempo_bpm <= 0:
            raise ConfigError(f"tempo must be positive, got {self.tempo_bpm}")
        if self.fps <= 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")
        if self.n_beats <= 0:
            raise ConfigError(f"n_beats must be positive, got {self.n_beats}")


@dataclass
class AnnotatorPoints:
    annotator_id: str
    points_frames: list

    def validate(self, total_frames: int) -> None:
        pts = self.points_frames
        if any(not 0 <= p < total_frames for p in pts):
            raise ConfigError(f"{self.annotator_id}: point outside [0, {total_frames})")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ConfigError(f"{self.annotator_id}: points must be strictly increasing")


@dataclass
class AnnotationSet:
    annotators: list = field(default_factory=list)

    def validate(self, total_frames: int) -> None:
        for a in self.annotators:
            a.validate(total_frames)


@dataclass(eq=False)
class SegmentationLabel:
    values: np.ndarray   # (T,) in [0, 1]
    sigma_frames: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)


def candidates(meta: VideoMeta) -> np.ndarray:
    """2 * n_beats grid timings in seconds: c_i = onset + (60 / tempo) * i / 2.

    Even indices sit on beats, odd indices on half-beats.
    """
    i = np.arange(2 * meta.n_beats, dtype=np.float64)
    return meta.onset_c0 + (60.0 / meta.tempo_bpm) * (i / 2.0)


def candidate_frames(meta: VideoMeta) -> np.ndarray:
    """Candidate timings converted to frame indices by rounding."""
    return np.floor(candidates(meta) * meta.fps + 0.5).astype(np.int64)


def sigma_frames(meta: VideoMeta) -> float:
    """One third of a beat, in frames: fps * 60 / (3 * tempo)."""
    return meta.fps * 60.0 / (3.0 * meta.tempo_bpm)


def annotation_label(points, sigma: float, total_frames: int) -> np.ndarray:
    """One annotator's per-frame curve: unit-height Gaussians at each point.

    Each bump is G(t | t_j, sigma) / G(0 | 0, sigma) = exp(-(t - t_j)^2 / (2 sigma^2)).
    Overlapping bumps are clipped at 1 so the curve stays a probability.
    """
    if sigma <= 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    t = np.arange(total_frames, dtype=np.float64)
    curve = np.zeros(total_frames, dtype=np.float64)
    for tj in points:
        curve += np.exp(-((t - tj) ** 2) / (2.0 * sigma * sigma))
    return np.minimum(curve, 1.0)


def ground_truth(annotation_set: AnnotationSet, sigma: float, total_frames: int) -> SegmentationLabel:
    """Mean of the per-annotator curves."""
    if not annotation_set.annotators:
        raise ConfigError("ground truth needs at least one annotator")
    acc = np.zeros(total_frames, dtype=np.float64)
    for a in annotation_set.annotators:
        acc += annotation_label(a.points_frames, sigma, total_frames)
    return SegmentationLabel(values=acc / len(annotation_set.annotators), sigma_frames=sigma)


def segmentation_proportion(selections, grid) -> np.ndarray:
    """Fraction of participants who marked each grid point.

    `selections` is one container of chosen grid values per participant;
    `grid` is the candidate beat values (e.g. 1, 1.5, ..., n_beats).
    """
    if not selections:
        raise ConfigError("need at least one participant")
    grid = np.asarray(grid, dtype=np.float64)
    counts = np.zeros(grid.size, dtype=np.float64)
    for chosen in selections:
        chosen = set(np.asarray(list(chosen), dtype=np.float64).tolist())
        counts += np.array([1.0 if b in chosen else 0.0 for b in grid])
    return counts / len(selections)


# ------------------------------------------------------------ file formats

def annotation_file_dict(meta: VideoMeta, annotation_set: AnnotationSet) -> dict:
    return {
        "video_id": meta.video_id,
        "fps": meta.fps,
        "tempo_bpm": meta.tempo_bpm,
        "n_beats": meta.n_beats,
        "c0_seconds": meta.onset_c0,
        "total_frames": meta.total_frames,
        "annotators": [
            {"id": a.annotator_id, "points_frames": [int(p) for p in a.points_frames]}
            for a in annotation_set.annotators
        ],
    }


def save_annotations(path, meta: VideoMeta, annotation_set: AnnotationSet) -> None:
    with open(path, "w") as fh:
        json.dump(annotation_file_dict(meta, annotation_set), fh, indent=2)


def load_annotations(path) -> tuple[VideoMeta, AnnotationSet]:
    with open(path) as fh:
        data = json.load(fh)
    try:
        meta = VideoMeta(
            video_id=data["video_id"],
            fps=float(data["fps"]),
            tempo_bpm=float(data["tempo_bpm"]),
            n_beats=int(data["n_beats"]),
            onset_c0=float(data["c0_seconds"]),
            total_frames=int(data["total_frames"]),
        )
        ann = AnnotationSet(
            annotators=[
                AnnotatorPoints(annotator_id=a["id"], points_frames=[int(p) for p in a["points_frames"]])
                for a in data["annotators"]
            ]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    ann.validate(meta.total_frames)
    return meta, ann


def export_ground_truth_csv(path, label: SegmentationLabel) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "label"])
        for t, v in enumerate(label.values):
            writer.writerow([t, f"{v:.9g}"])


def meta_dict(meta: VideoMeta) -> dict:
    return {
        "video_id": meta.video_id,
        "fps": meta.fps,
        "tempo_bpm": meta.tempo_bpm,
        "n_beats": meta.n_beats,
        "onset_c0": meta.onset_c0,
        "total_frames": meta.total_frames,
    }


def meta_from_dict(data: dict) -> VideoMeta:
    try:
        return VideoMeta(
            video_id=str(data["video_id"]),
            fps=float(data["fps"]),
            tempo_bpm=float(data["tempo_bpm"]),
            n_beats=int(data["n_beats"]),
            onset_c0=float(data["onset_c0"]),
            total_frames=int(data["total_frames"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad video meta: {exc}") from exc
