"""Existence-based precision/recall between estimated and reference point sets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from choreoseg.errors import ConfigError


@dataclass
class PointMetrics:
    precision: float
    recall: float
    f_measure: float


@dataclass
class EvalReport:
    precision: float
    recall: float
    f_measure: float
    test_loss: float
    per_video: list = field(default_factory=list)  # (video_id, PointMetrics, loss)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "test_loss": self.test_loss,
            "per_video": [
                {
                    "video_id": vid,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f_measure": m.f_measure,
                    "loss": loss,
                }
                for vid, m, loss in self.per_video
            ],
        }


def f_measure(precision: float, recall: float) -> float:
    if precision + recall <= 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evaluate(est_peaks, gt_peaks, tolerance: float) -> PointMetrics:
    """Each estimated point is a true positive when some reference point lies
    within `tolerance` frames of it, and symmetrically for recall. The two
    directions are independent existence tests, not a one-to-one matching.

    Empty lists score vacuously: no estimates means precision 1, no reference
    points means recall 1; both empty gives P = R = F = 1.
    """
    if tolerance < 0:
        raise ConfigError(f"tolerance must be non-negative, got {tolerance}")
    est = np.asarray(list(est_peaks), dtype=np.float64)
    gt = np.asarray(list(gt_peaks), dtype=np.float64)
    if est.size == 0 and gt.size == 0:
        return PointMetrics(1.0, 1.0, 1.0)
    if est.size == 0:
        return PointMetrics(1.0, 0.0, 0.0)
    if gt.size == 0:
        return PointMetrics(0.0, 1.0, 0.0)
    dist = np.abs(est[:, None] - gt[None, :])
    precision = float((dist.min(axis=1) <= tolerance).mean())
    recall = float((dist.min(axis=0) <= tolerance).mean())
    return PointMetrics(precision, recall, f_measure(precision, recall))


def half_beat_tolerance_frames(fps: float, tempo_bpm: float) -> float:
    """Half a beat expressed in frames: fps * 60 / (2 * tempo)."""
    return fps * 60.0 / (2.0 * tempo_bpm)
