"""Model evaluation over a set of videos."""

from __future__ import annotations

import numpy as np

from choreoseg import segnet
from choreoseg.nn import l1_loss_forward
from choreoseg.pipeline.metrics import EvalReport, evaluate, half_beat_tolerance_frames
from choreoseg.pipeline.peaks import pick_peaks

PEAK_THRESHOLD = 0.3
PEAK_WINDOW = 20


def segment_curve(p, h: float = PEAK_THRESHOLD, w: float = PEAK_WINDOW) -> list:
    return pick_peaks(p, h, w)


def run_eval(params, cfg: segnet.ModelConfig, items, h: float = PEAK_THRESHOLD,
             w: float = PEAK_WINDOW) -> EvalReport:
    """Mean precision/recall/F and L1 loss over videos.

    Reference points come from running the same peak picker on the ground-truth
    curve; the match tolerance is half a beat of each video's tempo.
    """
    per_video = []
    losses = []
    for item in items:
        p = segnet.forward_full(item.bones, item.slices, params, cfg, training=False)
        loss, _ = l1_loss_forward(p, item.label)
        est = pick_peaks(p, h, w)
        ref = pick_peaks(item.label, h, w)
        tol = half_beat_tolerance_frames(item.meta.fps, item.meta.tempo_bpm)
        m = evaluate(est, ref, tol)
        per_video.append((item.video_id, m, loss))
        losses.append(loss)
    return EvalReport(
        precision=float(np.mean([m.precision for _, m, _ in per_video])),
        recall=float(np.mean([m.recall for _, m, _ in per_video])),
        f_measure=float(np.mean([m.f_measure for _, m, _ in per_video])),
        test_loss=float(np.mean(losses)),
        per_video=per_video,
    )
