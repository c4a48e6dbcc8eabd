"""Training-loop semantics on tiny synthetic data."""

import numpy as np
import pytest

from choreoseg import segnet
from choreoseg.pipeline import synth
from choreoseg.pipeline.evaluation import run_eval
from choreoseg.pipeline.training import TrainHyper, TrainResult, train, validation_loss

CFG = segnet.ModelConfig()


def _items(n, T=420, seed=3):
    videos = synth.synth_dataset(seed=seed, n_videos=n, total_frames=T, fps=60.0, tempo_bpm=120.0)
    return synth.materialize_items(videos)


def test_max_epochs_zero_returns_initial():
    params = segnet.init_params(CFG, 0)
    items = _items(1)
    res = train(params, CFG, items, items, TrainHyper(max_epochs=0))
    assert res.history == []
    assert res.epochs_run == 0
    for name in params:
        assert np.array_equal(res.params[name].value, params[name].value)


def test_loss_decreases_on_one_video():
    items = _items(1)
    params = segnet.init_params(CFG, 0)
    hyper = TrainHyper(max_epochs=5, patience=10, seed=0, dropout_seed=1)
    res = train(params, CFG, items, items, hyper)
    losses = [h["train_loss"] for h in res.history]
    assert len(losses) == 5
    assert losses[-1] < losses[0]


def test_early_stop_counter_semantics():
    # patience epochs without a new best end the run
    items = _items(2, T=360)
    params = segnet.init_params(CFG, 0)
    hyper = TrainHyper(max_epochs=200, patience=2, seed=0, dropout_seed=1)
    res = train(params, CFG, items[:1], items[1:], hyper)
    assert res.epochs_run < 200
    vals = [h["val_loss"] for h in res.history]
    best = min(vals)
    # the run ends exactly `patience` epochs after the last best
    assert vals.index(best) == res.best_epoch
    assert res.epochs_run == res.best_epoch + 1 + hyper.patience
    assert res.best_val_loss == best


def test_training_bit_reproducible():
    items = _items(2, T=360)
    hyper = TrainHyper(max_epochs=2, patience=10, seed=7, dropout_seed=8)
    results = []
    for _ in range(2):
        params = segnet.init_params(CFG, 1)
        results.append(train(params, CFG, items[:1], items[1:], hyper))
    a, b = results
    assert [h["train_loss"] for h in a.history] == [h["train_loss"] for h in b.history]
    for name in a.params:
        assert np.array_equal(a.params[name].value, b.params[name].value)


def test_validation_loss_is_inference_mode():
    items = _items(1, T=360)
    params = segnet.init_params(CFG, 0)
    assert validation_loss(params, CFG, items) == validation_loss(params, CFG, items)


def test_perfect_predictor_scores_one():
    # feeding the ground-truth curve through the evaluator must yield F = 1
    from choreoseg.pipeline.metrics import evaluate, half_beat_tolerance_frames
    from choreoseg.pipeline.peaks import pick_peaks
    items = _items(2, T=500)
    for item in items:
        peaks = pick_peaks(item.label, 0.3, 20)
        tol = half_beat_tolerance_frames(item.meta.fps, item.meta.tempo_bpm)
        m = evaluate(peaks, peaks, tol)
        assert m.f_measure == 1.0


def test_constant_zero_has_zero_recall():
    from choreoseg.pipeline.metrics import evaluate
    from choreoseg.pipeline.peaks import pick_peaks
    items = _items(1, T=500)
    item = items[0]
    gt = pick_peaks(item.label, 0.3, 20)
    assert len(gt) > 0
    est = pick_peaks(np.zeros_like(item.label), 0.3, 20)
    m = evaluate(est, gt, 15)
    assert m.recall == 0.0
