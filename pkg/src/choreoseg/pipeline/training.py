"""Training loop: one Adam step per video, early stopping on validation loss."""

from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field

import numpy as np

from choreoseg import segnet
from choreoseg.errors import TrainingDiverged
from choreoseg.nn import AdamState, adam_step, l1_loss_backward, l1_loss_forward, zero_grads


@dataclass
class TrainHyper:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 10          # stop after this many epochs without a new best validation loss
    max_epochs: int = 200
    seed: int = 0               # drives the per-epoch shuffle
    dropout_seed: int = 1       # drives dropout masks

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("lr", "beta1", "beta2", "eps", "patience", "max_epochs", "seed", "dropout_seed")}


@dataclass
class TrainResult:
    params: dict                 # parameters at the best validation loss
    history: list = field(default_factory=list)  # one dict per epoch
    best_val_loss: float = float("inf")
    best_epoch: int = -1
    epochs_run: int = 0


def _copy_params(params: dict) -> dict:
    return {name: copy.deepcopy(p) for name, p in params.items()}


def video_loss(params, cfg, item) -> float:
    p = segnet.forward_full(item.bones, item.slices, params, cfg, training=False)
    loss, _ = l1_loss_forward(p, item.label)
    return loss


def validation_loss(params, cfg, items) -> float:
    return float(np.mean([video_loss(params, cfg, item) for item in items]))


def train(params, cfg: segnet.ModelConfig, train_items, val_items, hyper: TrainHyper,
          log=None) -> TrainResult:
    """Full passes over the shuffled training videos (batch size 1, L1 loss,
    Adam) until the best validation loss has not improved for `patience`
    consecutive epochs or `max_epochs` is reached. Returns the parameters from
    the best epoch.

    Deterministic given (initial params, hyper seeds); shuffling and dropout
    use their own generators.
    """
    result = TrainResult(params=_copy_params(params))
    if hyper.max_epochs <= 0:
        return result
    state = AdamState.for_params(params, lr=hyper.lr, beta1=hyper.beta1,
                                 beta2=hyper.beta2, eps=hyper.eps)
    shuffle_rng = np.random.default_rng(hyper.seed)
    dropout_rng = np.random.default_rng(hyper.dropout_seed)
    stale = 0
    for epoch in range(hyper.max_epochs):
        t0 = time.monotonic()
        order = shuffle_rng.permutation(len(train_items))
        train_losses = []
        for idx in order:
            item = train_items[idx]
            zero_grads(params)
            p, tape = segnet.forward_full(item.bones, item.slices, params, cfg,
                                          training=True, rng=dropout_rng, with_cache=True)
            loss, lcache = l1_loss_forward(p, item.label)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, video {item.video_id}"
                )
            segnet.backward_full(l1_loss_backward(lcache), tape, params, cfg)
            adam_step(params, state)
            train_losses.append(loss)
        val = validation_loss(params, cfg, val_items)
        result.history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(train_losses)),
            "val_loss": val,
            "seconds": time.monotonic() - t0,
        })
        result.epochs_run = epoch + 1
        if val < result.best_val_loss:
            result.best_val_loss = val
            result.best_epoch = epoch
            result.params = _copy_params(params)
            stale = 0
        else:
            stale += 1
        if log is not None:
            log(result.history[-1])
        if stale >= hyper.patience:
            break
    return result
