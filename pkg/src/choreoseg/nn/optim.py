"""Named parameter tensors and the Adam update."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from choreoseg.errors import ShapeError


@dataclass
class ParamTensor:
    """A named trainable array together with its gradient accumulator."""

    name: str
    value: np.ndarray
    grad: np.ndarray = None

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad = np.asarray(self.grad, dtype=np.float64)
        if self.grad.shape != self.value.shape:
            raise ShapeError(f"{self.name}: grad {self.grad.shape} vs value {self.value.shape}")


Params = dict  # name -> ParamTensor


@dataclass
class AdamState:
    """First/second moment accumulators plus hyperparameters for Adam."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step_count: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8) -> "AdamState":
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        return state


def zero_grads(params: Params) -> None:
    for p in params.values():
        p.grad[...] = 0.0


def adam_step(params: Params, state: AdamState) -> None:
    """One bias-corrected Adam update over every parameter, in place."""
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = p.grad
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.value -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
