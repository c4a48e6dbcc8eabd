"""Minimal deterministic differentiable kernels (numpy arrays in, numpy arrays out).

Every forward has a matching backward that produces exact analytic gradients;
`gradcheck` compares them against central finite differences. There is no
autodiff graph: callers chain forwards, keep the returned caches, and chain
backwards by hand.
"""

from choreoseg.nn.ops import (
    dense_forward,
    dense_backward,
    conv1d_dilated_forward,
    conv1d_dilated_backward,
    dwconv1d_forward,
    dwconv1d_backward,
    conv2d_forward,
    conv2d_backward,
    maxpool2d_forward,
    maxpool2d_backward,
    elu_forward,
    elu_backward,
    dropout_forward,
    dropout_backward,
    weight_norm_forward,
    weight_norm_backward,
    l1_loss_forward,
    l1_loss_backward,
    sigmoid_forward,
    sigmoid_backward,
)
from choreoseg.nn.optim import AdamState, ParamTensor, adam_step, zero_grads
from choreoseg.nn.checkpoint import save_checkpoint, load_checkpoint
from choreoseg.nn.gradcheck import grad_check, GradCheckReport

__all__ = [
    "dense_forward", "dense_backward",
    "conv1d_dilated_forward", "conv1d_dilated_backward",
    "dwconv1d_forward", "dwconv1d_backward",
    "conv2d_forward", "conv2d_backward",
    "maxpool2d_forward", "maxpool2d_backward",
    "elu_forward", "elu_backward",
    "dropout_forward", "dropout_backward",
    "weight_norm_forward", "weight_norm_backward",
    "l1_loss_forward", "l1_loss_backward",
    "sigmoid_forward", "sigmoid_backward",
    "AdamState", "ParamTensor", "adam_step", "zero_grads",
    "save_checkpoint", "load_checkpoint",
    "grad_check", "GradCheckReport",
]
