"""Forward/backward kernel pairs.

Conventions:
  * forward returns (y, cache); backward takes (grad_y, cache) and returns the
    input gradients in the same order the forward took them.
  * temporal convolutions are non-causal (centered taps) with zero padding.
  * reductions run in float64 regardless of input dtype.
"""

from __future__ import annotations

import numpy as np

from choreoseg.errors import DegenerateParameter, ShapeError

_ZERO_NORM_EPS = 1e-12


# ---------------------------------------------------------------- dense

def dense_forward(x, W, b):
    """y = W x + b.  x may be (in,) or batched (N, in); W is (out, in), b (out,).

    Weights are cast to the activation dtype, so a float32 activation path
    stays float32 even with float64-stored parameters.
    """
    x = np.asarray(x)
    W = np.asarray(W)
    b = np.asarray(b)
    if W.ndim != 2 or b.shape != (W.shape[0],):
        raise ShapeError(f"dense: W {W.shape} / b {b.shape}")
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(f"dense: x {x.shape} does not match W {W.shape}")
    W = W.astype(x.dtype, copy=False)
    y = x @ W.T + b.astype(x.dtype, copy=False)
    return y, (x, W)


def dense_backward(gy, cache):
    x, W = cache
    gy = np.asarray(gy)
    gx = gy @ W
    if x.ndim == 1:
        gW = np.outer(gy, x)
        gb = gy.copy()
    else:
        x2 = x.reshape(-1, x.shape[-1])
        gy2 = gy.reshape(-1, gy.shape[-1])
        gW = gy2.T @ x2
        gb = gy2.sum(axis=0)
    return gx, gW, gb


# ----------------------------------------------------- dilated 1-D conv

def _check_kernel_width(k):
    if k % 2 == 0:
        raise ShapeError(f"centered convolution needs an odd kernel width, got {k}")


def dwconv1d_forward(x, kernels, dilation):
    """Depthwise centered dilated convolution.

    x: (C, T) rows convolved independently; kernels: (C, K) one kernel per row,
    K odd; zero padding outside [0, T).  y[c, t] = sum_j k[c, j] * x[c, t + (j - K//2) * dilation].
    """
    x = np.asarray(x)
    kernels = np.asarray(kernels)
    if x.ndim != 2 or kernels.ndim != 2 or kernels.shape[0] != x.shape[0]:
        raise ShapeError(f"dwconv1d: x {x.shape} vs kernels {kernels.shape}")
    C, T = x.shape
    K = kernels.shape[1]
    _check_kernel_width(K)
    if dilation < 1:
        raise ShapeError(f"dilation must be >= 1, got {dilation}")
    kernels = kernels.astype(x.dtype, copy=False)
    pad = (K // 2) * dilation
    xp = np.zeros((C, T + 2 * pad), dtype=x.dtype)
    xp[:, pad:pad + T] = x
    y = np.zeros((C, T), dtype=x.dtype)
    for j in range(K):
        y += kernels[:, j:j + 1] * xp[:, j * dilation:j * dilation + T]
    return y, (xp, kernels, dilation, T)


def dwconv1d_backward(gy, cache):
    xp, kernels, dilation, T = cache
    gy = np.asarray(gy)
    C, K = kernels.shape
    pad = (K // 2) * dilation
    # gradient wrt input: correlate gy with the reversed kernel
    gyp = np.zeros((C, T + 2 * pad), dtype=gy.dtype)
    gyp[:, pad:pad + T] = gy
    gx = np.zeros((C, T), dtype=gy.dtype)
    rev = kernels[:, ::-1]
    for j in range(K):
        gx += rev[:, j:j + 1] * gyp[:, j * dilation:j * dilation + T]
    # gradient wrt kernel taps
    gk = np.empty_like(kernels, dtype=np.float64)
    for j in range(K):
        gk[:, j] = np.einsum("ct,ct->c", gy, xp[:, j * dilation:j * dilation + T])
    return gx, gk.astype(kernels.dtype, copy=False)


def conv1d_dilated_forward(x, kernel, dilation):
    """Single-row centered dilated convolution: x (T,), kernel (K,) with K odd."""
    x = np.asarray(x)
    kernel = np.asarray(kernel)
    if x.ndim != 1 or kernel.ndim != 1:
        raise ShapeError(f"conv1d: x {x.shape}, kernel {kernel.shape}")
    y, cache = dwconv1d_forward(x[None, :], kernel[None, :], dilation)
    return y[0], cache


def conv1d_dilated_backward(gy, cache):
    gx, gk = dwconv1d_backward(np.asarray(gy)[None, :], cache)
    return gx[0], gk[0]


# ------------------------------------------------------------ 2-D conv

def _as_batched(x):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"conv2d expects (C,H,W) or (N,C,H,W), got {x.shape}")


def conv2d_forward(x, W, b):
    """Valid cross-correlation.  x: (C,H,W) or (N,C,H,W); W: (O,C,KH,KW); b: (O,)."""
    xb, squeeze = _as_batched(x)
    W = np.asarray(W)
    b = np.asarray(b)
    if W.ndim != 4 or b.shape != (W.shape[0],):
        raise ShapeError(f"conv2d: W {W.shape} / b {b.shape}")
    N, C, H, Wd = xb.shape
    O, Ck, KH, KW = W.shape
    if Ck != C:
        raise ShapeError(f"conv2d: {C} input channels vs kernel expecting {Ck}")
    OH, OW = H - KH + 1, Wd - KW + 1
    if OH <= 0 or OW <= 0:
        raise ShapeError(f"conv2d: kernel {KH}x{KW} larger than input {H}x{Wd}")
    # im2col: (N, OH*OW, C*KH*KW)
    win = np.lib.stride_tricks.sliding_window_view(xb, (KH, KW), axis=(2, 3))
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(N, OH * OW, C * KH * KW)
    Wmat = W.reshape(O, C * KH * KW).astype(xb.dtype, copy=False)
    y = cols @ Wmat.T + b.astype(xb.dtype, copy=False)
    y = y.transpose(0, 2, 1).reshape(N, O, OH, OW)
    cache = (cols, Wmat, xb.shape, (KH, KW), squeeze)
    return (y[0] if squeeze else y), cache


def conv2d_backward(gy, cache):
    cols, Wmat, xshape, (KH, KW), squeeze = cache
    gy = np.asarray(gy)
    if squeeze:
        gy = gy[None]
    N, C, H, Wd = xshape
    O = Wmat.shape[0]
    OH, OW = H - KH + 1, Wd - KW + 1
    gy_mat = np.ascontiguousarray(gy.reshape(N, O, OH * OW).transpose(0, 2, 1))  # (N, OH*OW, O)
    gy2 = gy_mat.reshape(N * OH * OW, O)
    gW = (gy2.T @ cols.reshape(N * OH * OW, -1)).reshape(O, C, KH, KW)
    gb = gy2.sum(axis=0)
    gcols = gy_mat @ Wmat  # (N, OH*OW, C*KH*KW)
    # col2im scatter-add back to the input layout
    gx = np.zeros(xshape, dtype=gy.dtype)
    gcols = gcols.reshape(N, OH, OW, C, KH, KW)
    for u in range(KH):
        for v in range(KW):
            gx[:, :, u:u + OH, v:v + OW] += gcols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
    if squeeze:
        gx = gx[0]
    return gx, gW, gb


def maxpool2d_forward(x, window=(1, 3), with_cache=True):
    """Non-overlapping max pooling; trailing rows/columns that do not fill a window are dropped.

    Gradient routes to the argmax of each window, first index on ties. Passing
    with_cache=False skips the argmax bookkeeping (inference-only path).
    """
    xb, squeeze = _as_batched(x)
    wh, ww = window
    N, C, H, W = xb.shape
    OH, OW = H // wh, W // ww
    if OH == 0 or OW == 0:
        raise ShapeError(f"maxpool window {window} larger than input {H}x{W}")
    xc = xb[:, :, :OH * wh, :OW * ww]
    blocks = xc.reshape(N, C, OH, wh, OW, ww).transpose(0, 1, 2, 4, 3, 5).reshape(N, C, OH, OW, wh * ww)
    y = blocks.max(axis=-1)
    if not with_cache:
        return (y[0] if squeeze else y), None
    idx = blocks.argmax(axis=-1)
    cache = (idx, xb.shape, window, squeeze)
    return (y[0] if squeeze else y), cache


def maxpool2d_backward(gy, cache):
    idx, xshape, (wh, ww), squeeze = cache
    gy = np.asarray(gy)
    if squeeze:
        gy = gy[None]
    N, C, H, W = xshape
    OH, OW = H // wh, W // ww
    gblocks = np.zeros((N, C, OH, OW, wh * ww), dtype=gy.dtype)
    np.put_along_axis(gblocks, idx[..., None], gy[..., None], axis=-1)
    gx = np.zeros(xshape, dtype=gy.dtype)
    gx[:, :, :OH * wh, :OW * ww] = (
        gblocks.reshape(N, C, OH, OW, wh, ww).transpose(0, 1, 2, 4, 3, 5).reshape(N, C, OH * wh, OW * ww)
    )
    return gx[0] if squeeze else gx


# ------------------------------------------------------------ pointwise

def elu_forward(x):
    """y = x for x >= 0, exp(x) - 1 otherwise (alpha = 1)."""
    x = np.asarray(x)
    # branchless: max(x, 0) + expm1(min(x, 0))
    y = np.maximum(x, 0.0)
    t = np.minimum(x, 0.0)
    np.expm1(t, out=t)
    y += t
    return y, y


def elu_backward(gy, cache):
    # derivative is 1 on the non-negative side and exp(x) = y + 1 on the negative
    # side, which collapses to min(y + 1, 1)
    y = cache
    return np.asarray(gy) * np.minimum(y + 1.0, 1.0)


def sigmoid_forward(x):
    x = np.asarray(x)
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(np.float64)
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return y, y


def sigmoid_backward(gy, cache):
    y = cache
    return np.asarray(gy) * y * (1.0 - y)


def dropout_forward(x, rate, rng, training):
    """Inverted dropout: zero with probability `rate`, scale survivors by 1/(1-rate).

    Identity when not training or rate == 0; `rng` is a numpy Generator so masks
    are reproducible per seed.
    """
    x = np.asarray(x)
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    keep = rng.random(x.shape, dtype=np.float32) >= rate
    scale = 1.0 / (1.0 - rate)
    y = x * keep
    y *= scale
    return y, (keep, scale)


def dropout_backward(gy, cache):
    if cache is None:
        return np.asarray(gy)
    keep, scale = cache
    g = np.asarray(gy) * keep
    g *= scale
    return g


# ---------------------------------------------------- weight normalization

def weight_norm_forward(v, g):
    """w = g * v / ||v||_2, rowwise.

    v: (C, K) direction vectors, g: (C,) magnitudes; 1-D v with scalar g also accepted.
    """
    v = np.asarray(v)
    g = np.asarray(g)
    flat = v.ndim == 1
    if flat:
        v = v[None, :]
        g = g.reshape(1)
    if v.ndim != 2 or g.shape != (v.shape[0],):
        raise ShapeError(f"weight_norm: v {v.shape} / g {g.shape}")
    norms = np.sqrt((v.astype(np.float64) ** 2).sum(axis=1))
    if np.any(norms < _ZERO_NORM_EPS):
        raise DegenerateParameter("weight_norm: zero-norm direction vector")
    w = (g / norms)[:, None] * v
    cache = (v, g, norms, flat)
    return (w[0] if flat else w), cache


def weight_norm_backward(gw, cache):
    v, g, norms, flat = cache
    gw = np.asarray(gw)
    if flat:
        gw = gw[None, :]
    vhat = v / norms[:, None]
    dot = (gw * vhat).sum(axis=1)
    gg = dot
    gv = (g / norms)[:, None] * (gw - dot[:, None] * vhat)
    if flat:
        return gv[0], gg.reshape(())
    return gv, gg


# -------------------------------------------------------------- L1 loss

def l1_loss_forward(pred, target):
    """Mean absolute error; the subgradient at exact ties is 0."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeError(f"l1_loss: {pred.shape} vs {target.shape}")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    loss = float(np.abs(diff).mean())
    return loss, diff


def l1_loss_backward(cache):
    diff = cache
    return np.sign(diff) / diff.size
