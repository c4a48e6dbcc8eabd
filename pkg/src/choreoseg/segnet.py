"""The segmentation network.

Per frame, 67 bone vectors (134 numbers) pass through a dense layer + ELU to a
67-dim visual feature, and the 5x81 spectrogram slice passes through a small
2-D conv stack to a 16-dim audio feature. Stacked to an 83 x T matrix, each
row is filtered independently by a 9-block non-causal dilated residual TCN
(kernel 5, dilation 2^i, weight-normalized depthwise convolutions), and each
output column maps through a dense layer + logistic to the per-frame
segmentation probability p(t).

Forward functions optionally return a cache; `backward_full` consumes the
caches and accumulates parameter gradients in place.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from choreoseg.errors import ConfigError, ShapeError
from choreoseg.nn import (
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    dwconv1d_backward,
    dwconv1d_forward,
    elu_backward,
    elu_forward,
    maxpool2d_backward,
    maxpool2d_forward,
    sigmoid_backward,
    sigmoid_forward,
    weight_norm_backward,
    weight_norm_forward,
)
from choreoseg.nn.checkpoint import load_checkpoint, save_checkpoint
from choreoseg.nn.optim import AdamState, ParamTensor


def _as_float(x):
    """Keep float32/float64 as-is; anything else becomes float64."""
    x = np.asarray(x)
    if x.dtype not in (np.float32, np.float64):
        return x.astype(np.float64)
    return x


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 9
    kernel: int = 5
    dropout: float = 0.1
    channels: int = 83
    visual_out: int = 67
    audio_out: int = 16
    bone_inputs: int = 134
    slice_rows: int = 5
    mel_bands: int = 81
    shared_tcn_kernels: bool = False  # one kernel for all rows instead of per-row kernels

    def __post_init__(self):
        if self.channels != self.visual_out + self.audio_out:
            raise ConfigError(
                f"channels ({self.channels}) must equal visual_out + audio_out "
                f"({self.visual_out} + {self.audio_out})"
            )
        if self.kernel % 2 == 0:
            raise ConfigError("kernel width must be odd (centered convolution)")

    @property
    def dilations(self):
        return [2 ** i for i in range(self.layers)]

    def receptive_field_radius(self) -> int:
        # two convolutions per block, each reaching (kernel-1)/2 * dilation on both sides
        return 2 * ((self.kernel - 1) // 2) * (2 ** self.layers - 1)

    def receptive_field(self) -> int:
        return 2 * self.receptive_field_radius() + 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


# Audio conv stack geometry for 5 x 81 slices:
#   conv 3x3 -> (16, 3, 79) -> pool 1x3 -> (16, 3, 26)
#   conv 3x3 -> (16, 1, 24) -> pool 1x3 -> (16, 1, 8)
#   conv 1x8 -> (16, 1, 1)
_AUDIO_KERNELS = ((3, 3), (3, 3), (1, 8))
_AUDIO_POOL = (1, 3)


def audio_stage_shapes(cfg: ModelConfig):
    """Spatial trace of the audio stack: shapes after each pool / final conv."""
    h, w = cfg.slice_rows, cfg.mel_bands
    shapes = []
    for n, (kh, kw) in enumerate(_AUDIO_KERNELS):
        h, w = h - kh + 1, w - kw + 1
        if n < len(_AUDIO_KERNELS) - 1:
            h, w = h // _AUDIO_POOL[0], w // _AUDIO_POOL[1]
        shapes.append((cfg.audio_out, h, w))
    return shapes


def init_params(cfg: ModelConfig, seed: int) -> dict:
    """Uniform fan-in initialization; weight-norm g starts at ||v|| so the
    effective kernels equal v; biases start at zero. Deterministic per seed."""
    rng = np.random.default_rng(seed)

    def uniform(shape, fan_in):
        s = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-s, s, size=shape)

    params: dict = {}

    def add(name, value):
        params[name] = ParamTensor(name=name, value=value)

    add("visual/W", uniform((cfg.visual_out, cfg.bone_inputs), cfg.bone_inputs))
    add("visual/b", np.zeros(cfg.visual_out))

    in_ch = 1
    for n, (kh, kw) in enumerate(_AUDIO_KERNELS, start=1):
        add(f"audio/conv{n}/W", uniform((cfg.audio_out, in_ch, kh, kw), in_ch * kh * kw))
        add(f"audio/conv{n}/b", np.zeros(cfg.audio_out))
        in_ch = cfg.audio_out

    rows = 1 if cfg.shared_tcn_kernels else cfg.channels
    for i in range(cfg.layers):
        for j in (1, 2):
            v = uniform((rows, cfg.kernel), cfg.kernel)
            add(f"tcn/block{i}/conv{j}/v", v)
            add(f"tcn/block{i}/conv{j}/g", np.sqrt((v ** 2).sum(axis=1)))

    add("prob/W", uniform((1, cfg.channels), cfg.channels))
    add("prob/b", np.zeros(1))
    return params


# ------------------------------------------------------------ visual head

def visual_head(bones, params, with_cache=False):
    """(T, 134) bone vectors -> (T, 67) features; frames are independent."""
    bones = _as_float(bones)
    pre, dcache = dense_forward(bones, params["visual/W"].value, params["visual/b"].value)
    v, ecache = elu_forward(pre)
    if with_cache:
        return v, (dcache, ecache)
    return v


def _visual_backward(gv, cache, params):
    dcache, ecache = cache
    gpre = elu_backward(gv, ecache)
    gx, gW, gb = dense_backward(gpre, dcache)
    params["visual/W"].grad += gW
    params["visual/b"].grad += gb
    return gx


# ------------------------------------------------------------ audio block

def audio_block(slices, params, training=False, rng=None, with_cache=False, dropout=0.1):
    """(T, 5, 81) spectrogram slices -> (T, 16) features.

    conv(3x3) -> ELU -> dropout -> pool(1x3), twice, then conv(1x8) -> ELU ->
    dropout; dropout only bites during training.
    """
    slices = _as_float(slices)
    if slices.ndim != 3:
        raise ShapeError(f"expected (T, rows, bands) slices, got {slices.shape}")
    x = slices[:, None, :, :]  # (T, 1, 5, 81)
    caches = []
    trace = []
    for n in range(1, len(_AUDIO_KERNELS) + 1):
        y, ccache = conv2d_forward(x, params[f"audio/conv{n}/W"].value, params[f"audio/conv{n}/b"].value)
        y, ecache = elu_forward(y)
        y, mcache = dropout_forward(y, dropout, rng, training)
        pcache = None
        if n < len(_AUDIO_KERNELS):
            y, pcache = maxpool2d_forward(y, _AUDIO_POOL, with_cache=with_cache)
        if with_cache:
            caches.append((ccache, ecache, mcache, pcache))
        trace.append(y.shape[1:])
        x = y
    out = x.reshape(x.shape[0], -1)
    if with_cache:
        return out, (caches, x.shape, trace)
    return out


def _audio_backward(ga, cache, params):
    caches, last_shape, _ = cache
    g = np.asarray(ga).reshape(last_shape)
    for n in range(len(_AUDIO_KERNELS), 0, -1):
        ccache, ecache, mcache, pcache = caches[n - 1]
        if pcache is not None:
            g = maxpool2d_backward(g, pcache)
        g = dropout_backward(g, mcache)
        g = elu_backward(g, ecache)
        g, gW, gb = conv2d_backward(g, ccache)
        params[f"audio/conv{n}/W"].grad += gW
        params[f"audio/conv{n}/b"].grad += gb
    return g


# --------------------------------------------------------------- assembly

def assemble_input(v, a) -> np.ndarray:
    """Stack per-frame features into the channels x T matrix (visual rows first)."""
    v = np.asarray(v)
    a = np.asarray(a)
    if v.shape[0] != a.shape[0]:
        raise ShapeError(f"frame counts differ: visual {v.shape[0]} vs audio {a.shape[0]}")
    return np.concatenate([v.T, a.T], axis=0)


# -------------------------------------------------------------------- TCN

def _block_kernels(params, i, j, cfg):
    v = params[f"tcn/block{i}/conv{j}/v"].value
    g = params[f"tcn/block{i}/conv{j}/g"].value
    w, wcache = weight_norm_forward(v, g)
    if cfg.shared_tcn_kernels:
        w = np.broadcast_to(w, (cfg.channels, cfg.kernel))
    return w, wcache


def tcn_forward(X, params, cfg: ModelConfig, training=False, rng=None, with_cache=False):
    """9 residual blocks of two weight-normalized depthwise dilated convolutions.

    Each row of X is processed independently (per-row kernels by default); the
    block output is input + branch, sizes already equal.
    """
    X = _as_float(X)
    if X.shape[0] != cfg.channels:
        raise ShapeError(f"expected {cfg.channels} rows, got {X.shape[0]}")
    caches = []
    Z = X
    for i, dil in enumerate(cfg.dilations):
        block_in = Z
        h = block_in
        conv_caches = []
        for j in (1, 2):
            w, wcache = _block_kernels(params, i, j, cfg)
            h, ccache = dwconv1d_forward(h, w, dil)
            h, ecache = elu_forward(h)
            h, mcache = dropout_forward(h, cfg.dropout, rng, training)
            conv_caches.append((wcache, ccache, ecache, mcache))
        Z = block_in + h
        caches.append(conv_caches)
    if with_cache:
        return Z, caches
    return Z


def _tcn_backward(gY, caches, params, cfg: ModelConfig):
    g = np.asarray(gY)
    for i in range(cfg.layers - 1, -1, -1):
        g_branch = g
        for j in (2, 1):
            wcache, ccache, ecache, mcache = caches[i][j - 1]
            g_branch = dropout_backward(g_branch, mcache)
            g_branch = elu_backward(g_branch, ecache)
            g_branch, gk = dwconv1d_backward(g_branch, ccache)
            if cfg.shared_tcn_kernels:
                gk = gk.sum(axis=0, keepdims=True)
            gv, gg = weight_norm_backward(gk, wcache)
            params[f"tcn/block{i}/conv{j}/v"].grad += gv
            params[f"tcn/block{i}/conv{j}/g"].grad += gg
        g = g + g_branch  # residual add fans the gradient out to both paths
    return g


# ------------------------------------------------------- probability head

def probability_head(Y, params, with_cache=False):
    """Per-column dense 83 -> 1 + logistic squash to (0, 1)."""
    Y = _as_float(Y)
    logits, dcache = dense_forward(Y.T, params["prob/W"].value, params["prob/b"].value)
    p, scache = sigmoid_forward(logits[:, 0])
    if with_cache:
        return p, (dcache, scache)
    return p


def _probability_backward(gp, cache, params):
    dcache, scache = cache
    glogits = sigmoid_backward(gp, scache)
    gYt, gW, gb = dense_backward(glogits[:, None], dcache)
    params["prob/W"].grad += gW
    params["prob/b"].grad += gb
    return gYt.T


# ------------------------------------------------------------ full network

def forward_full(bones, slices, params, cfg: ModelConfig, training=False, rng=None, with_cache=False):
    """bones (T, 134) + slices (T, 5, 81) -> p (T,) in (0, 1)."""
    if training and cfg.dropout > 0 and rng is None:
        raise ConfigError("training forward needs an rng for dropout masks")
    if not with_cache:
        v = visual_head(bones, params)
        a = audio_block(slices, params, training=training, rng=rng, dropout=cfg.dropout)
        X = assemble_input(v, a)
        Y = tcn_forward(X, params, cfg, training=training, rng=rng)
        return probability_head(Y, params)
    v, vcache = visual_head(bones, params, with_cache=True)
    a, acache = audio_block(
        slices, params, training=training, rng=rng, with_cache=True, dropout=cfg.dropout
    )
    X = assemble_input(v, a)
    Y, tcache = tcn_forward(X, params, cfg, training=training, rng=rng, with_cache=True)
    p, pcache = probability_head(Y, params, with_cache=True)
    return p, (vcache, acache, tcache, pcache, cfg.visual_out)


def backward_full(gp, tape, params, cfg: ModelConfig):
    """Accumulate parameter gradients for a forward_full pass; returns (gbones, gslices)."""
    vcache, acache, tcache, pcache, visual_out = tape
    gp = np.asarray(gp).astype(pcache[1].dtype, copy=False)  # stay in the forward dtype
    gY = _probability_backward(gp, pcache, params)
    gX = _tcn_backward(gY, tcache, params, cfg)
    gv = gX[:visual_out].T
    ga = gX[visual_out:].T
    gbones = _visual_backward(gv, vcache, params)
    gslices = _audio_backward(ga, acache, params)
    return gbones, gslices[:, 0, :, :]


# ------------------------------------------------------------- persistence

_OPT_PREFIX = "opt/"


def save_model(path, params: dict, cfg: ModelConfig, adam_state: AdamState | None = None) -> None:
    tensors = {name: p.value for name, p in params.items()}
    if adam_state is not None:
        for name in params:
            tensors[f"{_OPT_PREFIX}m/{name}"] = adam_state.m[name]
            tensors[f"{_OPT_PREFIX}v/{name}"] = adam_state.v[name]
        tensors[f"{_OPT_PREFIX}step"] = np.array([adam_state.step_count], dtype=np.float64)
        tensors[f"{_OPT_PREFIX}hyper"] = np.array(
            [adam_state.lr, adam_state.beta1, adam_state.beta2, adam_state.eps], dtype=np.float64
        )
    save_checkpoint(path, tensors, meta={"model_config": cfg.to_dict()})


def load_model(path):
    """Returns (params, cfg, adam_state-or-None)."""
    tensors, meta = load_checkpoint(path)
    if meta is None or "model_config" not in meta:
        raise ConfigError(f"{path}: checkpoint has no model config record")
    cfg = ModelConfig.from_dict(meta["model_config"])
    params = {}
    opt_m, opt_v, step, hyper = {}, {}, None, None
    for name, arr in tensors.items():
        if name.startswith(_OPT_PREFIX + "m/"):
            opt_m[name[len(_OPT_PREFIX) + 2:]] = arr.astype(np.float64)
        elif name.startswith(_OPT_PREFIX + "v/"):
            opt_v[name[len(_OPT_PREFIX) + 2:]] = arr.astype(np.float64)
        elif name == _OPT_PREFIX + "step":
            step = int(arr[0])
        elif name == _OPT_PREFIX + "hyper":
            hyper = arr.astype(np.float64)
        else:
            params[name] = ParamTensor(name=name, value=arr.astype(np.float64))
    state = None
    if step is not None and hyper is not None:
        state = AdamState(
            m=opt_m, v=opt_v, step_count=step,
            lr=float(hyper[0]), beta1=float(hyper[1]), beta2=float(hyper[2]), eps=float(hyper[3]),
        )
    return params, cfg, state
