"""Peak picking over the segmentation probability curve."""

from __future__ import annotations

import numpy as np

from choreoseg.errors import ConfigError


def pick_peaks(p, h: float, w: float) -> list:
    """Frames where p exceeds h and is the maximum of the centered w-wide window.

    A frame t qualifies when p[t] > h and p[t] equals max(p[t - w/2 .. t + w/2]),
    windows clipped at the sequence ends. When several equal-valued maxima fall
    inside one window, only the smallest index survives.
    """
    p = np.asarray(p, dtype=np.float64)
    if not 0.0 <= h <= 1.0:
        raise ConfigError(f"threshold must be in [0, 1], got {h}")
    if w < 0:
        raise ConfigError(f"window must be non-negative, got {w}")
    T = p.size
    if T == 0:
        return []
    half = w / 2.0
    r = int(np.floor(half))
    if r > 0:
        # clipping the window at the ends == padding with -inf for the max
        padded = np.full(T + 2 * r, -np.inf)
        padded[r:r + T] = p
        window_max = np.lib.stride_tricks.sliding_window_view(padded, 2 * r + 1).max(axis=1)
    else:
        window_max = p
    peaks: list = []
    for t in np.flatnonzero((p > h) & (p == window_max)):
        if not peaks or t - peaks[-1] > half:
            peaks.append(int(t))
    return peaks


def enforce_min_distance(peaks, p, d: float) -> list:
    """Greedy left-to-right thinning: keep a peak only when it is at least d
    frames after the last kept one. The first peak is always kept."""
    if d < 0:
        raise ConfigError(f"distance must be non-negative, got {d}")
    kept: list = []
    for t in peaks:
        if not kept or t - kept[-1] >= d:
            kept.append(int(t))
    return kept
