"""Mel-spectrogram audio features aligned to video frames.

The spectrogram is 81 Mel bands of the STFT magnitude, expressed in dB
relative to the file's loudest band ([-80, 0]) and then mapped linearly to
[-0.5, 0.5]. Per video frame the network consumes the 5 spectrogram rows
nearest in time.

The STFT/Mel parameters below (2048-sample Hann window, 441-sample hop at
44.1 kHz, 81 triangular bands over 30 Hz - 17 kHz) are a reconstruction of a
common beat-tracking front end, not values fixed by the data; everything is
overridable through SpectrogramConfig.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io.wavfile

from choreoseg.errors import ConfigError, FormatError, OnsetNotFound, ShapeError

N_MEL_BANDS = 81
DB_FLOOR = -80.0
SLICE_ROWS = 5
ONSET_THRESHOLD = 0.5

CACHE_MAGIC = b"DSPC"


@dataclass(eq=False)
class Waveform:
    samples: np.ndarray  # mono, [-1, 1]
    sample_rate: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ShapeError(f"waveform must be mono 1-D, got {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(eq=False)
class MelSpectrogram:
    values: np.ndarray   # (T_s, 81)
    frame_rate: float    # spectrogram rows per second
    normalized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != N_MEL_BANDS:
            raise ShapeError(f"spectrogram must be (T, {N_MEL_BANDS}), got {self.values.shape}")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SpectrogramConfig:
    fft_size: int = 2048
    hop: int = 441
    n_bands: int = N_MEL_BANDS
    fmin: float = 30.0
    fmax: float = 17000.0

    def frame_rate(self, sample_rate: float) -> float:
        return sample_rate / self.hop


def load_wav(path) -> Waveform:
    """Read a PCM-16/PCM-32/float32 WAV; stereo is downmixed by channel mean."""
    try:
        rate, data = scipy.io.wavfile.read(Path(path))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    data = np.asarray(data)
    if data.dtype == np.int16:
        scale = 32768.0
    elif data.dtype == np.int32:
        scale = 2147483648.0
    else:
        scale = 1.0
    data = data.astype(np.float64) / scale
    if data.ndim == 2:
        data = data.mean(axis=1)
    return Waveform(samples=data, sample_rate=float(rate))


def save_wav(path, w: Waveform) -> None:
    scipy.io.wavfile.write(Path(path), int(w.sample_rate), w.samples.astype(np.float32))


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: float, fft_size: int, n_bands: int, fmin: float, fmax: float):
    """Triangular filters on the Mel scale; returns (n_bands, fft_size//2 + 1)."""
    if fmax > sample_rate / 2.0:
        raise ConfigError(
            f"sample rate {sample_rate} Hz cannot represent bands up to {fmax} Hz"
        )
    mel_points = np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_bands + 2)
    hz_points = _mel_to_hz(mel_points)
    fft_freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    fb = np.zeros((n_bands, fft_freqs.size), dtype=np.float64)
    for b in range(n_bands):
        lo, center, hi = hz_points[b], hz_points[b + 1], hz_points[b + 2]
        rising = (fft_freqs - lo) / (center - lo)
        falling = (hi - fft_freqs) / (hi - center)
        fb[b] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb, hz_points[1:-1]  # filters and their center frequencies


def mel_spectrogram(w: Waveform, cfg: SpectrogramConfig = SpectrogramConfig()) -> MelSpectrogram:
    """Magnitude STFT -> Mel bands -> dB relative to the file maximum, clipped to [-80, 0]."""
    if w.samples.size == 0:
        raise ShapeError("empty waveform")
    fb, _ = mel_filterbank(w.sample_rate, cfg.fft_size, cfg.n_bands, cfg.fmin, cfg.fmax)
    window = np.hanning(cfg.fft_size)
    n_frames = max(1, 1 + (w.samples.size - 1) // cfg.hop)
    # centered frames, zero padded at both ends
    half = cfg.fft_size // 2
    padded = np.concatenate([np.zeros(half), w.samples, np.zeros(half + cfg.fft_size)])
    starts = np.arange(n_frames) * cfg.hop
    frames = padded[starts[:, None] + np.arange(cfg.fft_size)[None, :]] * window
    mags = np.abs(np.fft.rfft(frames, axis=1))
    mel = mags @ fb.T  # (T_s, n_bands)
    ref = mel.max()
    if ref <= 0.0:
        db = np.full_like(mel, DB_FLOOR)
    else:
        db = 20.0 * np.log10(np.maximum(mel, ref * 1e-6) / ref)
        db = np.clip(db, DB_FLOOR, 0.0)
    return MelSpectrogram(values=db, frame_rate=cfg.frame_rate(w.sample_rate), normalized=False)


def normalize_spectrogram(s: MelSpectrogram) -> MelSpectrogram:
    """Affine map of [-80, 0] dB onto [-0.5, 0.5]."""
    if s.normalized:
        raise ConfigError("spectrogram already normalized")
    return MelSpectrogram(values=(s.values + 40.0) / 80.0, frame_rate=s.frame_rate, normalized=True)


def denormalize_spectrogram(s: MelSpectrogram) -> MelSpectrogram:
    if not s.normalized:
        raise ConfigError("spectrogram is not normalized")
    return MelSpectrogram(values=s.values * 80.0 - 40.0, frame_rate=s.frame_rate, normalized=False)


def frame_slice(s: MelSpectrogram, t: int, fps: float) -> np.ndarray:
    """The 5 x 81 spectrogram slice centered at the row nearest video frame t.

    Rows beyond either end are replicated from the edge.
    """
    i = int(np.floor(t * s.frame_rate / fps + 0.5))
    rows = np.clip(np.arange(i - 2, i + 3), 0, len(s) - 1)
    return s.values[rows]


def slice_indices(n_rows: int, total_frames: int, frame_rate: float, fps: float) -> np.ndarray:
    """Row indices for every video frame at once: (total_frames, 5)."""
    t = np.arange(total_frames, dtype=np.float64)
    centers = np.floor(t * frame_rate / fps + 0.5).astype(np.int64)
    return np.clip(centers[:, None] + np.arange(-2, 3)[None, :], 0, n_rows - 1)


def slices_for_video(s: MelSpectrogram, total_frames: int, fps: float) -> np.ndarray:
    """(total_frames, 5, 81) stack of per-frame slices."""
    idx = slice_indices(len(s), total_frames, s.frame_rate, fps)
    return s.values[idx]


def detect_onset(w: Waveform) -> float:
    """Time of the first sample whose absolute amplitude exceeds 0.5."""
    hits = np.flatnonzero(np.abs(w.samples) > ONSET_THRESHOLD)
    if hits.size == 0:
        raise OnsetNotFound("no sample exceeds the 0.5 amplitude threshold")
    return float(hits[0] / w.sample_rate)


# ----------------------------------------------------- spectrogram cache

def save_spectrogram_cache(path, s: MelSpectrogram) -> None:
    """Write the normalized spectrogram: magic, u32 T_s, u32 band count, f32 frame_rate, f32 payload."""
    if not s.normalized:
        raise ConfigError("cache stores normalized spectrograms")
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<II", len(s), s.values.shape[1]))
        fh.write(struct.pack("<f", s.frame_rate))
        fh.write(np.ascontiguousarray(s.values, dtype="<f4").tobytes())


def load_spectrogram_cache(path) -> MelSpectrogram:
    with open(path, "rb") as fh:
        if fh.read(4) != CACHE_MAGIC:
            raise FormatError(f"{path}: bad magic, not a spectrogram cache")
        t_s, n_bands = struct.unpack("<II", fh.read(8))
        if n_bands != N_MEL_BANDS:
            raise FormatError(f"{path}: band count {n_bands} != {N_MEL_BANDS}")
        (frame_rate,) = struct.unpack("<f", fh.read(4))
        payload = fh.read(4 * t_s * n_bands)
        if len(payload) != 4 * t_s * n_bands:
            raise FormatError(f"{path}: truncated payload")
        values = np.frombuffer(payload, dtype="<f4").reshape(t_s, n_bands).astype(np.float64)
    return MelSpectrogram(values=values, frame_rate=float(frame_rate), normalized=True)
