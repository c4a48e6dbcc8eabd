"""Feature extraction from raw artifacts to the cached arrays training consumes."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from choreoseg import audio, skeleton


@dataclass
class VideoFeatures:
    bones: np.ndarray              # (T, 134)
    spectrogram: audio.MelSpectrogram  # normalized
    onset_c0: float                # seconds
    total_frames: int


def extract_features(keypoints_path, wav_path, fps: float,
                     topology: skeleton.SkeletonTopology | None = None,
                     spec_cfg: audio.SpectrogramConfig = audio.SpectrogramConfig()) -> VideoFeatures:
    """Keypoints JSONL + WAV -> bone vectors, normalized spectrogram, onset time."""
    topo = topology if topology is not None else skeleton.default_topology()
    seq = skeleton.load_sequence(keypoints_path, fps)
    bones = skeleton.bones_for_sequence(seq, topo)
    wave = audio.load_wav(wav_path)
    spec = audio.normalize_spectrogram(audio.mel_spectrogram(wave, spec_cfg))
    c0 = audio.detect_onset(wave)
    return VideoFeatures(bones=bones, spectrogram=spec, onset_c0=c0, total_frames=len(seq))


def write_feature_cache(out_dir, video_id: str, feats: VideoFeatures) -> tuple[str, str]:
    """Persist bones as .npy and the spectrogram in the binary cache format.

    Returns the two file names (relative to out_dir).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bones_name = f"{video_id}.bones.npy"
    spec_name = f"{video_id}.spec.dspc"
    np.save(out_dir / bones_name, feats.bones.astype(np.float32))
    audio.save_spectrogram_cache(out_dir / spec_name, feats.spectrogram)
    return bones_name, spec_name
