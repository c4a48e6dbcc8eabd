"""choreoseg: automatic dance-video segmentation.

Pose-derived bone vectors and Mel-spectrogram slices feed a non-causal
temporal convolutional network that scores every video frame with a
segmentation probability; peak picking turns the curve into segmentation
points for practice playback and annotation tooling.
"""

__version__ = "0.1.0"
