"""Dataset splitting, training, peak picking, evaluation, and synthetic data."""

from choreoseg.pipeline.data import (
    DatasetIndex,
    Division,
    IndexEntry,
    VideoItem,
    load_divisions,
    load_index,
    load_items,
    load_video_item,
    save_divisions,
    save_index,
    split_dataset,
)
from choreoseg.pipeline.evaluation import run_eval, segment_curve
from choreoseg.pipeline.metrics import EvalReport, PointMetrics, evaluate, half_beat_tolerance_frames
from choreoseg.pipeline.peaks import enforce_min_distance, pick_peaks
from choreoseg.pipeline.synth import materialize_items, synth_dataset, write_synth_dataset
from choreoseg.pipeline.training import TrainHyper, TrainResult, train, validation_loss

__all__ = [
    "DatasetIndex", "Division", "IndexEntry", "VideoItem",
    "load_divisions", "load_index", "load_items", "load_video_item",
    "save_divisions", "save_index", "split_dataset",
    "run_eval", "segment_curve",
    "EvalReport", "PointMetrics", "evaluate", "half_beat_tolerance_frames",
    "enforce_min_distance", "pick_peaks",
    "materialize_items", "synth_dataset", "write_synth_dataset",
    "TrainHyper", "TrainResult", "train", "validation_loss",
]
