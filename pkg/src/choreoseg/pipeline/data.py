"""Dataset index, stratified splitting, and in-memory video items."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from choreoseg import audio, labels
from choreoseg.errors import ConfigError, FormatError

CATEGORIES = ("basic", "advanced")


@dataclass
class IndexEntry:
    video_id: str
    category: str
    bones_path: str
    spectrogram_path: str
    annotation_path: str
    meta: labels.VideoMeta

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ConfigError(f"unknown category {self.category!r}")


@dataclass
class DatasetIndex:
    entries: list = field(default_factory=list)

    def __post_init__(self):
        ids = [e.video_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate video ids in index")

    def by_id(self, video_id: str) -> IndexEntry:
        for e in self.entries:
            if e.video_id == video_id:
                return e
        raise KeyError(video_id)

    def ids_by_category(self) -> dict:
        out: dict = {c: [] for c in CATEGORIES}
        for e in self.entries:
            out[e.category].append(e.video_id)
        return out


def save_index(path, index: DatasetIndex) -> None:
    data = {
        "entries": [
            {
                "video_id": e.video_id,
                "category": e.category,
                "bones_path": e.bones_path,
                "spectrogram_path": e.spectrogram_path,
                "annotation_path": e.annotation_path,
                "meta": labels.meta_dict(e.meta),
            }
            for e in index.entries
        ]
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)


def load_index(path, check_files=True) -> DatasetIndex:
    base = Path(path).parent
    with open(path) as fh:
        data = json.load(fh)
    entries = []
    try:
        for e in data["entries"]:
            entry = IndexEntry(
                video_id=e["video_id"],
                category=e["category"],
                bones_path=str(base / e["bones_path"]),
                spectrogram_path=str(base / e["spectrogram_path"]),
                annotation_path=str(base / e["annotation_path"]),
                meta=labels.meta_from_dict(e["meta"]),
            )
            entries.append(entry)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if check_files:
        for e in entries:
            for p in (e.bones_path, e.spectrogram_path, e.annotation_path):
                if not Path(p).exists():
                    raise FormatError(f"{path}: referenced file missing: {p}")
    return DatasetIndex(entries=entries)


# ---------------------------------------------------------------- division

@dataclass
class Division:
    train: list
    val: list
    test: list

    def parts(self):
        return {"train": self.train, "val": self.val, "test": self.test}

    def to_dict(self) -> dict:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test)}

    @classmethod
    def from_dict(cls, d: dict) -> "Division":
        return cls(train=list(d["train"]), val=list(d["val"]), test=list(d["test"]))


def split_dataset(index: DatasetIndex, seed: int, n_divisions: int = 10) -> list:
    """n_divisions independent train/val/test partitions at a 3:1:1 ratio,
    stratified per category so each part keeps the basic:advanced mix.

    Within each category, val and test both get floor(n/5) videos and train
    takes the remainder; the shuffles are seeded, so the same seed reproduces
    the same divisions.
    """
    rng = np.random.default_rng(seed)
    by_cat = index.ids_by_category()
    divisions = []
    for _ in range(n_divisions):
        train: list = []
        val: list = []
        test: list = []
        for cat in CATEGORIES:
            ids = sorted(by_cat[cat])
            if not ids:
                continue
            order = rng.permutation(len(ids))
            shuffled = [ids[i] for i in order]
            n = len(ids)
            n_hold = n // 5
            val.extend(shuffled[:n_hold])
            test.extend(shuffled[n_hold:2 * n_hold])
            train.extend(shuffled[2 * n_hold:])
        divisions.append(Division(train=train, val=val, test=test))
    return divisions


def save_divisions(path, divisions: list) -> None:
    with open(path, "w") as fh:
        json.dump({"divisions": [d.to_dict() for d in divisions]}, fh, indent=2)


def load_divisions(path) -> list:
    with open(path) as fh:
        data = json.load(fh)
    try:
        return [Division.from_dict(d) for d in data["divisions"]]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


# -------------------------------------------------------------- video items

@dataclass(eq=False)
class VideoItem:
    """Everything one training/eval step needs, already aligned per frame."""

    video_id: str
    bones: np.ndarray        # (T, 134)
    slices: np.ndarray       # (T, 5, 81)
    label: np.ndarray        # (T,)
    meta: labels.VideoMeta


def load_video_item(entry: IndexEntry) -> VideoItem:
    bones = np.load(entry.bones_path)
    spec = audio.load_spectrogram_cache(entry.spectrogram_path)
    meta, ann = labels.load_annotations(entry.annotation_path)
    T = meta.total_frames
    if bones.shape[0] != T:
        raise FormatError(
            f"{entry.video_id}: bone frames {bones.shape[0]} != total_frames {T}"
        )
    label = labels.ground_truth(ann, labels.sigma_frames(meta), T).values
    slices = audio.slices_for_video(spec, T, meta.fps)
    return VideoItem(video_id=entry.video_id, bones=bones.astype(np.float32),
                     slices=slices.astype(np.float32), label=label, meta=meta)


def load_items(index: DatasetIndex, ids) -> list:
    return [load_video_item(index.by_id(v)) for v in ids]
