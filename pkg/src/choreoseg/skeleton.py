"""Pose-detection ingestion and bone-vector preprocessing.

The visual branch consumes 68 keypoints per frame (26 body + 21 per hand).
Per frame we keep the single most confident person, linearly interpolate
detection gaps, and convert keypoints to 67 bone vectors rescaled to length
0.5, which removes dancer size and camera distance from the signal.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from choreoseg.errors import FormatError, ShapeError

N_KEYPOINTS = 68
N_BONES = 67

# Edge length below this is treated as a degenerate (coincident) bone.
EPS_BONE_LENGTH = 1e-6
BONE_LENGTH = 0.5


@dataclass(eq=False)
class PersonDetection:
    """One detected person: 68 (x, y) pixel keypoints with per-keypoint confidence."""

    keypoints: np.ndarray    # (68, 2)
    confidences: np.ndarray  # (68,)

    def __post_init__(self):
        self.keypoints = np.asarray(self.keypoints, dtype=np.float64)
        self.confidences = np.asarray(self.confidences, dtype=np.float64)
        if self.keypoints.shape != (N_KEYPOINTS, 2) or self.confidences.shape != (N_KEYPOINTS,):
            raise ShapeError(
                f"person needs {N_KEYPOINTS} keypoints, got {self.keypoints.shape} / {self.confidences.shape}"
            )

    @property
    def confidence_sum(self) -> float:
        return float(self.confidences.sum())


@dataclass(eq=False)
class RawDetectionFrame:
    """Detector output for one video frame; may contain zero or many persons."""

    persons: list
    frame_index: int


@dataclass(eq=False)
class KeypointSequence:
    """Dense per-frame keypoints for the adopted dancer.

    `detected_mask` records which (frame, keypoint) entries came from the
    detector; the rest are filled by `interpolate_missing`.
    """

    frames: np.ndarray         # (T, 68, 2)
    detected_mask: np.ndarray  # (T, 68) bool
    fps: float

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.detected_mask = np.asarray(self.detected_mask, dtype=bool)
        if self.frames.ndim != 3 or self.frames.shape[1:] != (N_KEYPOINTS, 2):
            raise ShapeError(f"frames shape {self.frames.shape}")
        if self.detected_mask.shape != self.frames.shape[:2]:
            raise ShapeError(f"mask shape {self.detected_mask.shape}")

    def __len__(self) -> int:
        return self.frames.shape[0]


@dataclass(eq=False)
class SkeletonTopology:
    """67 (parent, child) edges forming a tree over the 68 keypoints."""

    edges: np.ndarray  # (67, 2) int

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64)
        if self.edges.shape != (N_BONES, 2):
            raise ShapeError(f"need {N_BONES} edges, got {self.edges.shape}")
        if self.edges.min() < 0 or self.edges.max() >= N_KEYPOINTS:
            raise FormatError("edge index out of range")
        if np.any(self.edges[:, 0] == self.edges[:, 1]):
            raise FormatError("self-loop edge")
        # 67 edges over 68 nodes form a tree iff the graph is connected and acyclic;
        # union-find catches both at once.
        parent = list(range(N_KEYPOINTS))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for p, c in self.edges:
            rp, rc = find(int(p)), find(int(c))
            if rp == rc:
                raise FormatError("edges contain a cycle")
            parent[rp] = rc
        if len({find(i) for i in range(N_KEYPOINTS)}) != 1:
            raise FormatError("edges do not connect all keypoints")


def _body_edges():
    # 26-keypoint body layout: nose 0, eyes 1/2, ears 3/4, shoulders 5/6,
    # elbows 7/8, wrists 9/10, hips 11/12, knees 13/14, ankles 15/16,
    # head 17, neck 18, pelvis 19, big toes 20/21, small toes 22/23, heels 24/25.
    return [
        (19, 18), (18, 17), (17, 0),
        (0, 1), (0, 2), (1, 3), (2, 4),
        (18, 5), (18, 6), (5, 7), (7, 9), (6, 8), (8, 10),
        (19, 11), (19, 12), (11, 13), (13, 15), (12, 14), (14, 16),
        (15, 20), (15, 22), (15, 24), (16, 21), (16, 23), (16, 25),
    ]


def _hand_edges(root):
    # 21-keypoint hand: wrist at `root`, then 4 joints per finger.
    edges = []
    for finger in range(5):
        base = root + 1 + 4 * finger
        edges.append((root, base))
        for j in range(3):
            edges.append((base + j, base + j + 1))
    return edges


def default_topology() -> SkeletonTopology:
    """Body tree rooted at the pelvis plus both hand trees hung off the wrists."""
    edges = _body_edges()
    edges.append((9, 26))    # left wrist -> left hand root
    edges.extend(_hand_edges(26))
    edges.append((10, 47))   # right wrist -> right hand root
    edges.extend(_hand_edges(47))
    return SkeletonTopology(np.array(edges))


def load_topology(path) -> SkeletonTopology:
    """Read a topology file: a JSON array of 67 [parent, child] pairs."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise FormatError(f"{path}: topology file must be a JSON array")
    return SkeletonTopology(np.array(data))


def save_topology(path, topo: SkeletonTopology) -> None:
    with open(path, "w") as fh:
        json.dump([[int(p), int(c)] for p, c in topo.edges], fh)


# ------------------------------------------------------------ operations

def resolve_dancer(frame: RawDetectionFrame):
    """Pick the person with the greatest summed keypoint confidence.

    Returns None for an empty frame. Equal sums resolve to the lowest person
    index so the choice is order-stable.
    """
    if not frame.persons:
        return None
    return max(frame.persons, key=lambda p: p.confidence_sum)


def interpolate_missing(track: KeypointSequence) -> KeypointSequence:
    """Fill undetected keypoints.

    Interior gaps are linearly interpolated between the nearest detected
    frames on either side; leading/trailing gaps copy the nearest detected
    value; keypoints never detected anywhere become (0, 0). Detected entries
    are left bit-identical, so the operation is idempotent.
    """
    T = len(track)
    if T < 1:
        raise ShapeError("empty keypoint sequence")
    frames = track.frames.copy()
    ts = np.arange(T, dtype=np.float64)
    for i in range(N_KEYPOINTS):
        det = np.flatnonzero(track.detected_mask[:, i])
        if det.size == 0:
            frames[:, i, :] = 0.0
            continue
        if det.size == T:
            continue
        for axis in range(2):
            # np.interp clamps to the boundary samples, giving the constant extension
            frames[:, i, axis] = np.interp(ts, det.astype(np.float64), track.frames[det, i, axis])
        frames[det, i, :] = track.frames[det, i, :]
    return KeypointSequence(frames=frames, detected_mask=track.detected_mask.copy(), fps=track.fps)


def bone_vectors(keypoints, topo: SkeletonTopology) -> np.ndarray:
    """67 child-minus-parent vectors rescaled to length 0.5.

    Bones shorter than EPS_BONE_LENGTH come out as (0, 0) instead of dividing
    by a vanishing norm.
    """
    kp = np.asarray(keypoints, dtype=np.float64)
    if kp.shape != (N_KEYPOINTS, 2):
        raise ShapeError(f"expected ({N_KEYPOINTS}, 2) keypoints, got {kp.shape}")
    raw = kp[topo.edges[:, 1]] - kp[topo.edges[:, 0]]
    lengths = np.sqrt((raw ** 2).sum(axis=1))
    out = np.zeros_like(raw)
    ok = lengths >= EPS_BONE_LENGTH
    out[ok] = raw[ok] * (BONE_LENGTH / lengths[ok])[:, None]
    return out


def bones_for_sequence(track: KeypointSequence, topo: SkeletonTopology) -> np.ndarray:
    """Per-frame bone vectors flattened to (T, 134): [dx0, dy0, dx1, dy1, ...]."""
    kp = track.frames
    raw = kp[:, topo.edges[:, 1], :] - kp[:, topo.edges[:, 0], :]
    lengths = np.sqrt((raw ** 2).sum(axis=2))
    ok = lengths >= EPS_BONE_LENGTH
    scale = np.zeros_like(lengths)
    scale[ok] = BONE_LENGTH / lengths[ok]
    out = raw * scale[:, :, None]
    return out.reshape(len(track), 2 * N_BONES)


# ------------------------------------------------------------ file I/O

def frames_from_jsonl(path) -> list:
    """Read per-frame detections: one JSON object per line,
    {"idx": int, "people": [{"kp": [[x, y, c] * 68]}]}. Missing indices become
    empty frames."""
    by_idx = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                idx = int(obj["idx"])
                persons = []
                for person in obj.get("people", []):
                    kp = np.asarray(person["kp"], dtype=np.float64)
                    if kp.shape != (N_KEYPOINTS, 3):
                        raise ShapeError(f"person needs {N_KEYPOINTS} [x, y, c] keypoints, got {kp.shape}")
                    persons.append(PersonDetection(keypoints=kp[:, :2], confidences=kp[:, 2]))
            except (KeyError, TypeError, ValueError, ShapeError) as exc:
                raise FormatError(f"{path}:{line_no}: {exc}") from exc
            by_idx[idx] = persons
    if not by_idx:
        raise FormatError(f"{path}: no frames")
    if min(by_idx) < 0:
        raise FormatError(f"{path}: negative frame index")
    total = max(by_idx) + 1
    return [RawDetectionFrame(persons=by_idx.get(t, []), frame_index=t) for t in range(total)]


def sequence_from_frames(frames: list, fps: float) -> KeypointSequence:
    """Adopt one dancer per frame and assemble the dense keypoint track.

    A confidence of exactly 0 counts as "not detected" for that keypoint.
    """
    T = len(frames)
    coords = np.zeros((T, N_KEYPOINTS, 2), dtype=np.float64)
    mask = np.zeros((T, N_KEYPOINTS), dtype=bool)
    for t, frame in enumerate(frames):
        person = resolve_dancer(frame)
        if person is None:
            continue
        coords[t] = person.keypoints
        mask[t] = person.confidences > 0.0
    return KeypointSequence(frames=coords, detected_mask=mask, fps=fps)


def load_sequence(path, fps: float) -> KeypointSequence:
    """frames_from_jsonl + sequence_from_frames + interpolate_missing in one step."""
    return interpolate_missing(sequence_from_frames(frames_from_jsonl(path), fps))


_IMG_INDEX = re.compile(r"(\d+)")


def convert_alphapose_results(path, out_path) -> int:
    """Rewrite the common pose-detector result JSON (a flat list of
    {"image_id", "keypoints": [x, y, c, ...]} entries, possibly several per
    image) into the per-frame JSON Lines layout. Returns the frame count."""
    with open(path) as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise FormatError(f"{path}: expected a JSON array of detections")
    by_idx: dict = {}
    for entry in entries:
        m = _IMG_INDEX.search(str(entry.get("image_id", "")))
        if m is None:
            raise FormatError(f"{path}: image_id {entry.get('image_id')!r} has no frame number")
        idx = int(m.group(1))
        flat = np.asarray(entry["keypoints"], dtype=np.float64)
        if flat.size != N_KEYPOINTS * 3:
            raise FormatError(f"{path}: expected {N_KEYPOINTS * 3} keypoint values, got {flat.size}")
        by_idx.setdefault(idx, []).append(flat.reshape(N_KEYPOINTS, 3).tolist())
    total = max(by_idx) + 1
    with open(out_path, "w") as fh:
        for t in range(total):
            fh.write(json.dumps({"idx": t, "people": [{"kp": kp} for kp in by_idx.get(t, [])]}) + "\n")
    return total
