"""Mission-level precision and recall of a sampled detection trace.

Precision counts every detection in every sampled frame. Recall is per
object identity: a ground-truth track counts as found once any sampled
frame detects it correctly, and every annotated track counts toward the
denominator, including tracks that never appear in a sampled frame.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError
from .profiles import read_json, write_json

MODULE = "metrics"
DEFAULT_IOU_THRESHOLD = 0.5


@dataclass(frozen=True)
class Box:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    class_label: str

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValidationError("x_max", "must exceed x_min", module=MODULE)
        if not self.y_min < self.y_max:
            raise ValidationError("y_max", "must exceed y_min", module=MODULE)

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


def iou(a: Box, b: Box) -> float:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0.0
    inter = w * h
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class DetectionTrace:
    frames: tuple[tuple[float, tuple[Box, ...]], ...]

    def __post_init__(self):
        frames = tuple((float(t), tuple(boxes)) for t, boxes in self.frames)
        object.__setattr__(self, "frames", frames)
        for i in range(1, len(frames)):
            if not frames[i][0] > frames[i - 1][0]:
                raise ValidationError(f"frames[{i}].timestamp", "timestamps must be strictly increasing", module=MODULE)


@dataclass(frozen=True)
class GroundTruthTracks:
    """Identity-tracked truth boxes.

    ``tracks`` maps track id to {timestamp: Box}. ``frame_times`` lists every
    annotated frame, including frames annotated as empty.
    """

    tracks: Mapping[str, Mapping[float, Box]]
    frame_times: frozenset = frozenset()
    _by_frame: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tracks = {str(tid): dict(occ) for tid, occ in self.tracks.items()}
        for tid, occ in tracks.items():
            if not occ:
                raise ValidationError(f"tracks[{tid}]", "track has no occurrences", module=MODULE)
        by_frame: dict[float, list[tuple[str, Box]]] = {float(t): [] for t in self.frame_times}
        for tid in sorted(tracks):
            for t, box in tracks[tid].items():
                by_frame.setdefault(float(t), []).append((tid, box))
        object.__setattr__(self, "tracks", tracks)
        object.__setattr__(self, "frame_times", frozenset(by_frame))
        object.__setattr__(self, "_by_frame", by_frame)

    @classmethod
    def from_frames(cls, frames: Iterable[tuple[float, Iterable[tuple[str, Box]]]]) -> "GroundTruthTracks":
        tracks: dict[str, dict[float, Box]] = {}
        times = set()
        for t, items in frames:
            t = float(t)
            times.add(t)
            for tid, box in items:
                occ = tracks.setdefault(str(tid), {})
                if t in occ:
                    raise ValidationError(f"frames[{t}].track_id", f"track {tid!r} annotated twice", module=MODULE)
                occ[t] = box
        return cls(tracks, frozenset(times))

    def boxes_at(self, t: float) -> list[tuple[str, Box]]:
        return self._by_frame[t]

    def __len__(self) -> int:
        return len(self.tracks)


@dataclass(frozen=True)
class MetricReport:
    tp1: int
    fp: int
    tp2: int
    fn: int
    precision: float
    recall: float
    precision_defined: bool = True
    recall_defined: bool = True

    def to_dict(self) -> dict:
        return {
            "tp1": self.tp1,
            "fp": self.fp,
            "tp2": self.tp2,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "precision_defined": self.precision_defined,
            "recall_defined": self.recall_defined,
        }


def match_frame(
    detections: Sequence[Box],
    truths: Sequence[tuple[str, Box]],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> list[tuple[int, int]]:
    """Greedy one-to-one matching of detections to truth boxes in one frame.

    Same-class pairs are visited in descending IoU order (index order breaks
    ties) and a pair is kept when both sides are unclaimed and the IoU
    strictly exceeds the threshold. Returns (detection index, truth index).
    """
    pairs = []
    for i, det in enumerate(detections):
        for j, (_, truth) in enumerate(truths):
            if det.class_label != truth.class_label:
                continue
            overlap = iou(det, truth)
            if overlap > iou_threshold:
                pairs.append((-overlap, i, j))
    pairs.sort()
    used_det, used_truth, matches = set(), set(), []
    for _, i, j in pairs:
        if i in used_det or j in used_truth:
            continue
        used_det.add(i)
        used_truth.add(j)
        matches.append((i, j))
    return matches


def evaluate(
    trace: DetectionTrace,
    truth: GroundTruthTracks,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> MetricReport:
    if not 0 <= iou_threshold <= 1:
        raise ValidationError("iou_threshold", "must lie in [0, 1]", module=MODULE)
    tp1 = fp = 0
    found: set[str] = set()
    for k, (t, detections) in enumerate(trace.frames):
        if t not in truth.frame_times:
            raise ValidationError(f"frames[{k}].timestamp", f"no ground-truth annotation for t={t!r}", module=MODULE)
        truths = truth.boxes_at(t)
        matches = match_frame(detections, truths, iou_threshold)
        tp1 += len(matches)
        fp += len(detections) - len(matches)
        found.update(truths[j][0] for _, j in matches)
    tp2 = len(found)
    fn = len(truth.tracks) - tp2
    precision_defined = tp1 + fp > 0
    recall_defined = tp2 + fn > 0
    precision = tp1 / (tp1 + fp) if precision_defined else 1.0
    recall = tp2 / (tp2 + fn) if recall_defined else 1.0
    return MetricReport(tp1, fp, tp2, fn, precision, recall, precision_defined, recall_defined)


# -- files ---------------------------------------------------------------------------

def _box_from(item: Mapping, path: str) -> Box:
    try:
        coords = item["box"]
        label = item["class"]
        if not isinstance(label, str) or len(coords) != 4:
            raise TypeError
        x0, y0, x1, y1 = (float(c) for c in coords)
    except (KeyError, TypeError, ValueError):
        raise ValidationError(path, "expected {class: str, box: [x_min, y_min, x_max, y_max]}", module=MODULE) from None
    try:
        return Box(x0, y0, x1, y1, label)
    except ValidationError as exc:
        raise exc.prefixed(path + ".box") from None


def _frames_of(data, path: str) -> list:
    frames = data.get("frames") if isinstance(data, Mapping) else None
    if not isinstance(frames, list):
        raise ValidationError(f"{path}.frames", "expected a list of frames", module=MODULE)
    return frames


def trace_from_dict(data) -> DetectionTrace:
    frames = []
    for i, frame in enumerate(_frames_of(data, "trace")):
        fpath = f"trace.frames[{i}]"
        if not isinstance(frame, Mapping) or "t" not in frame:
            raise ValidationError(fpath, "expected {t, detections}", module=MODULE)
        boxes = tuple(_box_from(d, f"{fpath}.detections[{j}]") for j, d in enumerate(frame.get("detections", [])))
        frames.append((float(frame["t"]), boxes))
    try:
        return DetectionTrace(tuple(frames))
    except ValidationError as exc:
        raise exc.prefixed("trace") from None


def truth_from_dict(data) -> GroundTruthTracks:
    frames = []
    for i, frame in enumerate(_frames_of(data, "truth")):
        fpath = f"truth.frames[{i}]"
        if not isinstance(frame, Mapping) or "t" not in frame:
            raise ValidationError(fpath, "expected {t, objects}", module=MODULE)
        items = []
        for j, obj in enumerate(frame.get("objects", [])):
            opath = f"{fpath}.objects[{j}]"
            if not isinstance(obj, Mapping) or "track_id" not in obj:
                raise ValidationError(opath, "missing track_id", module=MODULE)
            items.append((str(obj["track_id"]), _box_from(obj, opath)))
        frames.append((float(frame["t"]), items))
    return GroundTruthTracks.from_frames(frames)


def _box_dict(box: Box) -> dict:
    return {"class": box.class_label, "box": [box.x_min, box.y_min, box.x_max, box.y_max]}


def trace_to_dict(trace: DetectionTrace) -> dict:
    return {"frames": [{"t": t, "detections": [_box_dict(b) for b in boxes]} for t, boxes in trace.frames]}


def truth_to_dict(truth: GroundTruthTracks) -> dict:
    frames = []
    for t in sorted(truth.frame_times):
        frames.append({"t": t, "objects": [{"track_id": tid, **_box_dict(b)} for tid, b in truth.boxes_at(t)]})
    return {"frames": frames}


def load_trace(path: str | os.PathLike) -> DetectionTrace:
    return trace_from_dict(read_json(path, module=MODULE))


def load_truth(path: str | os.PathLike) -> GroundTruthTracks:
    return truth_from_dict(read_json(path, module=MODULE))


def save_trace(trace: DetectionTrace, path: str | os.PathLike) -> None:
    write_json(trace_to_dict(trace), path)


def save_truth(truth: GroundTruthTracks, path: str | os.PathLike) -> None:
    write_json(truth_to_dict(truth), path)
