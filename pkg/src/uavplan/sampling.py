"""Search for the lowest sampling rate that reaches the best recall.

The search doubles the rate while recall keeps improving, then bisects the
last doubling interval until it is no wider than ``epsilon``. Recall values
are memoized, so a rate is never evaluated twice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import ValidationError
from .metrics import DetectionTrace, GroundTruthTracks, evaluate

MODULE = "sampling_search"

RecallOracle = Callable[[float], float]


@dataclass(frozen=True)
class RateSearchConfig:
    r1: float
    epsilon: float
    recall_oracle: RecallOracle
    # Doubling never probes above this rate; None leaves it unbounded.
    r_cap: float | None = None
    max_doublings: int = 64

    def __post_init__(self):
        if not self.r1 > 0:
            raise ValidationError("r1", "must be > 0", module=MODULE)
        if not self.epsilon > 0:
            raise ValidationError("epsilon", "must be > 0", module=MODULE)
        if self.r_cap is not None and not self.r_cap >= self.r1:
            raise ValidationError("r_cap", "must be >= r1", module=MODULE)


@dataclass(frozen=True)
class RateSearchResult:
    rate: float
    recall: float
    evaluations: tuple[tuple[float, float], ...]
    oracle_calls: int

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "recall": self.recall,
            "oracle_calls": self.oracle_calls,
            "evaluations": [{"rate": r, "recall": p} for r, p in self.evaluations],
        }


def initial_rate(d_far: float, v: float) -> float:
    """One sample per time needed to fly past the farthest detectable object."""
    if not d_far > 0:
        raise ValidationError("d_far", "must be > 0", module=MODULE)
    if not v > 0:
        raise ValidationError("v", "must be > 0", module=MODULE)
    return v / d_far


def search(config: RateSearchConfig) -> RateSearchResult:
    probes: dict[float, float] = {}
    order: list[tuple[float, float]] = []

    def recall(rate: float) -> float:
        if rate not in probes:
            value = float(config.recall_oracle(rate))
            probes[rate] = value
            order.append((rate, value))
        return probes[rate]

    r1 = config.r1
    recall(r1)
    for _ in range(config.max_doublings):
        r2 = r1 * 2
        if config.r_cap is not None:
            r2 = min(r2, config.r_cap)
        if r2 <= r1 or not recall(r2) > recall(r1):
            break
        r1 = r2

    r_top, r_bottom = r1, r1 / 2
    # halving the width is exact, so float drift cannot add a bisection step
    width = r_top - r_bottom
    while width > config.epsilon:
        width /= 2
        mid = r_bottom + width
        if recall(mid) < recall(r_top):
            r_bottom = mid
        else:
            r_top = mid

    return RateSearchResult(r_top, probes[r_top], tuple(order), len(order))


def subsample_trace(trace: DetectionTrace, rate: float) -> DetectionTrace:
    """Keep the frames nearest to a ``rate`` Hz grid anchored at the first frame.

    Rates at or above the trace's own rate return every frame.
    """
    if not rate > 0:
        raise ValidationError("rate", "must be > 0", module=MODULE)
    frames = trace.frames
    if len(frames) < 2:
        return trace
    t0 = frames[0][0]
    times = [t for t, _ in frames]
    base_rate = (len(times) - 1) / (times[-1] - t0)
    if rate >= base_rate * (1 - 1e-9):
        return trace
    step = 1.0 / rate
    keep, k, idx = [], 0, 0
    while True:
        target = t0 + k * step
        if target > times[-1] + step / 2:
            break
        while idx + 1 < len(times) and abs(times[idx + 1] - target) <= abs(times[idx] - target):
            idx += 1
        if not keep or keep[-1] != idx:
            keep.append(idx)
        k += 1
        if idx == len(times) - 1 and target >= times[-1]:
            break
    return DetectionTrace(tuple(frames[i] for i in keep))


def trace_recall_oracle(trace: DetectionTrace, truth: GroundTruthTracks, iou_threshold: float = 0.5) -> RecallOracle:
    """Recall of a stored trace re-subsampled at each probed rate."""

    def oracle(rate: float) -> float:
        return evaluate(subsample_trace(trace, rate), truth, iou_threshold).recall

    return oracle
