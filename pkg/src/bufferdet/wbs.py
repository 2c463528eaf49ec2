"""Window based suppression (WBS) as a streaming operator.

Each action class is suppressed independently. A prediction keeps its flag
for class ``c`` only if it scores highest for ``c`` in every window
``[k - w, k]`` that contained it; once cleared a flag stays cleared, and the
flags freeze when the point leaves the window. This is the same as asking for
a local maximum among scored points within ``w`` frames on either side, with
ties going to the earliest frame. ``wbs_offline_oracle`` computes that
definition directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import kernels as _default_kernels
from .errors import NonMonotonePush, SchemaViolation


@dataclass
class PredictionPoint:
    frame: int
    probs: np.ndarray
    indicators: np.ndarray
    finalized: bool = False

    @classmethod
    def new(cls, frame: int, probs) -> "PredictionPoint":
        probs = np.array(probs, dtype=np.float64)
        probs.setflags(write=False)
        return cls(int(frame), probs, np.zeros(len(probs), dtype=np.uint8))

    def finalize(self) -> None:
        self.indicators.setflags(write=False)
        self.finalized = True


@dataclass(frozen=True)
class Detection:
    video_id: str
    task: str
    frame: int
    class_index: int
    score: float
    emitted_at: int


class SuppressionWindow:
    """Online WBS state for one (video, task) stream.

    ``num_classes`` is the number of action classes C; probability vectors
    carry C + 1 entries and the background entry is never suppressed against
    nor flagged.
    """

    def __init__(self, w: int, num_classes: int, kernels=None):
        if w < 0:
            raise SchemaViolation("WBS window must be >= 0")
        self.w = int(w)
        self.num_classes = int(num_classes)
        self._k = kernels or _default_kernels
        self._points: List[PredictionPoint] = []
        self._scores = np.zeros((8, self.num_classes))
        self._ind = np.zeros((8, self.num_classes), dtype=np.uint8)
        self._last_frame: Optional[int] = None

    def __len__(self) -> int:
        return len(self._points)

    @property
    def buffered_frames(self) -> List[int]:
        return [p.frame for p in self._points]

    def _evict(self, m: int) -> List[PredictionPoint]:
        if m == 0:
            return []
        n = len(self._points)
        out = self._points[:m]
        for j, p in enumerate(out):
            p.indicators[: self.num_classes] = self._ind[j]
            p.finalize()
        self._points = self._points[m:]
        self._scores[: n - m] = self._scores[m:n]
        self._ind[: n - m] = self._ind[m:n]
        return out

    def expire(self, through_frame: int) -> List[PredictionPoint]:
        """Finalize every buffered point with ``frame <= through_frame``."""
        m = 0
        while m < len(self._points) and self._points[m].frame <= through_frame:
            m += 1
        return self._evict(m)

    def push(self, point: PredictionPoint) -> List[PredictionPoint]:
        if self._last_frame is not None and point.frame <= self._last_frame:
            raise NonMonotonePush(
                f"frame {point.frame} pushed after frame {self._last_frame}"
            )
        if len(point.probs) != self.num_classes + 1:
            raise SchemaViolation(
                f"expected {self.num_classes + 1} probabilities, got {len(point.probs)}"
            )
        self._last_frame = point.frame
        done = self.expire(point.frame - self.w - 1)

        n = len(self._points)
        if n == self._scores.shape[0]:
            self._scores = np.vstack([self._scores, np.zeros_like(self._scores)])
            self._ind = np.vstack([self._ind, np.zeros_like(self._ind)])
        scores = np.ascontiguousarray(point.probs[: self.num_classes])
        new_ind = np.zeros(self.num_classes, dtype=np.uint8)
        self._k.wbs_update(self._scores, self._ind, n, scores, new_ind)
        self._scores[n] = scores
        self._ind[n] = new_ind
        self._points.append(point)
        return done

    def pending_indicators(self) -> np.ndarray:
        """Current (not yet frozen) flags of the buffered points."""
        return self._ind[: len(self._points)].copy()

    def flush(self) -> List[PredictionPoint]:
        return self._evict(len(self._points))


def wbs_push(win: SuppressionWindow, point: PredictionPoint) -> List[PredictionPoint]:
    return win.push(point)


def wbs_flush(win: SuppressionWindow) -> List[PredictionPoint]:
    return win.flush()


def wbs_offline_oracle(frames, scores, w: int, mode: str = "sticky") -> np.ndarray:
    """Brute-force suppression flags for a complete stream.

    ``scores`` is ``(n, C)``: action classes only. ``mode="sticky"`` keeps a
    point iff it beats every earlier point and ties-or-beats every later point
    within ``w`` frames. ``mode="last_window"`` instead takes the verdict of
    the last window ``[k - w, k]`` (``k`` a scored frame) that contained the
    point, for comparison experiments.
    """
    frames = [int(f) for f in frames]
    scores = np.asarray(scores, dtype=np.float64)
    n = len(frames)
    C = scores.shape[1] if scores.ndim == 2 else 0
    out = np.zeros((n, C), dtype=np.uint8)
    if mode not in ("sticky", "last_window"):
        raise ValueError(f"unknown mode {mode!r}")

    for i in range(n):
        if mode == "sticky":
            lo, hi = frames[i] - w, frames[i] + w
        else:
            k_last = max(f for f in frames if frames[i] <= f <= frames[i] + w)
            lo, hi = k_last - w, k_last
        for c in range(C):
            keep = 1
            for j in range(n):
                if j == i or not lo <= frames[j] <= hi:
                    continue
                if scores[j, c] > scores[i, c]:
                    keep = 0
                elif scores[j, c] == scores[i, c] and frames[j] < frames[i]:
                    keep = 0
            out[i, c] = keep
    return out


def apply_indicators(
    point: PredictionPoint,
    video_id: str,
    task: str,
    emitted_at: int,
    min_score: float = 0.0,
) -> List[Detection]:
    """Detections for the flagged action classes of a finalized point."""
    if not point.finalized:
        raise ValueError(f"point at frame {point.frame} is not finalized")
    C = len(point.probs) - 1
    return [
        Detection(video_id, task, point.frame, c + 1, float(point.probs[c]), int(emitted_at))
        for c in range(C)
        if point.indicators[c] and point.probs[c] >= min_score
    ]
