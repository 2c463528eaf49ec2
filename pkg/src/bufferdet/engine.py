"""Frame-accurate simulation of a buffered live stream.

The source cursor ``t`` advances one frame per tick. A prediction for frame
``k`` is requested when ``t`` reaches ``k + L`` (``L`` frames of lookahead);
the scorer sees the clip ``[k - (l - L) + 1, k + L]``. The prediction then
sits in the suppression window until ``t`` reaches ``k + L + w`` and is
emitted with ``emitted_at = t``. The audience therefore trails the source by
``L + w`` frames.

Every payload read and every scorer/finalize event is logged with the source
time at which it happened; ``audit`` re-derives causality and latency from
that log alone.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .annotations import AnnotationSet, check_task
from .errors import (
    PayloadGap,
    SchemaViolation,
    ScorerFailure,
    UnknownClass,
    UnknownVideo,
    ValidationError,
)
from .head import FeatureClip, HeadWeights, head_forward
from .streams import check_prob_vector
from .wbs import Detection, PredictionPoint, SuppressionWindow, apply_indicators

__all__ = [
    "AuditReport",
    "BufferConfig",
    "Clip",
    "Detection",
    "HeadScorer",
    "PredictionPoint",
    "StreamEngine",
    "audit",
    "buffer_budget",
    "clip_window",
    "passthrough_scorer",
    "read_detections",
    "run_stream",
    "write_detections",
]


@dataclass(frozen=True)
class BufferConfig:
    clip_len: int = 64
    lookahead_ratio: float = 0.75
    wbs_window: int = 30
    stride: int = 10

    def __post_init__(self):
        if self.clip_len < 1:
            raise SchemaViolation("clip_len must be >= 1")
        if not 0.0 <= self.lookahead_ratio <= 1.0:
            raise SchemaViolation("lookahead_ratio must lie in [0, 1]")
        if self.wbs_window < 0:
            raise SchemaViolation("wbs_window must be >= 0")
        if self.stride < 1:
            raise SchemaViolation("stride must be >= 1")

    @property
    def lookahead(self) -> int:
        # decimal reading of the ratio, so 0.29 * 100 is 29 and not 28
        return math.floor(Fraction(repr(float(self.lookahead_ratio))) * self.clip_len)

    @property
    def total_delay(self) -> int:
        return self.lookahead + self.wbs_window

    @property
    def warmup_threshold(self) -> int:
        return self.clip_len - self.lookahead


def buffer_budget(cfg: BufferConfig, fps: Optional[float] = None) -> Tuple[int, Optional[float]]:
    frames = cfg.total_delay
    return frames, (frames / fps if fps else None)


def clip_window(k: int, cfg: BufferConfig) -> Tuple[int, int]:
    L = cfg.lookahead
    return k - (cfg.clip_len - L) + 1, k + L


class Clip:
    """Lazy view of the scorer input for target frame ``k``.

    Reads go through the engine so each one is logged against the current
    source time. Frames before 1 replicate frame 1; frames after the last
    video frame replicate the last one.
    """

    def __init__(self, engine: "StreamEngine", k: int):
        self._engine = engine
        self.k = k
        self.start, self.stop = clip_window(k, engine.cfg)

    @property
    def video_id(self) -> str:
        return self._engine.video_id

    @property
    def target_index(self) -> int:
        return self.k - self.start

    def target(self) -> np.ndarray:
        return self._engine._read(self.k)

    def data(self) -> np.ndarray:
        return np.stack([self._engine._read(f) for f in range(self.start, self.stop + 1)])


Scorer = Callable[[Clip], Sequence[float]]


def passthrough_scorer(clip: Clip) -> np.ndarray:
    return clip.target()


class HeadScorer:
    """Runs a trained head over the clip's feature payloads."""

    def __init__(self, weights: HeadWeights):
        self.weights = weights

    def __call__(self, clip: Clip) -> np.ndarray:
        return head_forward(self.weights, FeatureClip(clip.data(), clip.target_index))


@dataclass
class AuditReport:
    video_id: str
    total_delay: int
    scorer_calls: int = 0
    finalizations: int = 0
    causality_violations: int = 0
    latency_violations: int = 0
    duplicate_finalizations: int = 0
    warmup_detections: int = 0
    detections: int = 0

    @property
    def ok(self) -> bool:
        return (
            self.causality_violations == 0
            and self.latency_violations == 0
            and self.duplicate_finalizations == 0
            and self.scorer_calls == self.finalizations
        )

    def to_dict(self) -> dict:
        return asdict(self)


def audit(
    log: Sequence[Tuple[str, int, int]],
    cfg: BufferConfig,
    video_id: str = "",
    detections: Sequence[Detection] = (),
) -> AuditReport:
    """Check an event log ``(event, frame, source_time)``.

    ``read``: a payload frame was read, violation if ``frame > source_time``.
    ``score``: target ``frame`` was scored, violation if before ``frame + L``.
    ``finalize``: latency violation unless exactly ``frame + L + w``.
    """
    L, D = cfg.lookahead, cfg.total_delay
    rep = AuditReport(video_id, D)
    finalized = set()
    for event, frame, t in log:
        if event == "read":
            rep.causality_violations += frame > t
        elif event == "score":
            rep.scorer_calls += 1
            rep.causality_violations += t < frame + L
        elif event == "finalize":
            rep.finalizations += 1
            rep.latency_violations += t - frame != D
            rep.duplicate_finalizations += frame in finalized
            finalized.add(frame)
    rep.detections = len(detections)
    rep.warmup_detections = sum(d.frame < cfg.warmup_threshold for d in detections)
    return rep


class StreamEngine:
    def __init__(
        self,
        stream,
        num_frames: int,
        scorer: Scorer,
        cfg: BufferConfig,
        task: str,
        video_id: Optional[str] = None,
        min_score: float = 0.0,
        kernels=None,
        num_classes: Optional[int] = None,
    ):
        check_task(task)
        self.stream = stream
        self.num_frames = int(num_frames)
        self.scorer = scorer
        self.cfg = cfg
        self.task = task
        self.video_id = video_id if video_id is not None else stream.video_id
        self.min_score = min_score
        self._kernels = kernels
        self._num_classes = num_classes
        self._rows: Dict[int, int] = {int(f): i for i, f in enumerate(stream.frames)}
        self.t = 0
        self.log: List[Tuple[str, int, int]] = []
        self.points: List[PredictionPoint] = []
        self.detections: List[Detection] = []
        self.window: Optional[SuppressionWindow] = None

    @property
    def audience_cursor(self) -> int:
        return max(0, self.t - self.cfg.total_delay)

    def _read(self, frame: int) -> np.ndarray:
        src = min(max(frame, 1), self.num_frames)
        self.log.append(("read", src, self.t))
        row = self._rows.get(src)
        if row is None:
            raise PayloadGap(
                f"video {self.video_id!r}: no payload for frame {src} "
                f"(needed for frame {frame} at source time {self.t})"
            )
        return self.stream.values[row]

    def _is_scheduled(self, k: int) -> bool:
        return 1 <= k <= self.num_frames and (k - 1) % self.cfg.stride == 0

    def _finalize(self, points: List[PredictionPoint]) -> None:
        for p in points:
            self.log.append(("finalize", p.frame, self.t))
            self.points.append(p)
            self.detections.extend(
                apply_indicators(p, self.video_id, self.task, self.t, self.min_score)
            )

    def step(self) -> None:
        """Advance the source cursor by one frame."""
        self.t += 1
        L, w = self.cfg.lookahead, self.cfg.wbs_window
        k = self.t - L
        if self._is_scheduled(k):
            self.log.append(("score", k, self.t))
            try:
                probs = self.scorer(Clip(self, k))
            except ValidationError:
                raise
            except Exception as exc:
                raise ScorerFailure(k, self.video_id, exc) from exc
            probs = check_prob_vector(probs)
            if self.window is None:
                C = self._num_classes if self._num_classes is not None else len(probs) - 1
                self.window = SuppressionWindow(w, C, kernels=self._kernels)
            self._finalize(self.window.push(PredictionPoint.new(k, probs)))
        if self.window is not None:
            self._finalize(self.window.expire(self.t - L - w))

    def run(self) -> Tuple[List[Detection], AuditReport]:
        end = self.num_frames + self.cfg.total_delay
        while self.t < end:
            self.step()
        if self.window is not None:
            self._finalize(self.window.flush())
        return self.detections, audit(self.log, self.cfg, self.video_id, self.detections)


def run_stream(
    stream,
    num_frames: int,
    scorer: Scorer,
    cfg: BufferConfig,
    task: str,
    video_id: Optional[str] = None,
    min_score: float = 0.0,
    kernels=None,
) -> Tuple[List[Detection], AuditReport]:
    return StreamEngine(
        stream, num_frames, scorer, cfg, task, video_id, min_score, kernels
    ).run()


def run_videos(
    aset: AnnotationSet,
    streams: Dict[str, object],
    scorer: Scorer,
    cfg: BufferConfig,
    task: str,
    min_score: float = 0.0,
    workers: int = 1,
) -> Tuple[List[Detection], List[AuditReport]]:
    """Run every annotated video; results are in annotation order regardless of ``workers``."""
    missing = [v.id for v in aset.videos if v.id not in streams]
    if missing:
        raise UnknownVideo(f"no payload stream for videos {missing}")

    def one(video):
        return run_stream(streams[video.id], video.num_frames, scorer, cfg, task, video.id, min_score)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, aset.videos))
    else:
        results = [one(v) for v in aset.videos]
    dets = [d for r in results for d in r[0]]
    return dets, [r[1] for r in results]


def detection_to_dict(det: Detection, aset: AnnotationSet) -> dict:
    return {
        "video": det.video_id,
        "task": det.task,
        "frame": det.frame,
        "class": aset.class_name(det.class_index),
        "score": det.score,
        "emitted_at": det.emitted_at,
    }


def write_detections(dets: Sequence[Detection], aset: AnnotationSet) -> str:
    return "".join(json.dumps(detection_to_dict(d, aset)) + "\n" for d in dets)


def read_detections(text: str, aset: AnnotationSet) -> List[Detection]:
    videos = {v.id for v in aset.videos}
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            vid, cname = raw["video"], raw["class"]
            task = check_task(raw["task"])
            frame, score, emitted = int(raw["frame"]), float(raw["score"]), int(raw["emitted_at"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"detections line {lineno}: {exc}") from exc
        if vid not in videos:
            raise UnknownVideo(f"detections line {lineno}: unknown video {vid!r}")
        try:
            c = aset.class_index(cname)
        except KeyError:
            raise UnknownClass(f"detections line {lineno}: unknown class {cname!r}") from None
        out.append(Detection(vid, task, frame, c, score, emitted))
    return out
