"""Per-frame payload streams with their CSV formats, plus synthetic score generation."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .annotations import AnnotationSet, VideoAnnotation, boundary_events, check_task
from .errors import (
    FrameOutOfRange,
    MalformedRow,
    NonMonotoneFrames,
    NonNormalizedRow,
    SchemaViolation,
)

NORM_TOL = 1e-6
# Rows already this close to 1 are kept verbatim so canonical files round-trip.
_RENORM_SKIP = 1e-9
_FLOAT_FMT = ".12g"


def check_prob_vector(values, tol: float = NORM_TOL) -> np.ndarray:
    p = np.asarray(values, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise SchemaViolation(f"probability vector must be 1-D with >= 2 entries, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise NonNormalizedRow(f"probability entries must lie in [0, 1]: {p}")
    if abs(p.sum() - 1.0) > tol:
        raise NonNormalizedRow(f"probabilities sum to {p.sum():.9f}, not 1")
    return p


def _check_frames(frames: np.ndarray) -> None:
    if frames.size and (frames[0] < 1 or np.any(np.diff(frames) <= 0)):
        raise NonMonotoneFrames("frames must be >= 1 and strictly increasing")


@dataclass(frozen=True)
class ScoreStream:
    """Probability vectors for the scored frames of one (video, task)."""

    video_id: str
    task: str
    frames: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] != frames.shape[0]:
            raise SchemaViolation(
                f"video {self.video_id!r}: {frames.shape[0]} frames but probs shape {probs.shape}"
            )
        _check_frames(frames)
        frames.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "probs", probs)

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1] - 1

    @property
    def values(self) -> np.ndarray:
        return self.probs

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class FeatureStream:
    """Real-valued feature tensors of shape ``shape`` for each listed frame."""

    video_id: str
    shape: Tuple[int, ...]
    frames: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(int(d) for d in self.shape)
        if len(shape) not in (1, 3) or any(d < 1 for d in shape):
            raise SchemaViolation(f"feature shape must be (D,) or (H, W, D), got {shape}")
        frames = np.asarray(self.frames, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64).reshape((len(frames),) + shape)
        if not np.all(np.isfinite(values)):
            raise SchemaViolation(f"video {self.video_id!r}: non-finite feature values")
        _check_frames(frames)
        frames.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.frames)


def _fmt(x: float) -> str:
    return format(float(x), _FLOAT_FMT)


def parse_score_stream(document: str, video_id: str, task: str) -> ScoreStream:
    check_task(task)
    lines = document.splitlines()
    if not lines:
        raise MalformedRow(f"video {video_id!r}: empty score document")
    header = lines[0].strip().split(",")
    if len(header) < 3 or header[0] != "frame":
        raise MalformedRow(f"video {video_id!r}: bad header {lines[0]!r}")
    ncol = len(header) - 1
    if header[1:] != [f"p_{i}" for i in range(1, ncol + 1)]:
        raise MalformedRow(f"video {video_id!r}: header columns must be p_1..p_{ncol}")

    frames: List[int] = []
    rows: List[np.ndarray] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != ncol + 1:
            raise MalformedRow(f"video {video_id!r} line {lineno}: expected {ncol + 1} cells")
        try:
            frame = int(cells[0])
            p = np.array([float(c) for c in cells[1:]])
        except ValueError as exc:
            raise MalformedRow(f"video {video_id!r} line {lineno}: {exc}") from exc
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise MalformedRow(f"video {video_id!r} line {lineno}: negative or non-finite value")
        s = p.sum()
        if abs(s - 1.0) > NORM_TOL:
            raise NonNormalizedRow(f"video {video_id!r} line {lineno}: row sums to {s:.9f}")
        if abs(s - 1.0) > _RENORM_SKIP:
            p = p / s
        if frames and frame <= frames[-1]:
            raise NonMonotoneFrames(f"video {video_id!r} line {lineno}: frame {frame} not increasing")
        frames.append(frame)
        rows.append(p)

    probs = np.vstack(rows) if rows else np.zeros((0, ncol))
    return ScoreStream(video_id, task, np.array(frames, dtype=np.int64), probs)


def write_score_stream(stream: ScoreStream) -> str:
    buf = io.StringIO()
    ncol = stream.probs.shape[1]
    buf.write("frame," + ",".join(f"p_{i}" for i in range(1, ncol + 1)) + "\n")
    for frame, p in zip(stream.frames, stream.probs):
        buf.write(f"{int(frame)}," + ",".join(_fmt(x) for x in p) + "\n")
    return buf.getvalue()


def parse_feature_stream(document: str, video_id: str) -> FeatureStream:
    lines = document.splitlines()
    if not lines or not lines[0].startswith("frame,shape="):
        raise MalformedRow(f"video {video_id!r}: feature header must start with 'frame,shape='")
    try:
        shape = tuple(int(d) for d in lines[0][len("frame,shape="):].split(","))
    except ValueError as exc:
        raise MalformedRow(f"video {video_id!r}: bad shape in header: {exc}") from exc
    size = int(np.prod(shape))
    frames, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != size + 1:
            raise MalformedRow(f"video {video_id!r} line {lineno}: expected {size + 1} cells")
        try:
            frames.append(int(cells[0]))
            rows.append([float(c) for c in cells[1:]])
        except ValueError as exc:
            raise MalformedRow(f"video {video_id!r} line {lineno}: {exc}") from exc
    values = np.array(rows, dtype=np.float64).reshape((len(frames),) + shape)
    return FeatureStream(video_id, shape, np.array(frames, dtype=np.int64), values)


def write_feature_stream(stream: FeatureStream) -> str:
    buf = io.StringIO()
    buf.write("frame,shape=" + ",".join(str(d) for d in stream.shape) + "\n")
    for frame, x in zip(stream.frames, stream.values):
        buf.write(f"{int(frame)}," + ",".join(_fmt(v) for v in x.ravel()) + "\n")
    return buf.getvalue()


def validate_stream_against_video(stream, video: VideoAnnotation) -> None:
    """Raise ``FrameOutOfRange`` if any listed frame lies outside the video."""
    if len(stream.frames) and (stream.frames[0] < 1 or stream.frames[-1] > video.num_frames):
        bad = [int(f) for f in stream.frames if f < 1 or f > video.num_frames]
        raise FrameOutOfRange(
            f"video {video.id!r}: frames {bad[:5]} outside 1..{video.num_frames}"
        )


@dataclass(frozen=True)
class SynthConfig:
    kernel: str = "triangular"
    kernel_width: int = 8
    plateau_halfwidth: int = 15
    peak_amplitude: float = 0.8
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kernel not in ("triangular", "plateau"):
            raise SchemaViolation(f"kernel must be 'triangular' or 'plateau', got {self.kernel!r}")
        if self.kernel_width < 1:
            raise SchemaViolation("kernel_width must be >= 1")
        if self.plateau_halfwidth < 0:
            raise SchemaViolation("plateau_halfwidth must be >= 0")
        if not 0 < self.peak_amplitude <= 1:
            raise SchemaViolation("peak_amplitude must lie in (0, 1]")
        if self.noise_sigma < 0:
            raise SchemaViolation("noise_sigma must be >= 0")


def kernel_response(cfg: SynthConfig, frames: np.ndarray, boundary: int) -> np.ndarray:
    dist = np.abs(frames - boundary).astype(np.float64)
    if cfg.kernel == "triangular":
        return cfg.peak_amplitude * np.maximum(0.0, 1.0 - dist / cfg.kernel_width)
    return np.where(dist <= cfg.plateau_halfwidth, cfg.peak_amplitude, 0.0)


def scored_frames(num_frames: int, stride: int) -> np.ndarray:
    return np.arange(1, num_frames + 1, stride, dtype=np.int64)


def synth_scores(
    aset: AnnotationSet, task: str, cfg: SynthConfig, stride: int = 10
) -> List[ScoreStream]:
    """Deterministic synthetic score streams peaking at each boundary point.

    Kernel responses of all boundaries of a class are summed into that class's
    channel before Gaussian noise is added and clamped at 0. The action mass
    is then scaled down to at most 1 and the background takes the remainder.
    """
    check_task(task)
    if stride < 1:
        raise SchemaViolation("stride must be >= 1")
    C = aset.num_classes
    events = boundary_events(aset, task)
    task_code = 0 if task == "start" else 1
    out = []
    for vi, video in enumerate(aset.videos):
        frames = scored_frames(video.num_frames, stride)
        act = np.zeros((len(frames), C))
        for ev in events:
            if ev.video_id == video.id:
                act[:, ev.class_index - 1] += kernel_response(cfg, frames, ev.frame)
        if cfg.noise_sigma > 0:
            rng = np.random.default_rng([cfg.seed & 0xFFFFFFFFFFFFFFFF, vi, task_code, stride])
            act += rng.normal(0.0, cfg.noise_sigma, size=act.shape)
        np.clip(act, 0.0, 1.0, out=act)
        total = act.sum(axis=1, keepdims=True)
        over = total[:, 0] > 1.0
        act[over] /= total[over]
        bg = np.clip(1.0 - act.sum(axis=1, keepdims=True), 0.0, 1.0)
        out.append(ScoreStream(video.id, task, frames, np.hstack([act, bg])))
    return out


def stream_filename(video_id: str, task: str) -> str:
    return f"{video_id}.{task}.csv"


def feature_filename(video_id: str) -> str:
    return f"{video_id}.features.csv"
