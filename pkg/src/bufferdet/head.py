"""Linear classification heads over clip features.

The *flattened* head pools each frame's feature map over space and
concatenates the per-frame vectors in temporal order, so the classifier sees
where in the clip a pattern occurs. The *pooled* head averages over time as
well and cannot. Both end in one affine layer and a softmax over C + 1
classes (index C + 1 is background) and are trained with cross-entropy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .errors import InsufficientExamples, SchemaViolation, ShapeMismatch

KINDS = ("flattened", "pooled")
LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class FeatureClip:
    """``frames`` is ``(T, H, W, D)`` or ``(T, D)``; the latter means H = W = 1."""

    frames: np.ndarray
    target_offset: int = 0

    def __post_init__(self):
        x = np.asarray(self.frames, dtype=np.float64)
        if x.ndim == 2:
            x = x[:, None, None, :]
        if x.ndim != 4 or x.shape[0] < 1:
            raise ShapeMismatch(f"clip must be (T, D) or (T, H, W, D), got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ShapeMismatch("clip contains non-finite values")
        object.__setattr__(self, "frames", x)

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def D(self) -> int:
        return self.frames.shape[-1]


@dataclass(frozen=True)
class TrainingExample:
    clip: FeatureClip
    label: int


@dataclass
class HeadWeights:
    kind: str
    W: np.ndarray
    b: np.ndarray
    T: int
    D: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaViolation(f"head kind must be one of {KINDS}, got {self.kind!r}")
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        width = self.T * self.D if self.kind == "flattened" else self.D
        if self.W.shape != (len(self.b), width):
            raise ShapeMismatch(
                f"{self.kind} head needs W of shape ({len(self.b)}, {width}), got {self.W.shape}"
            )

    @property
    def num_classes(self) -> int:
        return len(self.b) - 1

    def copy(self) -> "HeadWeights":
        return HeadWeights(self.kind, self.W.copy(), self.b.copy(), self.T, self.D)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "T": self.T,
                "D": self.D,
                "W_shape": list(self.W.shape),
                "W": self.W.ravel().tolist(),
                "b": self.b.tolist(),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "HeadWeights":
        raw = json.loads(text)
        try:
            W = np.array(raw["W"], dtype=np.float64).reshape(raw["W_shape"])
            return cls(raw["kind"], W, np.array(raw["b"], dtype=np.float64), raw["T"], raw["D"])
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaViolation(f"bad weights document: {exc}") from exc


def flatten_features(clip: FeatureClip) -> np.ndarray:
    return clip.frames.mean(axis=(1, 2)).reshape(-1)


def pool_features(clip: FeatureClip) -> np.ndarray:
    return clip.frames.mean(axis=(0, 1, 2))


def head_features(wts: HeadWeights, clip: FeatureClip) -> np.ndarray:
    if clip.D != wts.D or (wts.kind == "flattened" and clip.T != wts.T):
        raise ShapeMismatch(
            f"{wts.kind} head expects T={wts.T}, D={wts.D}; clip has T={clip.T}, D={clip.D}"
        )
    return flatten_features(clip) if wts.kind == "flattened" else pool_features(clip)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def head_forward(wts: HeadWeights, clip: FeatureClip) -> np.ndarray:
    return softmax(wts.W @ head_features(wts, clip) + wts.b)


def cross_entropy(p, label: int) -> float:
    """``-log p[label]`` with 1-indexed ``label``."""
    return float(-np.log(max(float(p[label - 1]), LOG_CLAMP)))


def head_gradient(wts: HeadWeights, example: TrainingExample) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of the cross-entropy loss with respect to ``(W, b)``."""
    phi = head_features(wts, example.clip)
    p = softmax(wts.W @ phi + wts.b)
    g = p.copy()
    g[example.label - 1] -= 1.0
    return np.outer(g, phi), g


def init_head(kind: str, num_classes: int, T: int, D: int, seed: int) -> HeadWeights:
    rng = np.random.default_rng(seed)
    width = T * D if kind == "flattened" else D
    W = rng.uniform(-0.01, 0.01, size=(num_classes + 1, width))
    b = rng.uniform(-0.01, 0.01, size=num_classes + 1)
    return HeadWeights(kind, W, b, T, D)


@dataclass
class TrainedHead:
    weights: HeadWeights
    losses: List[float] = field(default_factory=list)


def _design(kind: str, examples: Sequence[TrainingExample]) -> np.ndarray:
    fn = flatten_features if kind == "flattened" else pool_features
    return np.vstack([fn(ex.clip) for ex in examples])


def train_head(
    examples: Sequence[TrainingExample],
    kind: str,
    num_classes: int,
    epochs: int = 30,
    lr: float = 0.5,
    batch_size: int = 64,
    seed: int = 0,
) -> TrainedHead:
    """Mini-batch gradient descent with 1:1 positive/background batches.

    Each step draws ``batch_size // 2`` positives and the rest background
    examples, with replacement, from a generator seeded by ``seed``; an epoch
    is ``ceil(len(examples) / batch_size)`` steps. ``losses`` holds the mean
    batch loss before each update.
    """
    if kind not in KINDS:
        raise SchemaViolation(f"head kind must be one of {KINDS}, got {kind!r}")
    if batch_size < 2:
        raise SchemaViolation("batch_size must be >= 2")
    bg = num_classes + 1
    labels = np.array([ex.label for ex in examples], dtype=np.int64)
    if np.any((labels < 1) | (labels > bg)):
        raise SchemaViolation(f"labels must lie in 1..{bg}")
    pos_idx = np.flatnonzero(labels < bg)
    neg_idx = np.flatnonzero(labels == bg)
    if len(pos_idx) == 0 or len(neg_idx) == 0:
        raise InsufficientExamples(
            f"need >= 1 positive and >= 1 background example, got {len(pos_idx)} and {len(neg_idx)}"
        )
    T, D = examples[0].clip.T, examples[0].clip.D
    X = _design(kind, examples)
    Y = np.zeros((len(examples), bg))
    Y[np.arange(len(examples)), labels - 1] = 1.0

    wts = init_head(kind, num_classes, T, D, seed)
    # separate stream for batch sampling so init does not depend on epochs
    rng = np.random.default_rng([seed, 1])
    n_pos = batch_size // 2
    n_neg = batch_size - n_pos
    steps = epochs * -(-len(examples) // batch_size)
    losses = []
    for _ in range(steps):
        idx = np.concatenate(
            [
                pos_idx[rng.integers(0, len(pos_idx), n_pos)],
                neg_idx[rng.integers(0, len(neg_idx), n_neg)],
            ]
        )
        xb, yb = X[idx], Y[idx]
        P = softmax(xb @ wts.W.T + wts.b)
        picked = np.maximum((P * yb).sum(axis=1), LOG_CLAMP)
        losses.append(float(-np.log(picked).mean()))
        G = (P - yb) / len(idx)
        wts.W -= lr * (G.T @ xb)
        wts.b -= lr * G.sum(axis=0)
    return TrainedHead(wts, losses)


def predict_labels(wts: HeadWeights, examples: Sequence[TrainingExample]) -> np.ndarray:
    X = _design(wts.kind, examples)
    return np.argmax(X @ wts.W.T + wts.b, axis=1) + 1


def accuracy(wts: HeadWeights, examples: Sequence[TrainingExample]) -> float:
    if not examples:
        return float("nan")
    labels = np.array([ex.label for ex in examples])
    return float(np.mean(predict_labels(wts, examples) == labels))


def synth_boundary_task(
    T: int,
    D: int,
    n_examples: int,
    seed: int,
    num_classes: int = 2,
    noise_sigma: float = 0.1,
    target_offset: int | None = None,
) -> List[TrainingExample]:
    """Clips whose label depends only on *where* a class signature sits.

    Every clip carries the signature of one class (a one-hot channel pattern)
    on exactly one frame. Half the clips put it on the target frame and are
    labelled with that class; the rest put it on another frame, chosen
    uniformly, and are labelled background.
    """
    if T < 2:
        raise SchemaViolation("T must be >= 2")
    if D < num_classes:
        raise SchemaViolation("D must be >= num_classes for one-hot signatures")
    target = T // 2 if target_offset is None else int(target_offset)
    if not 0 <= target < T:
        raise SchemaViolation(f"target_offset must lie in 0..{T - 1}")
    rng = np.random.default_rng(seed)
    bg = num_classes + 1
    others = np.array([t for t in range(T) if t != target])
    out = []
    for _ in range(n_examples):
        c = int(rng.integers(1, num_classes + 1))
        positive = rng.random() < 0.5
        pos = target if positive else int(others[rng.integers(0, len(others))])
        x = rng.normal(0.0, noise_sigma, size=(T, D))
        x[pos, c - 1] += 1.0
        out.append(TrainingExample(FeatureClip(x, target), c if positive else bg))
    return out


def write_loss_trace(losses: Sequence[float]) -> str:
    return "step,loss\n" + "".join(f"{i},{v:.12g}\n" for i, v in enumerate(losses))
