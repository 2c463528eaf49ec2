"""Buffered online action start/end detection.

Simulates a live stream whose audience lags the source by a fixed buffer
and suppresses duplicate boundary predictions inside that buffer. Emitted
detections are scored with point-level mAP at temporal offsets.
"""

from .annotations import (
    AnnotationSet,
    BoundaryEvent,
    VideoAnnotation,
    boundary_events,
    load_annotations,
    parse_annotations,
    serialize_annotations,
)
from .engine import BufferConfig, HeadScorer, buffer_budget, clip_window, passthrough_scorer, run_stream
from .evaluate import EvalConfig, average_precision, match_detections, offset_sweep, p_map
from .kernels import BACKEND as KERNEL_BACKEND
from .streams import ScoreStream, FeatureStream, SynthConfig, synth_scores
from .wbs import Detection, PredictionPoint, SuppressionWindow, apply_indicators, wbs_offline_oracle

__version__ = "0.1.0"
