"""Point-level average precision within temporal offsets.

Detections are ranked by score (descending), then frame (ascending), video id
and class index, which is a total order. Walking that ranking, each detection
claims the nearest still-unclaimed ground-truth point of the same video and
class whose frame is within ``offset``; ties in distance go to the earlier
point. Claimed detections are true positives, the rest false positives.

AP is the un-interpolated area under the precision/recall staircase:
``sum(precision@k for TP ranks k) / num_gt``. mAP averages AP over classes
that have at least one ground-truth point; with no such class it is ``None``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels as _default_kernels
from .annotations import AnnotationSet, BoundaryEvent, boundary_events, check_task
from .errors import SchemaViolation, TaskMismatch, UnknownClass, UnknownVideo
from .wbs import Detection

DEFAULT_OFFSETS = tuple(range(30, 301, 30))


@dataclass(frozen=True)
class EvalConfig:
    offsets: Tuple[int, ...] = DEFAULT_OFFSETS
    task: str = "start"

    def __post_init__(self):
        check_task(self.task)
        offsets = tuple(int(o) for o in self.offsets)
        if not offsets:
            raise SchemaViolation("at least one offset is required")
        if any(o < 1 for o in offsets):
            raise SchemaViolation(f"offsets must be positive: {offsets}")
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise SchemaViolation(f"offsets must be strictly increasing: {offsets}")
        object.__setattr__(self, "offsets", offsets)


@dataclass
class MatchResult:
    order: np.ndarray          # detection indices in processing order
    tp: np.ndarray             # per detection (input order)
    matched: np.ndarray        # index into the ground-truth list, -1 if FP
    num_gt: Dict[int, int]     # per class index


def rank_order(dets: Sequence[Detection]) -> List[int]:
    return sorted(
        range(len(dets)),
        key=lambda i: (-dets[i].score, dets[i].frame, dets[i].video_id, dets[i].class_index),
    )


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[BoundaryEvent],
    offset: int,
    kernels=None,
) -> MatchResult:
    if offset < 1:
        raise SchemaViolation("offset must be >= 1")
    tasks = {d.task for d in dets} | {g.task for g in gts}
    if len(tasks) > 1:
        raise TaskMismatch(f"detections and ground truth mix tasks {sorted(tasks)}")
    k = kernels or _default_kernels

    gt_order = sorted(range(len(gts)), key=lambda i: (gts[i].video_id, gts[i].class_index, gts[i].frame, i))
    groups: Dict[Tuple[str, int], int] = {}
    starts: List[int] = []
    stops: List[int] = []
    for pos, i in enumerate(gt_order):
        key = (gts[i].video_id, gts[i].class_index)
        if key not in groups:
            groups[key] = len(starts)
            starts.append(pos)
            stops.append(pos)
        stops[groups[key]] = pos + 1
    gt_frame = np.array([gts[i].frame for i in gt_order], dtype=np.int64)

    order = rank_order(dets)
    det_group = np.array(
        [groups.get((dets[i].video_id, dets[i].class_index), -1) for i in order], dtype=np.int64
    )
    det_frame = np.array([dets[i].frame for i in order], dtype=np.int64)
    tp_sorted = np.zeros(len(order), dtype=np.int8)
    match_sorted = np.zeros(len(order), dtype=np.int64)
    k.greedy_match(
        det_group,
        det_frame,
        np.array(starts, dtype=np.int64),
        np.array(stops, dtype=np.int64),
        gt_frame,
        int(offset),
        tp_sorted,
        match_sorted,
    )

    order_arr = np.array(order, dtype=np.int64)
    tp = np.zeros(len(dets), dtype=bool)
    matched = np.full(len(dets), -1, dtype=np.int64)
    tp[order_arr] = tp_sorted.astype(bool)
    hit = match_sorted >= 0
    gt_order_arr = np.array(gt_order, dtype=np.int64)
    matched[order_arr[hit]] = gt_order_arr[match_sorted[hit]]

    num_gt: Dict[int, int] = {}
    for g in gts:
        num_gt[g.class_index] = num_gt.get(g.class_index, 0) + 1
    return MatchResult(order_arr, tp, matched, num_gt)


def average_precision(labels, num_gt: int) -> float:
    """AP of a ranked TP/FP list; 0 when there is no ground truth."""
    tp = np.asarray(labels, dtype=bool)
    if num_gt <= 0 or tp.size == 0:
        return 0.0
    hits = np.cumsum(tp)
    ranks = np.arange(1, tp.size + 1)
    return float(np.sum(hits[tp] / ranks[tp]) / num_gt)


@dataclass
class EvalReport:
    task: str
    offsets: Tuple[int, ...]
    classes: Tuple[str, ...]
    per_class: Dict[int, Dict[int, float]]
    num_gt: Dict[int, int]
    map: Dict[int, Optional[float]]
    num_detections: int = 0
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "offsets": list(self.offsets),
            "per_class": {
                self.classes[c - 1]: {str(o): ap for o, ap in by_off.items()}
                for c, by_off in self.per_class.items()
            },
            "num_gt": {self.classes[c - 1]: n for c, n in self.num_gt.items()},
            "map": {str(o): m for o, m in self.map.items()},
            "num_detections": self.num_detections,
            **({"meta": self.meta} if self.meta else {}),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _check_known(dets: Sequence[Detection], aset: AnnotationSet, task: str) -> None:
    videos = {v.id for v in aset.videos}
    for d in dets:
        if d.video_id not in videos:
            raise UnknownVideo(f"detection refers to unknown video {d.video_id!r}")
        if not 1 <= d.class_index <= aset.num_classes:
            raise UnknownClass(f"detection refers to unknown class index {d.class_index}")
        if d.task != task:
            raise TaskMismatch(f"detection for task {d.task!r} in a {task!r} evaluation")


def p_map(dets: Sequence[Detection], aset: AnnotationSet, cfg: EvalConfig, kernels=None) -> EvalReport:
    _check_known(dets, aset, cfg.task)
    gts = boundary_events(aset, cfg.task)
    C = aset.num_classes
    num_gt = {c: 0 for c in range(1, C + 1)}
    for g in gts:
        num_gt[g.class_index] += 1
    eligible = [c for c in range(1, C + 1) if num_gt[c] > 0]
    det_class = np.array([d.class_index for d in dets], dtype=np.int64)

    per_class: Dict[int, Dict[int, float]] = {c: {} for c in range(1, C + 1)}
    maps: Dict[int, Optional[float]] = {}
    for off in cfg.offsets:
        res = match_detections(dets, gts, off, kernels)
        ranked_tp = res.tp[res.order]
        ranked_cls = det_class[res.order] if len(dets) else det_class
        for c in range(1, C + 1):
            per_class[c][off] = average_precision(ranked_tp[ranked_cls == c], num_gt[c])
        maps[off] = float(np.mean([per_class[c][off] for c in eligible])) if eligible else None
    return EvalReport(cfg.task, cfg.offsets, aset.classes, per_class, num_gt, maps, len(dets))


def offset_sweep(
    dets: Sequence[Detection], aset: AnnotationSet, offsets: Sequence[int], task: str = "start"
) -> List[Tuple[int, Optional[float]]]:
    report = p_map(dets, aset, EvalConfig(tuple(offsets), task))
    return [(o, report.map[o]) for o in report.offsets]


def sweep_csv(rows: Sequence[Tuple[int, Optional[float]]]) -> str:
    return "offset,map\n" + "".join(
        f"{o},{'' if m is None else format(m, '.12g')}\n" for o, m in rows
    )
