"""Ground-truth action annotations and the boundary points derived from them.

Frames are 1-indexed. ``start_frame`` is the first frame of the action and
``end_frame`` its last; both are boundary points for the start and end tasks
respectively. Class indices run ``1..C``; the background class ``C + 1`` never
appears in an annotation file.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

from .errors import InvariantViolation, MalformedDocument, SchemaViolation

log = logging.getLogger(__name__)

TASKS = ("start", "end")

_TOP_FIELDS = {"version", "fps", "classes", "videos"}
_VIDEO_FIELDS = {"id", "num_frames", "instances"}
_INSTANCE_FIELDS = {"class", "start_frame", "end_frame"}


@dataclass(frozen=True)
class Instance:
    class_index: int
    start_frame: int
    end_frame: int


@dataclass(frozen=True)
class VideoAnnotation:
    id: str
    num_frames: int
    instances: Tuple[Instance, ...] = ()


@dataclass(frozen=True)
class AnnotationSet:
    version: str
    fps: float
    classes: Tuple[str, ...]
    videos: Tuple[VideoAnnotation, ...] = field(default=())

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def background_index(self) -> int:
        return len(self.classes) + 1

    def class_index(self, name: str) -> int:
        try:
            return self.classes.index(name) + 1
        except ValueError:
            raise KeyError(name) from None

    def class_name(self, index: int) -> str:
        return self.classes[index - 1]

    def video(self, video_id: str) -> VideoAnnotation:
        for v in self.videos:
            if v.id == video_id:
                return v
        raise KeyError(video_id)

    @property
    def num_instances(self) -> int:
        return sum(len(v.instances) for v in self.videos)


@dataclass(frozen=True, order=True)
class BoundaryEvent:
    video_id: str
    frame: int
    class_index: int
    task: str


def check_task(task: str) -> str:
    if task not in TASKS:
        raise SchemaViolation(f"task must be one of {TASKS}, got {task!r}")
    return task


def _require(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise SchemaViolation(f"{where}: missing field {key!r}")
    value = obj[key]
    # bool is an int subclass; reject it explicitly for numeric fields
    if isinstance(value, bool) or not isinstance(value, kind):
        raise SchemaViolation(f"{where}: field {key!r} has wrong type {type(value).__name__}")
    return value


def _warn_unknown(obj: dict, known: set, where: str) -> None:
    extra = sorted(set(obj) - known)
    if extra:
        log.warning("%s: ignoring unknown fields %s", where, extra)


def parse_annotations(document: str | bytes) -> AnnotationSet:
    """Parse and validate an annotation JSON document."""
    try:
        raw = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedDocument(f"annotation document is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaViolation("annotation document must be a JSON object")
    _warn_unknown(raw, _TOP_FIELDS, "document")

    version = _require(raw, "version", str, "document")
    fps = float(_require(raw, "fps", (int, float), "document"))
    if not fps > 0:
        raise InvariantViolation(f"fps must be positive, got {fps}")
    classes = _require(raw, "classes", list, "document")
    if not classes:
        raise InvariantViolation("at least one class is required")
    for i, name in enumerate(classes):
        if not isinstance(name, str):
            raise SchemaViolation(f"classes[{i}] must be a string")
        if not name:
            raise InvariantViolation(f"classes[{i}] is empty")
    if len(set(classes)) != len(classes):
        raise InvariantViolation("class names must be unique")
    lookup = {name: i + 1 for i, name in enumerate(classes)}

    videos = []
    seen_ids = set()
    for vi, rv in enumerate(_require(raw, "videos", list, "document")):
        where = f"videos[{vi}]"
        if not isinstance(rv, dict):
            raise SchemaViolation(f"{where} must be an object")
        _warn_unknown(rv, _VIDEO_FIELDS, where)
        vid = _require(rv, "id", str, where)
        where = f"video {vid!r}"
        if vid in seen_ids:
            raise InvariantViolation(f"{where}: duplicate video id")
        seen_ids.add(vid)
        n = _require(rv, "num_frames", int, where)
        if n < 1:
            raise InvariantViolation(f"{where}: num_frames must be positive, got {n}")
        instances = []
        for ii, ri in enumerate(_require(rv, "instances", list, where)):
            iwhere = f"{where} instance {ii}"
            if not isinstance(ri, dict):
                raise SchemaViolation(f"{iwhere} must be an object")
            _warn_unknown(ri, _INSTANCE_FIELDS, iwhere)
            cname = _require(ri, "class", str, iwhere)
            if cname not in lookup:
                raise InvariantViolation(f"{iwhere}: unknown class {cname!r}")
            s = _require(ri, "start_frame", int, iwhere)
            e = _require(ri, "end_frame", int, iwhere)
            if not 1 <= s < e <= n:
                raise InvariantViolation(
                    f"{iwhere}: need 1 <= start_frame < end_frame <= {n}, got ({s}, {e})"
                )
            instances.append(Instance(lookup[cname], s, e))
        videos.append(VideoAnnotation(vid, n, tuple(instances)))

    return AnnotationSet(version, fps, tuple(classes), tuple(videos))


def load_annotations(path) -> AnnotationSet:
    with open(path, "rb") as fh:
        return parse_annotations(fh.read())


def annotations_to_dict(aset: AnnotationSet) -> dict:
    return {
        "version": aset.version,
        "fps": aset.fps,
        "classes": list(aset.classes),
        "videos": [
            {
                "id": v.id,
                "num_frames": v.num_frames,
                "instances": [
                    {
                        "class": aset.class_name(inst.class_index),
                        "start_frame": inst.start_frame,
                        "end_frame": inst.end_frame,
                    }
                    for inst in v.instances
                ],
            }
            for v in aset.videos
        ],
    }


def serialize_annotations(aset: AnnotationSet) -> str:
    return json.dumps(annotations_to_dict(aset), indent=2) + "\n"


def boundary_events(aset: AnnotationSet, task: str) -> List[BoundaryEvent]:
    """One event per instance, sorted by ``(video_id, frame)``.

    Ties on ``(video_id, frame)`` fall back to class index so the order is total.
    """
    check_task(task)
    events = [
        BoundaryEvent(
            v.id,
            inst.start_frame if task == "start" else inst.end_frame,
            inst.class_index,
            task,
        )
        for v in aset.videos
        for inst in v.instances
    ]
    events.sort()
    return events

