import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bufferdet.annotations import (
    boundary_events,
    parse_annotations,
    serialize_annotations,
)
from bufferdet.errors import InvariantViolation, MalformedDocument, SchemaViolation


def doc(instances, num_frames=3000, classes=("jump_ball", "dunk"), **extra):
    body = {
        "version": "1",
        "fps": 30.0,
        "classes": list(classes),
        "videos": [{"id": "v1", "num_frames": num_frames, "instances": instances}],
    }
    body.update(extra)
    return json.dumps(body)


def test_minimal_document():
    aset = parse_annotations(doc([{"class": "jump_ball", "start_frame": 120, "end_frame": 450}]))
    assert aset.num_classes == 2
    assert aset.background_index == 3
    assert len(boundary_events(aset, "start")) == 1
    assert len(boundary_events(aset, "end")) == 1


def test_degenerate_interval_rejected():
    with pytest.raises(InvariantViolation, match="instance 0"):
        parse_annotations(doc([{"class": "dunk", "start_frame": 200, "end_frame": 200}]))


@pytest.mark.parametrize(
    "instance",
    [
        {"class": "dunk", "start_frame": 0, "end_frame": 10},
        {"class": "dunk", "start_frame": 10, "end_frame": 3001},
        {"class": "dunk", "start_frame": 50, "end_frame": 10},
        {"class": "nope", "start_frame": 1, "end_frame": 10},
    ],
)
def test_instance_invariants(instance):
    with pytest.raises(InvariantViolation, match="'v1'"):
        parse_annotations(doc([instance]))


def test_malformed_json():
    with pytest.raises(MalformedDocument):
        parse_annotations("{not json")


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("fps"),
        lambda d: d.update(fps="fast"),
        lambda d: d["videos"][0].pop("num_frames"),
        lambda d: d["videos"][0]["instances"][0].update(start_frame=1.5),
        lambda d: d["videos"][0].update(num_frames=True),
    ],
)
def test_schema_violations(mutate):
    d = json.loads(doc([{"class": "dunk", "start_frame": 1, "end_frame": 10}]))
    mutate(d)
    with pytest.raises(SchemaViolation):
        parse_annotations(json.dumps(d))


@pytest.mark.parametrize(
    "classes, fps",
    [([], 30.0), (["a", "a"], 30.0), (["a", ""], 30.0), (["a"], 0.0), (["a"], -1.0)],
)
def test_set_invariants(classes, fps):
    with pytest.raises(InvariantViolation):
        parse_annotations(json.dumps({"version": "1", "fps": fps, "classes": classes, "videos": []}))


def test_unknown_fields_ignored_with_warning(caplog):
    aset = parse_annotations(doc([], comment="hi"))
    assert aset.videos[0].instances == ()
    assert "comment" in caplog.text


def test_overlapping_instances_allowed():
    aset = parse_annotations(
        doc(
            [
                {"class": "dunk", "start_frame": 10, "end_frame": 100},
                {"class": "dunk", "start_frame": 50, "end_frame": 150},
            ]
        )
    )
    assert aset.num_instances == 2


def test_empty_instances_give_no_events():
    aset = parse_annotations(doc([]))
    assert boundary_events(aset, "start") == []


def test_end_event_projection():
    aset = parse_annotations(doc([{"class": "dunk", "start_frame": 120, "end_frame": 450}]))
    (ev,) = boundary_events(aset, "end")
    assert (ev.frame, ev.class_index, ev.task) == (450, 2, "end")


def test_fixture_counts_match_raw_text_audit(fixtures_dir, small_set):
    # independent audit: count instance records in the raw text
    text = (fixtures_dir / "annotations.json").read_text()
    n_instances = len(re.findall(r'"start_frame"\s*:', text))
    n_videos = len(re.findall(r'"num_frames"\s*:', text))
    assert n_instances == 7
    assert small_set.num_instances == n_instances
    assert len(small_set.videos) == n_videos == 3
    assert len(small_set.classes) == 2


def test_fixture_start_events_sorted(small_set):
    events = boundary_events(small_set, "start")
    assert len(events) == 7
    # brute-force oracle: collect raw (video, frame) pairs and sort them
    raw = [(v.id, inst.start_frame) for v in small_set.videos for inst in v.instances]
    assert [(e.video_id, e.frame) for e in events] == sorted(raw)


@pytest.mark.parametrize("name", ["annotations.json", "plateau_annotations.json"])
def test_fixture_events_in_range(fixtures_dir, name):
    from bufferdet.annotations import load_annotations

    aset = load_annotations(fixtures_dir / name)
    for task in ("start", "end"):
        events = boundary_events(aset, task)
        assert len(events) == aset.num_instances
        for ev in events:
            assert 1 <= ev.frame <= aset.video(ev.video_id).num_frames


@st.composite
def annotation_docs(draw):
    classes = draw(st.lists(st.text("abcxyz_", min_size=1, max_size=6), min_size=1, max_size=4, unique=True))
    videos = []
    for vi in range(draw(st.integers(0, 3))):
        n = draw(st.integers(2, 500))
        instances = []
        for _ in range(draw(st.integers(0, 4))):
            s = draw(st.integers(1, n - 1))
            e = draw(st.integers(s + 1, n))
            instances.append({"class": draw(st.sampled_from(classes)), "start_frame": s, "end_frame": e})
        videos.append({"id": f"vid{vi}", "num_frames": n, "instances": instances})
    fps = draw(st.floats(1.0, 120.0))
    return json.dumps({"version": "1", "fps": fps, "classes": classes, "videos": videos})


@settings(max_examples=100, deadline=None)
@given(annotation_docs())
def test_round_trip_and_counts(document):
    aset = parse_annotations(document)
    again = parse_annotations(serialize_annotations(aset))
    assert again == aset
    n = sum(len(v.instances) for v in aset.videos)
    assert len(boundary_events(aset, "start")) == len(boundary_events(aset, "end")) == n
