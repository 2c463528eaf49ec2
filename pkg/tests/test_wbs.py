import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bufferdet.errors import NonMonotonePush
from bufferdet.wbs import (
    PredictionPoint,
    SuppressionWindow,
    apply_indicators,
    wbs_flush,
    wbs_offline_oracle,
    wbs_push,
)

from oracles import local_max_flags


def with_background(scores):
    scores = np.asarray(scores, dtype=float)
    return np.hstack([scores, np.zeros((len(scores), 1))])


def run_online(frames, scores, w, backend=None):
    """Push every point then flush; flags come back as (n, C) in frame order."""
    probs = with_background(scores)
    win = SuppressionWindow(w, probs.shape[1] - 1, kernels=backend)
    done = []
    for f, p in zip(frames, probs):
        done.extend(wbs_push(win, PredictionPoint.new(f, p)))
    done.extend(wbs_flush(win))
    assert [p.frame for p in done] == list(frames)
    assert all(p.finalized for p in done)
    return np.array([p.indicators[:-1] for p in done], dtype=np.uint8).reshape(len(frames), -1)


def test_singleton_then_flush(backend):
    flags = run_online([5], [[0.3, 0.1]], 30, backend)
    assert flags.tolist() == [[1, 1]]


def test_unique_max_dominates(backend):
    flags = run_online([10, 20, 30], [[0.2], [0.9], [0.5]], 20, backend)
    assert flags[:, 0].tolist() == [0, 1, 0]


def test_flush_empty_window():
    assert wbs_flush(SuppressionWindow(10, 2)) == []


def test_flush_single_point_keeps_current_flags():
    win = SuppressionWindow(10, 2)
    win.push(PredictionPoint.new(3, [0.2, 0.3, 0.5]))
    assert win.pending_indicators().tolist() == [[1, 1]]
    (p,) = win.flush()
    assert p.indicators.tolist() == [1, 1, 0]
    assert len(win) == 0


def test_background_never_flagged():
    flags = run_online([1, 2], [[0.1], [0.2]], 0)
    assert flags.tolist() == [[1], [1]]


def test_finalization_on_window_exit():
    win = SuppressionWindow(20, 1)
    assert win.push(PredictionPoint.new(10, [0.2, 0.8])) == []
    assert win.push(PredictionPoint.new(30, [0.9, 0.1])) == []
    out = win.push(PredictionPoint.new(31, [0.1, 0.9]))
    assert [p.frame for p in out] == [10]
    assert out[0].indicators.tolist() == [0, 0]
    with pytest.raises(ValueError):
        out[0].indicators[0] = 1


def test_non_monotone_push():
    win = SuppressionWindow(5, 1)
    win.push(PredictionPoint.new(10, [0.5, 0.5]))
    with pytest.raises(NonMonotonePush):
        win.push(PredictionPoint.new(10, [0.5, 0.5]))


def test_oracle_small_cases():
    assert wbs_offline_oracle([7], [[0.4]], 10).tolist() == [[1]]
    inc = wbs_offline_oracle([1, 11, 21, 31], [[0.1], [0.2], [0.3], [0.4]], 100)
    assert inc[:, 0].tolist() == [0, 0, 0, 1]
    tie = wbs_offline_oracle([1, 11], [[0.5], [0.5]], 10)
    assert tie[:, 0].tolist() == [1, 0]
    far = wbs_offline_oracle([1, 12], [[0.5], [0.5]], 10)
    assert far[:, 0].tolist() == [1, 1]


def test_oracle_last_window_mode_differs():
    # sticky: frame 11 was beaten by frame 1 and stays off.
    # last-window: its final window [11, 31] no longer holds frame 1.
    frames, scores = [1, 11, 21, 31], [[0.9], [0.5], [0.2], [0.1]]
    sticky = wbs_offline_oracle(frames, scores, 20)[:, 0].tolist()
    last = wbs_offline_oracle(frames, scores, 20, mode="last_window")[:, 0].tolist()
    assert sticky == [1, 0, 0, 0]
    assert last == [1, 1, 0, 0]


def test_oracle_matches_independent_flags():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 12))
        frames = np.cumsum(rng.integers(1, 15, n)).tolist()
        scores = np.round(rng.random((n, 2)), 1)
        w = int(rng.integers(0, 40))
        assert wbs_offline_oracle(frames, scores, w).tolist() == local_max_flags(frames, scores.tolist(), w)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_exhaustive_orderings(n, backend):
    stride = 10
    frames = [1 + stride * i for i in range(n)]
    for w in (0, stride, 2 * stride, 3 * stride):
        for ranks in itertools.product(range(n), repeat=n):
            scores = [[r / n] for r in ranks]
            online = run_online(frames, scores, w, backend)
            assert online.tolist() == wbs_offline_oracle(frames, scores, w).tolist(), (ranks, w)


def random_stream(rng):
    n = int(rng.integers(1, 40))
    frames = np.cumsum(rng.integers(1, 16, n)).tolist()
    # coarse scores force ties
    scores = np.round(rng.random((n, 3)) * 5) / 5
    return frames, scores


def test_random_streams_match_oracle(backend):
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        frames, scores = random_stream(rng)
        w = int(rng.choice([0, 10, 30, 50]))
        assert run_online(frames, scores, w, backend).tolist() == wbs_offline_oracle(frames, scores, w).tolist()


streams = st.integers(1, 25).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(1, 12), min_size=n, max_size=n),
        st.lists(st.lists(st.sampled_from([0.0, 0.125, 0.25, 0.5, 0.75, 1.0]), min_size=2, max_size=2), min_size=n, max_size=n),
        st.integers(0, 60),
    )
)


@settings(max_examples=200, deadline=None)
@given(streams)
def test_no_two_survivors_within_window(data):
    gaps, scores, w = data
    frames = np.cumsum(gaps).tolist()
    flags = run_online(frames, scores, w)
    for c in range(2):
        kept = [f for f, fl in zip(frames, flags[:, c]) if fl]
        assert all(b - a > w for a, b in zip(kept, kept[1:]))


@settings(max_examples=100, deadline=None)
@given(streams)
def test_zero_window_keeps_everything(data):
    gaps, scores, _ = data
    frames = np.cumsum(gaps).tolist()
    assert run_online(frames, scores, 0).all()


@settings(max_examples=100, deadline=None)
@given(streams, st.sampled_from([0.25, 0.5, 2.0, 4.0]))
def test_positive_scaling_invariance(data, factor):
    gaps, scores, w = data
    frames = np.cumsum(gaps).tolist()
    scaled = np.array(scores)
    scaled[:, 0] *= factor
    base = run_online(frames, np.array(scores), w)
    # scaling may push a channel above 1; the window does not care
    assert np.array_equal(base[:, 0], run_online(frames, scaled, w)[:, 0])


def test_apply_indicators():
    p = PredictionPoint.new(40, [0.7, 0.2, 0.1])
    p.indicators[:] = [1, 0, 0]
    p.finalize()
    (d,) = apply_indicators(p, "v", "start", 118)
    assert (d.frame, d.class_index, d.score, d.emitted_at) == (40, 1, 0.7, 118)
    assert apply_indicators(p, "v", "start", 118, min_score=0.8) == []

    q = PredictionPoint.new(40, [0.7, 0.2, 0.1])
    q.finalize()
    assert apply_indicators(q, "v", "start", 40) == []
    with pytest.raises(ValueError):
        apply_indicators(PredictionPoint.new(1, [0.5, 0.5]), "v", "start", 1)


def test_apply_indicators_enumeration():
    # every flag pattern over C=3 against a hand-enumerated product
    probs = [0.4, 0.3, 0.2, 0.1]
    for pattern in itertools.product([0, 1], repeat=4):
        p = PredictionPoint.new(9, probs)
        p.indicators[:] = pattern
        p.finalize()
        got = [(d.class_index, d.score) for d in apply_indicators(p, "v", "end", 9)]
        want = [(c + 1, probs[c] * pattern[c]) for c in range(3) if pattern[c]]
        assert got == want
