import os
import subprocess
import sys

import numpy as np
import pytest

from bufferdet import _kernels_py, kernels


def random_window(rng, n, C):
    scores = np.zeros((n + 4, C))
    scores[:n] = rng.integers(0, 4, size=(n, C)) / 4
    ind = np.zeros((n + 4, C), dtype=np.uint8)
    ind[:n] = rng.integers(0, 2, size=(n, C))
    new = rng.integers(0, 4, size=C) / 4
    return scores, ind, new


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
def test_wbs_update_parity():
    cy = kernels.available_backends()["cython"]
    rng = np.random.default_rng(3)
    for _ in range(2000):
        n, C = int(rng.integers(0, 7)), int(rng.integers(1, 4))
        scores, ind, new = random_window(rng, n, C)
        outs = []
        for mod in (_kernels_py, cy):
            i, flags = ind.copy(), np.zeros(C, dtype=np.uint8)
            mod.wbs_update(scores.copy(), i, n, new.copy(), flags)
            outs.append((i, flags))
        assert np.array_equal(outs[0][0], outs[1][0])
        assert np.array_equal(outs[0][1], outs[1][1])


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
def test_greedy_match_parity():
    cy = kernels.available_backends()["cython"]
    rng = np.random.default_rng(4)
    for _ in range(2000):
        groups = int(rng.integers(1, 4))
        sizes = rng.integers(0, 4, size=groups)
        stops = np.cumsum(sizes).astype(np.int64)
        starts = (stops - sizes).astype(np.int64)
        gt_frame = np.concatenate([np.sort(rng.integers(1, 50, size=s)) for s in sizes]).astype(np.int64)
        nd = int(rng.integers(0, 8))
        det_group = rng.integers(-1, groups, size=nd).astype(np.int64)
        det_frame = rng.integers(1, 50, size=nd).astype(np.int64)
        offset = int(rng.choice([1, 5, 30]))
        outs = []
        for mod in (_kernels_py, cy):
            tp, m = np.zeros(nd, dtype=np.int8), np.zeros(nd, dtype=np.int64)
            mod.greedy_match(det_group, det_frame, starts, stops, gt_frame, offset, tp, m)
            outs.append((tp, m))
        assert np.array_equal(outs[0][0], outs[1][0])
        assert np.array_equal(outs[0][1], outs[1][1])


def test_env_var_forces_python_backend():
    env = dict(os.environ, BUFFERDET_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from bufferdet import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_available_backends_always_has_python():
    backends = kernels.available_backends()
    assert backends["python"] is _kernels_py
    assert kernels.BACKEND in backends
