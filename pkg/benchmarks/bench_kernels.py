"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--points 50000] [--dets 100000]

Runs the same workloads through both backends and checks that their outputs
agree. Wall time is printed per backend.
"""

import argparse
import time

import numpy as np

from bufferdet import kernels
from bufferdet.annotations import BoundaryEvent
from bufferdet.evaluate import match_detections
from bufferdet.wbs import Detection, PredictionPoint, SuppressionWindow


def wbs_workload(n_points, num_classes, w, stride, seed):
    rng = np.random.default_rng(seed)
    raw = rng.random((n_points, num_classes + 1))
    return np.arange(1, n_points * stride + 1, stride), raw / raw.sum(axis=1, keepdims=True), w


def run_wbs(backend, frames, probs, w):
    win = SuppressionWindow(w, probs.shape[1] - 1, kernels=backend)
    out = []
    for f, p in zip(frames, probs):
        out.extend(win.push(PredictionPoint.new(f, p)))
    out.extend(win.flush())
    return np.array([p.indicators for p in out])


def match_workload(n_dets, n_videos, num_classes, seed):
    rng = np.random.default_rng(seed)
    n_gt = n_dets // 10
    gts = [
        BoundaryEvent(f"v{rng.integers(n_videos)}", int(rng.integers(1, 100_000)), int(rng.integers(1, num_classes + 1)), "start")
        for _ in range(n_gt)
    ]
    dets = [
        Detection(f"v{rng.integers(n_videos)}", "start", int(rng.integers(1, 100_000)),
                  int(rng.integers(1, num_classes + 1)), float(rng.random()), 0)
        for _ in range(n_dets)
    ]
    return dets, gts


def raw_match_arrays(n_dets, n_groups, seed):
    rng = np.random.default_rng(seed)
    gt_per_group = max(1, n_dets // (10 * n_groups))
    gt_frame = np.sort(rng.integers(1, 100_000, size=(n_groups, gt_per_group)), axis=1).ravel()
    starts = np.arange(n_groups, dtype=np.int64) * gt_per_group
    stops = starts + gt_per_group
    det_group = rng.integers(0, n_groups, n_dets).astype(np.int64)
    det_frame = rng.integers(1, 100_000, n_dets).astype(np.int64)
    return det_group, det_frame, starts, stops, gt_frame.astype(np.int64)


def run_raw_match(backend, arrays, offset):
    det_group = arrays[0]
    tp = np.zeros(len(det_group), dtype=np.int8)
    matched = np.zeros(len(det_group), dtype=np.int64)
    backend.greedy_match(*arrays, offset, tp, matched)
    return tp


def timed(fn, *args, repeat=3):
    best, result = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=50_000)
    ap.add_argument("--dets", type=int, default=100_000)
    ap.add_argument("--classes", type=int, default=20)
    ap.add_argument("--window", type=int, default=30)
    ap.add_argument("--offset", type=int, default=300)
    args = ap.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only timing the Python fallback")

    frames, probs, w = wbs_workload(args.points, args.classes, args.window, 10, 0)
    dets, gts = match_workload(args.dets, 50, args.classes, 1)

    raw = raw_match_arrays(args.dets, 50 * args.classes, 2)

    results = {}
    print(f"{'kernel':<28}{'backend':<10}{'seconds':>10}")
    for name, mod in backends.items():
        t_wbs, ind = timed(run_wbs, mod, frames, probs, w)
        t_match, res = timed(match_detections, dets, gts, args.offset, mod)
        t_raw, raw_tp = timed(run_raw_match, mod, raw, args.offset)
        results[name] = (ind, res.tp, raw_tp)
        print(f"{'wbs stream (' + str(args.points) + ' pts)':<28}{name:<10}{t_wbs:>10.3f}")
        print(f"{'greedy match (' + str(args.dets) + ' dets)':<28}{name:<10}{t_match:>10.3f}")
        print(f"{'  kernel only':<28}{name:<10}{t_raw:>10.3f}")

    if len(results) == 2:
        a, b = results.values()
        same = all(np.array_equal(x, y) for x, y in zip(a, b))
        print("backends agree" if same else "BACKENDS DISAGREE")


if __name__ == "__main__":
    main()
