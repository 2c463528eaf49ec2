"""Pure-Python implementations of the hot kernels.

Signatures and semantics mirror ``_kernels.pyx`` exactly; ``kernels`` picks
one of the two at import time.
"""

import numpy as np

BACKEND = "python"


def wbs_update(buf_scores, buf_ind, n, new_scores, new_ind):
    """Fold one new prediction into a suppression buffer, in place.

    ``buf_scores[:n]`` / ``buf_ind[:n]`` hold the points still inside the
    window. The new point's flag for a class is cleared when any buffered
    point scores at least as high (earlier wins ties); buffered flags are
    cleared when the new point scores strictly higher. Cleared flags stay
    cleared.
    """
    if n == 0:
        new_ind[:] = 1
        return
    scores = buf_scores[:n]
    new_ind[:] = ~(scores >= new_scores).any(axis=0)
    buf_ind[:n] &= ~(scores < new_scores)


def greedy_match(det_group, det_frame, grp_start, grp_stop, gt_frame, offset, tp_out, match_out):
    """Greedy nearest-unmatched matching of score-ordered detections.

    Detections must already be in processing order. ``det_group[i]`` selects
    the (video, class) group of ground-truth points a detection may match,
    or -1 for none. Ground-truth frames are ascending inside each group
    ``gt_frame[grp_start[g]:grp_stop[g]]``. Distance ties go to the earlier
    ground truth.
    """
    used = np.zeros(len(gt_frame), dtype=bool)
    for d in range(len(det_group)):
        tp_out[d] = 0
        match_out[d] = -1
        g = det_group[d]
        if g < 0:
            continue
        lo, hi = grp_start[g], grp_stop[g]
        f = det_frame[d]
        pos = lo + int(np.searchsorted(gt_frame[lo:hi], f, side="left"))

        best = -1
        best_dist = offset + 1
        i = pos - 1
        while i >= lo and f - gt_frame[i] <= offset:
            if not used[i]:
                j = i
                while j - 1 >= lo and gt_frame[j - 1] == gt_frame[i]:
                    j -= 1
                    if not used[j]:
                        i = j
                best, best_dist = i, f - gt_frame[i]
                break
            i -= 1
        i = pos
        while i < hi and gt_frame[i] - f <= offset:
            if not used[i]:
                if gt_frame[i] - f < best_dist:
                    best = i
                break
            i += 1

        if best >= 0:
            used[best] = True
            tp_out[d] = 1
            match_out[d] = best
