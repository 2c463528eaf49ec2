# cython: language_level=3
"""Compiled hot kernels. Semantics are identical to ``_kernels_py``."""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int8_t, int64_t, uint8_t

cnp.import_array()

BACKEND = "cython"


def wbs_update(double[:, ::1] buf_scores, uint8_t[:, ::1] buf_ind, Py_ssize_t n,
               const double[::1] new_scores, uint8_t[::1] new_ind):
    cdef Py_ssize_t C = new_scores.shape[0]
    cdef Py_ssize_t c, j
    cdef double s
    cdef uint8_t keep
    for c in range(C):
        s = new_scores[c]
        keep = 1
        for j in range(n):
            if buf_scores[j, c] >= s:
                keep = 0
            else:
                buf_ind[j, c] = 0
        new_ind[c] = keep


cdef inline Py_ssize_t _lower_bound(const int64_t[::1] a, Py_ssize_t lo, Py_ssize_t hi,
                                    int64_t x) nogil:
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def greedy_match(const int64_t[::1] det_group, const int64_t[::1] det_frame,
                 const int64_t[::1] grp_start, const int64_t[::1] grp_stop,
                 const int64_t[::1] gt_frame, int64_t offset,
                 int8_t[::1] tp_out, int64_t[::1] match_out):
    cdef Py_ssize_t n_det = det_group.shape[0]
    cdef cnp.ndarray[uint8_t, ndim=1] used_arr = np.zeros(gt_frame.shape[0], dtype=np.uint8)
    cdef uint8_t[::1] used = used_arr
    cdef Py_ssize_t d, lo, hi, pos, i, j, best
    cdef int64_t g, f, best_dist
    with nogil:
        for d in range(n_det):
            tp_out[d] = 0
            match_out[d] = -1
            g = det_group[d]
            if g < 0:
                continue
            lo = grp_start[g]
            hi = grp_stop[g]
            f = det_frame[d]
            pos = _lower_bound(gt_frame, lo, hi, f)

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
                    best = i
                    best_dist = f - gt_frame[i]
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
                used[best] = 1
                tp_out[d] = 1
                match_out[d] = best
