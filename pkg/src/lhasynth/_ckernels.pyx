# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror :mod:`lhasynth._pykernels`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef double _segment_distance(const double[:, ::1] pts, Py_ssize_t i,
                              Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef Py_ssize_t c, d = pts.shape[1]
    cdef double seg2 = 0.0, dot = 0.0, u, diff, acc = 0.0
    for c in range(d):
        diff = pts[b, c] - pts[a, c]
        seg2 += diff * diff
        dot += (pts[i, c] - pts[a, c]) * diff
    if seg2 <= 0.0:
        u = 0.0
    else:
        u = dot / seg2
        if u < 0.0:
            u = 0.0
        elif u > 1.0:
            u = 1.0
    for c in range(d):
        diff = pts[i, c] - (pts[a, c] + u * (pts[b, c] - pts[a, c]))
        acc += diff * diff
    return sqrt(acc)


def rdp_mask(points, double tol):
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0]
    keep_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] keep = keep_arr
    if n == 0:
        return keep_arr.astype(bool)
    keep[0] = 1
    keep[n - 1] = 1
    stack_arr = np.empty((n + 1, 2), dtype=np.intp)
    cdef Py_ssize_t[:, ::1] stack = stack_arr
    cdef Py_ssize_t top = 0, a, b, i, best
    cdef double dmax, dist
    with nogil:
        stack[0, 0] = 0
        stack[0, 1] = n - 1
        top = 1
        while top > 0:
            top -= 1
            a = stack[top, 0]
            b = stack[top, 1]
            if b - a < 2:
                continue
            dmax = -1.0
            best = a
            for i in range(a + 1, b):
                dist = _segment_distance(pts, i, a, b)
                if dist > dmax:
                    dmax = dist
                    best = i
            if dmax > tol:
                keep[best] = 1
                stack[top, 0] = a
                stack[top, 1] = best
                stack[top + 1, 0] = best
                stack[top + 1, 1] = b
                top += 2
    return keep_arr.astype(bool)


def nearest_centers(points, centers):
    cdef const double[:, ::1] x = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] c = np.ascontiguousarray(centers, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], k = c.shape[0], d = x.shape[1]
    labels_arr = np.empty(n, dtype=np.intp)
    dist_arr = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t[::1] labels = labels_arr
    cdef double[::1] dist = dist_arr
    cdef Py_ssize_t i, j, m, arg
    cdef double best, acc, diff
    with nogil:
        for i in range(n):
            best = -1.0
            arg = 0
            for j in range(k):
                acc = 0.0
                for m in range(d):
                    diff = x[i, m] - c[j, m]
                    acc += diff * diff
                if best < 0.0 or acc < best:
                    best = acc
                    arg = j
            labels[i] = arg
            dist[i] = best
    return labels_arr, dist_arr


def cumulative_durations(durations, labels, Py_ssize_t n_labels):
    cdef const double[::1] dur = np.ascontiguousarray(durations, dtype=np.float64)
    cdef const Py_ssize_t[::1] lab = np.ascontiguousarray(labels, dtype=np.intp)
    cdef Py_ssize_t p = dur.shape[0], k, j
    out_arr = np.zeros((p + 1, n_labels), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for k in range(1, p + 1):
            for j in range(n_labels):
                out[k, j] = out[k - 1, j]
            out[k, lab[k - 1]] += dur[k - 1]
    return out_arr
