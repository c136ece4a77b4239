"""Pure-Python implementations of the hot loops.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference side of the kernel benchmark.
"""

import math

import numpy as np


def _segment_distance(pts, i, a, b):
    p, s, e = pts[i], pts[a], pts[b]
    seg = [ec - sc for sc, ec in zip(s, e)]
    seg2 = sum(v * v for v in seg)
    if seg2 <= 0.0:
        u = 0.0
    else:
        u = sum((pc - sc) * v for pc, sc, v in zip(p, s, seg)) / seg2
        u = min(1.0, max(0.0, u))
    return math.sqrt(sum((pc - (sc + u * v)) ** 2 for pc, sc, v in zip(p, s, seg)))


def rdp_mask(points, tol):
    """Boolean keep-mask of Ramer-Douglas-Peucker over already-normalized points."""
    pts = np.asarray(points, dtype=np.float64).tolist()
    n = len(pts)
    keep = [False] * n
    if n == 0:
        return np.zeros(0, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        a, b = stack.pop()
        if b - a < 2:
            continue
        dmax, best = -1.0, a
        for i in range(a + 1, b):
            d = _segment_distance(pts, i, a, b)
            if d > dmax:
                dmax, best = d, i
        if dmax > tol:
            keep[best] = True
            stack.append((a, best))
            stack.append((best, b))
    return np.array(keep, dtype=bool)


def nearest_centers(points, centers):
    """Index of the nearest center (lowest index on ties) and squared distance."""
    x = np.asarray(points, dtype=np.float64)
    c = np.asarray(centers, dtype=np.float64)
    labels = np.empty(len(x), dtype=np.intp)
    dist = np.empty(len(x), dtype=np.float64)
    for i, row in enumerate(x):
        d2 = ((c - row) ** 2).sum(axis=1)
        j = int(np.argmin(d2))
        labels[i] = j
        dist[i] = d2[j]
    return labels, dist


def cumulative_durations(durations, labels, n_labels):
    """Row k holds the time spent in each label over the first k pieces."""
    p = len(durations)
    out = np.zeros((p + 1, n_labels), dtype=np.float64)
    acc = [0.0] * n_labels
    for k in range(p):
        acc[int(labels[k])] += float(durations[k])
        out[k + 1] = acc
    return out
