"""Phase 1: assign a location label to every piece via k-means on slopes.

Labels are 0-based integers throughout the library.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .timeseries import TimeSeries, check_uniform_dimension, piece_slopes, simplify_rdp

log = logging.getLogger(__name__)

MAX_ITER = 300
CENTER_TOL = 1e-9


@dataclass(frozen=True)
class ClusterResult:
    centers: np.ndarray
    labels: np.ndarray
    cost: float
    iterations: int = 0


@dataclass(frozen=True)
class CostRow:
    k: int
    cost: float
    rel_improvement: float | None


@dataclass(frozen=True, eq=False)
class PieceMapping:
    """Location label of every piece of every (original) series.

    ``labels[j][i]`` is the label of piece ``i`` of series ``j``.
    """

    labels: tuple
    n_locations: int
    centers: np.ndarray
    cost_table: tuple = field(default=())

    def __post_init__(self):
        labels = tuple(np.asarray(lab, dtype=np.intp) for lab in self.labels)
        for lab in labels:
            lab.setflags(write=False)
            if lab.size and (lab.min() < 0 or lab.max() >= self.n_locations):
                raise ValueError("label out of range")
        object.__setattr__(self, "labels", labels)

    @property
    def used_labels(self) -> list[int]:
        if not self.labels:
            return []
        return sorted(set(np.concatenate(self.labels).tolist()))

    @property
    def unused_labels(self) -> list[int]:
        return sorted(set(range(self.n_locations)) - set(self.used_labels))

    def check_against(self, series: Sequence[TimeSeries]) -> None:
        if len(series) != len(self.labels):
            raise ValueError(f"mapping covers {len(self.labels)} series, got {len(series)}")
        for s, lab in zip(series, self.labels):
            if len(lab) != s.num_pieces:
                raise ValueError(
                    f"{s.id}: mapping has {len(lab)} labels for {s.num_pieces} pieces"
                )


def kmeans(points, k: int, init, max_iter: int = MAX_ITER) -> ClusterResult:
    """Lloyd's algorithm from explicit initial centers.

    Stops when no center moves more than 1e-9 or after ``max_iter`` iterations. A
    center that loses all its points is re-seeded with the point farthest from
    its own center, so the number of clusters stays ``k``.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if len(x) == 0:
        raise ValueError("no points to cluster")
    if k < 1 or k > len(x):
        raise ValueError(f"k={k} must be between 1 and the number of points ({len(x)})")
    centers = np.array(init, dtype=np.float64).reshape(k, x.shape[1])

    it = 0
    for it in range(1, max_iter + 1):
        labels, d2 = kernels.nearest_centers(x, centers)
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            # only steal from clusters that keep at least one point
            movable = np.where(counts[labels] > 1, d2, -1.0)
            far = int(np.argmax(movable))
            counts[labels[far]] -= 1
            counts[j] += 1
            labels[far] = j
            d2[far] = 0.0
        new = np.zeros_like(centers)
        np.add.at(new, labels, x)
        new /= counts[:, None]
        shift = np.max(np.abs(new - centers))
        centers = new
        if shift < CENTER_TOL:
            break

    labels, d2 = kernels.nearest_centers(x, centers)
    return ClusterResult(centers=centers, labels=labels, cost=float(d2.sum()), iterations=it)


def first_distinct(points, k: int) -> np.ndarray:
    """The first ``k`` pairwise-distinct rows in scan order (fewer if not available)."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    chosen: list[np.ndarray] = []
    for row in x:
        if not any(np.array_equal(row, c) for c in chosen):
            chosen.append(row)
            if len(chosen) == k:
                break
    return np.array(chosen).reshape(len(chosen), x.shape[1])


def choose_num_locations(points, theta: float = 0.5, k_max: int = 20):
    """Grow k until the relative cost improvement drops below ``theta``.

    Returns ``(k, table)`` where ``table`` lists a :class:`CostRow` for every
    k that was tried, including the first failing one.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if len(x) == 0:
        raise ValueError("no points to cluster")

    table = [CostRow(1, kmeans(x, 1, first_distinct(x, 1)).cost, None)]
    chosen = 1
    for k in range(2, k_max + 1):
        init = first_distinct(x, k)
        if len(init) < k:
            break
        cost = kmeans(x, k, init).cost
        prev = table[-1].cost
        rel = 1.0 - cost / prev if prev > 0 else 0.0
        table.append(CostRow(k, cost, rel))
        if rel < theta:
            break
        chosen = k
    return chosen, table


def _expand(original: TimeSeries, simplified: TimeSeries, labels: np.ndarray) -> np.ndarray:
    mid = 0.5 * (original.times[:-1] + original.times[1:])
    idx = np.searchsorted(simplified.times, mid, side="right") - 1
    idx = np.clip(idx, 0, simplified.num_pieces - 1)
    return labels[idx]


def assign_locations(
    series: Sequence[TimeSeries],
    n_locations: int | None = None,
    *,
    theta: float = 0.5,
    k_max: int = 20,
    rdp_tol: float | None = 0.01,
) -> PieceMapping:
    """Label every piece of every series with a location.

    Series are simplified with :func:`simplify_rdp` (skipped when ``rdp_tol``
    is None), the slopes of all simplified pieces are clustered, and every
    original piece inherits the label of the simplified piece containing its
    midpoint. Initial centers are the first distinct simplified slopes.
    """
    check_uniform_dimension(series)
    if n_locations is not None and n_locations < 1:
        raise ValueError("number of locations must be >= 1")
    simplified = [s if rdp_tol is None else simplify_rdp(s, rdp_tol) for s in series]
    slopes = [piece_slopes(s) for s in simplified]
    allslopes = np.concatenate(slopes, axis=0)

    table: list[CostRow] = []
    if n_locations is None:
        k, table = choose_num_locations(allslopes, theta=theta, k_max=k_max)
    else:
        k = n_locations
    init = first_distinct(allslopes, k)
    if len(init) < k:
        warnings.warn(
            f"only {len(init)} distinct slopes; reducing the number of locations from {k}",
            stacklevel=2,
        )
        k = len(init)
    result = kmeans(allslopes, k, init)
    log.debug("k-means with k=%d: cost %.6g after %d iterations", k, result.cost, result.iterations)

    labels = []
    start = 0
    for orig, simp, sl in zip(series, simplified, slopes):
        simp_labels = result.labels[start:start + len(sl)]
        start += len(sl)
        labels.append(_expand(orig, simp, simp_labels))
    return PieceMapping(tuple(labels), k, result.centers, tuple(table))
