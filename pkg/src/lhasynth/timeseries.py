"""Time series, piecewise-linear functions, distance and simplification."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels

MIN_TIME_GAP = 1e-9


class TimeSeriesError(ValueError):
    """Malformed time-series data."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Strictly time-ordered data points ``points[k] = s(times[k])``.

    ``points`` has shape ``(len(times), dim)``. The number of pieces is
    ``len(times) - 1``.
    """

    times: np.ndarray
    points: np.ndarray
    id: str = "series"

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64).reshape(-1)
        points = np.array(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[1] < 1:
            raise TimeSeriesError(f"{self.id}: points must be a 2-d array with dim >= 1")
        if len(times) != len(points):
            raise TimeSeriesError(
                f"{self.id}: {len(times)} time stamps but {len(points)} data points"
            )
        if len(times) < 2:
            raise TimeSeriesError(f"{self.id}: fewer than 2 data points")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(points))):
            raise TimeSeriesError(f"{self.id}: non-finite entries")
        gaps = np.diff(times)
        bad = np.flatnonzero(gaps < MIN_TIME_GAP)
        if bad.size:
            raise TimeSeriesError(
                f"{self.id}: times not strictly increasing at index {int(bad[0]) + 1}"
            )
        object.__setattr__(self, "times", _freeze(times))
        object.__setattr__(self, "points", _freeze(points))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def num_pieces(self) -> int:
        return len(self.times) - 1

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.points, other.points)
        )

    def __hash__(self):
        return hash((self.id, self.times.tobytes(), self.points.tobytes()))

    def subseries(self, index: Sequence[int] | np.ndarray) -> "TimeSeries":
        index = np.asarray(index)
        return TimeSeries(self.times[index], self.points[index], id=self.id)

    def to_pwl(self) -> "PwlFunction":
        """The piecewise-linear interpolation of the data points."""
        return PwlFunction(self.times, piece_slopes(self), self.points[0])


@dataclass(frozen=True, eq=False)
class PwlFunction:
    """Continuous piecewise-linear function.

    Attributes
    ----------
    breakpoints : ndarray, shape (k + 1,)
        Interval boundaries ``t_0 < ... < t_k``.
    slopes : ndarray, shape (k, n)
        Constant derivative on each interval.
    x0 : ndarray, shape (n,)
        Value at ``t_0``.
    """

    breakpoints: np.ndarray
    slopes: np.ndarray
    x0: np.ndarray
    _values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=np.float64).reshape(-1)
        x0 = np.array(self.x0, dtype=np.float64).reshape(-1)
        slopes = np.array(self.slopes, dtype=np.float64).reshape(len(bp) - 1, len(x0))
        if len(bp) < 2 or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing with at least 2 entries")
        values = np.empty((len(bp), len(x0)))
        values[0] = x0
        values[1:] = x0 + np.cumsum(np.diff(bp)[:, None] * slopes, axis=0)
        object.__setattr__(self, "breakpoints", _freeze(bp))
        object.__setattr__(self, "slopes", _freeze(slopes))
        object.__setattr__(self, "x0", _freeze(x0))
        object.__setattr__(self, "_values", _freeze(values))

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def breakpoint_values(self) -> np.ndarray:
        return self._values

    def __call__(self, t):
        return evaluate_pwl(self, t)


def evaluate_pwl(f: PwlFunction, t) -> np.ndarray:
    """Evaluate ``f`` at a scalar time (returns ``(n,)``) or an array of times
    (returns ``(len(t), n)``)."""
    ts = np.asarray(t, dtype=np.float64)
    scalar = ts.ndim == 0
    ts = ts.reshape(-1)
    lo, hi = f.domain
    slack = 1e-12 * max(1.0, abs(lo), abs(hi))
    if np.any(ts < lo - slack) or np.any(ts > hi + slack):
        raise ValueError(f"time outside the domain [{lo}, {hi}]")
    piece = np.clip(np.searchsorted(f.breakpoints, ts, side="right") - 1, 0, len(f.slopes) - 1)
    out = f.breakpoint_values[piece] + (ts - f.breakpoints[piece])[:, None] * f.slopes[piece]
    return out[0] if scalar else out


def piece_slopes(s: TimeSeries) -> np.ndarray:
    """Slope of every piece, shape ``(p, n)``."""
    return np.diff(s.points, axis=0) / np.diff(s.times)[:, None]


def distance(f: PwlFunction, s: TimeSeries) -> float:
    """Max over the time points of ``s`` of the infinity norm of ``f(t) - s(t)``."""
    lo, hi = f.domain
    slack = 1e-12 * max(1.0, abs(lo), abs(hi))
    if s.times[0] < lo - slack or s.times[-1] > hi + slack:
        raise ValueError("time series domain is not contained in the function's domain")
    if f.x0.shape[0] != s.dim:
        raise ValueError("dimension mismatch")
    return float(np.max(np.abs(evaluate_pwl(f, s.times) - s.points)))


def _normalize(s: TimeSeries) -> np.ndarray:
    pts = np.column_stack([s.times, s.points])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    out = np.zeros_like(pts)
    nz = span > 0
    out[:, nz] = (pts[:, nz] - lo[nz]) / span[nz]
    return out


def simplify_rdp(s: TimeSeries, tol: float) -> TimeSeries:
    """Ramer-Douglas-Peucker with time as an extra coordinate.

    Time and every value coordinate are affinely rescaled to [0, 1] over the
    bounding box of the series (constant coordinates map to 0), so ``tol`` is
    unit-free. A point is dropped when its Euclidean distance to the current
    chord segment is at most ``tol``.
    """
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    norm = _normalize(s)
    keep = kernels.rdp_mask(norm, max(float(tol), 1e-12))
    if keep.all():
        return s
    return s.subseries(np.flatnonzero(keep))


# --- CSV -------------------------------------------------------------------


def _parse_block(rows: list[tuple[int, list[str]]], header: list[str], ident: str) -> TimeSeries:
    width = len(header)
    data = []
    for lineno, row in rows:
        if len(row) != width:
            raise TimeSeriesError(
                f"{ident}: row {lineno}: expected {width} columns, got {len(row)}"
            )
        try:
            data.append([float(cell) for cell in row])
        except ValueError:
            raise TimeSeriesError(f"{ident}: row {lineno}: non-numeric cell") from None
    if len(data) < 2:
        raise TimeSeriesError(f"{ident}: fewer than 2 data points")
    arr = np.array(data)
    if not np.all(np.isfinite(arr)):
        bad = rows[int(np.flatnonzero(~np.isfinite(arr).all(axis=1))[0])][0]
        raise TimeSeriesError(f"{ident}: row {bad}: non-finite value")
    gaps = np.diff(arr[:, 0])
    bad = np.flatnonzero(gaps < MIN_TIME_GAP)
    if bad.size:
        raise TimeSeriesError(
            f"{ident}: row {rows[int(bad[0]) + 1][0]}: times not strictly increasing"
        )
    return TimeSeries(arr[:, 0], arr[:, 1:], id=ident)


def parse_time_series(text: str | Iterable[str], format: str = "csv", name: str = "series") -> list[TimeSeries]:
    """Parse CSV text with a ``t,x1,...,xn`` header.

    Blank lines separate blocks; each block becomes one series. A block may
    repeat the header. Series ids are ``name`` (single block) or
    ``name#1, name#2, ...``. Row numbers in errors are 1-based file lines.
    """
    if format != "csv":
        raise ValueError(f"unsupported format {format!r}")
    if not isinstance(text, str):
        text = "".join(text)
    lines = text.splitlines()
    blocks: list[list[tuple[int, list[str]]]] = [[]]
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            if blocks[-1]:
                blocks.append([])
            continue
        row = next(csv.reader([line]))
        blocks[-1].append((lineno, [cell.strip() for cell in row]))
    blocks = [b for b in blocks if b]
    if not blocks:
        raise TimeSeriesError(f"{name}: no data")
    header = None
    out = []
    for i, block in enumerate(blocks):
        first = block[0][1]
        if first and first[0].lower() == "t":
            header, block = first, block[1:]
        if header is None:
            raise TimeSeriesError(f"{name}: row {block[0][0]}: missing header 't,x1,...'")
        if len(header) < 2:
            raise TimeSeriesError(f"{name}: header needs at least one value column")
        ident = name if len(blocks) == 1 else f"{name}#{i + 1}"
        out.append(_parse_block(block, header, ident))
    dims = {s.dim for s in out}
    if len(dims) > 1:
        raise TimeSeriesError(f"{name}: blocks have different dimensions {sorted(dims)}")
    return out


def format_csv(s: TimeSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"x{c + 1}" for c in range(s.dim)])
    for t, q in zip(s.times, s.points):
        writer.writerow([repr(float(t))] + [repr(float(v)) for v in q])
    return buf.getvalue()


def check_uniform_dimension(series: Sequence[TimeSeries]) -> int:
    if not series:
        raise ValueError("no time series given")
    dims = {s.dim for s in series}
    if len(dims) != 1:
        raise ValueError(f"time series have different dimensions: {sorted(dims)}")
    return dims.pop()
