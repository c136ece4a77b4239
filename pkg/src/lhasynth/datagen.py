"""Benchmark data: simulate hybrid automata with diagonal affine dynamics.

Each coordinate follows ``x' = a x + b`` in closed form. A transition becomes
possible when its guard is entered and mandatory when the invariant boundary
is reached; the switch time is drawn uniformly between the two.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .automaton import Box, Lha
from .timeseries import MIN_TIME_GAP, TimeSeries

log = logging.getLogger(__name__)

EVENT_TOL = 1e-9
_MEMBER_TOL = 1e-7
_MAX_HORIZON = 1e6


class DeadlockError(RuntimeError):
    """Invariant boundary reached with no enabled transition."""

    def __init__(self, message, time, state, partial=None):
        super().__init__(f"{message} at t={time:.9g}, x={np.asarray(state).tolist()}")
        self.time = time
        self.state = np.asarray(state)
        self.partial = partial


@dataclass(frozen=True, eq=False)
class AffineMode:
    a: np.ndarray
    b: np.ndarray
    invariant: Box

    def __post_init__(self):
        object.__setattr__(self, "a", np.array(self.a, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "b", np.array(self.b, dtype=np.float64).reshape(-1))

    def state(self, x0, t):
        """Closed-form state after time ``t`` (scalar or array) from ``x0``."""
        return affine_solution(x0, self.a, self.b, t)


@dataclass(frozen=True, eq=False)
class AffineHybridModel:
    """Hybrid automaton whose coordinates evolve independently in each mode."""

    modes: dict
    edges: dict  # (source, target) -> guard Box
    initial_location: str
    initial_point: np.ndarray

    def __post_init__(self):
        x0 = np.array(self.initial_point, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "initial_point", x0)
        if self.initial_location not in self.modes:
            raise ValueError(f"unknown initial location {self.initial_location!r}")
        if not self.modes[self.initial_location].invariant.contains(x0):
            raise ValueError("initial point violates the initial invariant")
        for (src, dst), g in self.edges.items():
            if src not in self.modes or dst not in self.modes:
                raise ValueError(f"edge ({src}, {dst}) references an unknown mode")
            if not g.intersects(self.modes[src].invariant):
                raise ValueError(f"guard of ({src}, {dst}) misses the source invariant")

    @property
    def dim(self) -> int:
        return len(self.initial_point)

    def outgoing(self, loc):
        return [(e, g) for e, g in self.edges.items() if e[0] == loc]


@dataclass(frozen=True)
class ProductModel:
    """Independent components running in parallel; coordinates are concatenated."""

    components: tuple

    @property
    def dim(self) -> int:
        return sum(c.dim for c in self.components)


@dataclass(frozen=True)
class SamplingSpec:
    """Where to sample a simulated trajectory.

    Either explicit ``times``, or ``count`` stamps with ``scheme`` "uniform"
    (evenly spaced over [0, T]) or "switching" (start, end and every switch
    time, topped up with uniformly random stamps; the first ``count`` are kept).
    """

    times: Sequence[float] | None = None
    count: int | None = None
    scheme: str = "uniform"
    seed: int | None = None

    def __post_init__(self):
        if self.times is None and (self.count is None or self.count < 2):
            raise ValueError("need explicit times or a count >= 2")
        if self.scheme not in ("uniform", "switching"):
            raise ValueError(f"unknown sampling scheme {self.scheme!r}")


def affine_solution(x0, a, b, t):
    x0 = np.asarray(x0, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)[..., None] if np.ndim(t) else float(t)
    lin = x0 + b * t
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(a != 0, b / np.where(a != 0, a, 1.0), 0.0)
        expo = (x0 + ratio) * np.exp(a * t) - ratio
    return np.where(a != 0, expo, lin)


def _coord(x0, a, b, t):
    if a == 0:
        return x0 + b * t
    return (x0 + b / a) * math.exp(a * t) - b / a


def _crossing(x0: float, a: float, b: float, level: float) -> float:
    """Earliest t >= 0 with x(t) = level, by bisection; inf if never reached."""
    if x0 == level:
        return 0.0
    up = level > x0
    passed = (lambda v: v >= level) if up else (lambda v: v <= level)
    hi = 1.0
    while True:
        try:
            v = _coord(x0, a, b, hi)
        except OverflowError:
            v = math.inf if (a * x0 + b > 0) else -math.inf
        if passed(v):
            break
        hi *= 2.0
        if hi > _MAX_HORIZON:
            return math.inf
    lo = 0.0
    while hi - lo > EVENT_TOL:
        mid = 0.5 * (lo + hi)
        if passed(_coord(x0, a, b, mid)):
            hi = mid
        else:
            lo = mid
    return hi


def _membership_interval(x, a, b, box: Box) -> tuple[float, float]:
    """Time interval ``[start, end]`` during which the flow from ``x`` is in ``box``.

    Each coordinate is monotone in time, so the set is an interval.
    Returns ``(inf, inf)`` when it is empty.
    """
    start, end = 0.0, math.inf
    for c in range(len(x)):
        xc, lo, hi = float(x[c]), float(box.lo[c]), float(box.hi[c])
        rate = a[c] * xc + b[c]
        if lo - _MEMBER_TOL <= xc <= hi + _MEMBER_TOL:
            s = 0.0
            if rate > 0 and math.isfinite(hi):
                e = _crossing(xc, a[c], b[c], hi) if xc < hi else 0.0
            elif rate < 0 and math.isfinite(lo):
                e = _crossing(xc, a[c], b[c], lo) if xc > lo else 0.0
            else:
                e = math.inf
        elif xc < lo:
            s = _crossing(xc, a[c], b[c], lo) if rate > 0 else math.inf
            e = _crossing(xc, a[c], b[c], hi) if math.isfinite(s) and math.isfinite(hi) else math.inf
        else:
            s = _crossing(xc, a[c], b[c], hi) if rate < 0 else math.inf
            e = _crossing(xc, a[c], b[c], lo) if math.isfinite(s) and math.isfinite(lo) else math.inf
        if not math.isfinite(s):
            return math.inf, math.inf
        start, end = max(start, s), min(end, e)
    if start > end:
        return math.inf, math.inf
    return start, end


@dataclass
class _Segment:
    t0: float
    t1: float
    location: object
    x0: np.ndarray
    mode: AffineMode


@dataclass
class Trajectory:
    """Closed-form trajectory of one component over ``[0, end]``."""

    segments: list = field(default_factory=list)

    @property
    def end(self) -> float:
        return self.segments[-1].t1

    @property
    def switch_times(self) -> list:
        return [seg.t0 for seg in self.segments[1:]]

    def __call__(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=np.float64)
        starts = np.array([seg.t0 for seg in self.segments])
        idx = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(starts) - 1)
        out = np.empty((len(times), len(self.segments[0].x0)))
        for i in np.unique(idx):
            seg = self.segments[i]
            sel = idx == i
            out[sel] = seg.mode.state(seg.x0, times[sel] - seg.t0)
        return out


def _simulate_component(model: AffineHybridModel, duration: float, rng) -> Trajectory:
    traj = Trajectory()
    t, loc, x = 0.0, model.initial_location, model.initial_point.copy()
    while t < duration:
        mode = model.modes[loc]
        _, t_exit = _membership_interval(x, mode.a, mode.b, mode.invariant)
        horizon = duration - t
        windows = []
        for (edge, guard) in model.outgoing(loc):
            s, e = _membership_interval(x, mode.a, mode.b, guard)
            e = min(e, t_exit)
            if s <= e:
                windows.append((s, e, edge))
        if not windows:
            if t_exit >= horizon:
                traj.segments.append(_Segment(t, duration, loc, x, mode))
                break
            traj.segments.append(_Segment(t, t + t_exit, loc, x, mode))
            raise DeadlockError(
                f"no enabled transition in {loc!r}", t + t_exit, mode.state(x, t_exit), partial=traj
            )
        earliest = min(w[0] for w in windows)
        latest = t_exit if math.isfinite(t_exit) else max(w[1] for w in windows)
        if not math.isfinite(latest):
            latest = earliest + horizon
        tau = rng.uniform(earliest, latest)
        if tau >= horizon:
            traj.segments.append(_Segment(t, duration, loc, x, mode))
            break
        enabled = [w for w in windows if w[0] <= tau <= w[1]]
        if not enabled:
            # tau fell between guard windows: move it to the closest one
            w = min(windows, key=lambda w: min(abs(tau - w[0]), abs(tau - w[1])))
            tau = min(max(tau, w[0]), w[1])
            enabled = [w]
        _, _, edge = enabled[int(rng.integers(len(enabled)))]
        x_new = mode.state(x, tau)
        traj.segments.append(_Segment(t, t + tau, loc, x, mode))
        target = model.modes[edge[1]]
        if not target.invariant.contains(x_new, _MEMBER_TOL):
            raise DeadlockError(f"jump {edge} lands outside the target invariant", t + tau, x_new, partial=traj)
        t, loc, x = t + tau, edge[1], x_new
    return traj


def _dedupe(stamps: np.ndarray) -> np.ndarray:
    stamps = np.sort(stamps)
    keep = np.concatenate([[True], np.diff(stamps) >= MIN_TIME_GAP])
    return stamps[keep]


def _sample_times(spec: SamplingSpec, end: float, switches: list, rng) -> np.ndarray:
    if spec.times is not None:
        stamps = np.asarray(spec.times, dtype=np.float64)
        if np.any(np.diff(stamps) <= 0) or stamps[0] < 0 or stamps[-1] > end + EVENT_TOL:
            raise ValueError("sample times must be strictly increasing within the simulated duration")
        return stamps
    if spec.scheme == "uniform":
        return np.linspace(0.0, end, spec.count)
    stamps = _dedupe(np.array([0.0, end] + [s for s in switches if 0 < s < end]))
    if len(stamps) >= spec.count:
        return stamps[: spec.count]
    while len(stamps) < spec.count:
        extra = rng.uniform(0.0, end, spec.count - len(stamps))
        stamps = _dedupe(np.concatenate([stamps, extra]))
    return stamps


def simulate(model, duration: float, seed: int = 0, sampling: SamplingSpec | None = None,
             id: str = "sim") -> TimeSeries:
    """Simulate ``model`` (an :class:`AffineHybridModel` or :class:`ProductModel`)
    over ``[0, duration]`` and sample it.

    Raises :class:`DeadlockError` (carrying the sampled partial series in
    ``partial``) if a component gets stuck.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    sampling = sampling or SamplingSpec(count=101)
    components = model.components if isinstance(model, ProductModel) else (model,)
    seq = np.random.SeedSequence(seed)
    child = seq.spawn(len(components) + 1)
    trajs = []
    dead = None
    for comp, ss in zip(components, child[:-1]):
        try:
            trajs.append(_simulate_component(comp, duration, np.random.default_rng(ss)))
        except DeadlockError as exc:
            trajs.append(exc.partial)
            dead = exc if dead is None or exc.time < dead.time else dead
    end = duration if dead is None else dead.time
    switches = sorted(s for tr in trajs for s in tr.switch_times)
    srng = np.random.default_rng(child[-1] if sampling.seed is None else sampling.seed)
    if dead is not None and sampling.times is not None:
        stamps = np.asarray([s for s in sampling.times if s <= end])
    else:
        stamps = _sample_times(sampling, end, switches, srng)
    series = None
    if len(stamps) >= 2:
        series = TimeSeries(stamps, np.hstack([tr(stamps) for tr in trajs]), id=id)
    if dead is not None:
        dead.partial = series
        raise dead
    return series


def thermostat() -> AffineHybridModel:
    """The two-mode thermostat: ON ``x' = -0.5x + 40`` (x <= 75), OFF ``x' = -0.5x + 30``
    (x >= 65); switch off once x >= 74.5, on once x <= 65.5."""
    inf = math.inf
    modes = {
        "on": AffineMode([-0.5], [40.0], Box([-inf], [75.0])),
        "off": AffineMode([-0.5], [30.0], Box([65.0], [inf])),
    }
    edges = {
        ("on", "off"): Box([74.5], [inf]),
        ("off", "on"): Box([-inf], [65.5]),
    }
    return AffineHybridModel(modes, edges, "on", [68.0])


def thermostat_family(n: int) -> ProductModel:
    """``n`` independent thermostats in parallel (2^n product locations, kept implicit)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return ProductModel(tuple(thermostat() for _ in range(n)))


def cyclic_2d() -> AffineHybridModel:
    """A three-phase cycle in two coordinates with diagonal affine dynamics.

    ``grow`` drives x up until x >= 14, ``switch`` drives y up until y >= 19,
    ``decay`` lets both decay until x <= 3.
    """
    inf = math.inf
    modes = {
        "grow": AffineMode([-0.5, -0.2], [10.0, 1.0], Box([-inf, -inf], [15.0, inf])),
        "switch": AffineMode([-0.1, -0.5], [0.0, 15.0], Box([-inf, -inf], [inf, 20.0])),
        "decay": AffineMode([-1.0, -1.0], [0.0, 0.0], Box([2.0, -inf], [inf, inf])),
    }
    edges = {
        ("grow", "switch"): Box([14.0, -inf], [inf, inf]),
        ("switch", "decay"): Box([-inf, 19.0], [inf, inf]),
        ("decay", "grow"): Box([-inf, -inf], [3.0, inf]),
    }
    return AffineHybridModel(modes, edges, "grow", [5.0, 5.0])


def generate(model, r: int, p: int, duration: float, seed: int = 0,
             scheme: str = "switching", prefix: str = "series",
             allow_partial: bool = False) -> list[TimeSeries]:
    """``r`` simulations with ``p`` data points each, deterministic in ``seed``.

    With ``allow_partial`` a deadlocked simulation contributes its truncated
    series (if it has at least two points) and a warning instead of raising.
    """
    if r < 1 or p < 2:
        raise ValueError("need r >= 1 and p >= 2")
    out = []
    for j, ss in enumerate(np.random.SeedSequence(seed).spawn(r)):
        sub = int(ss.generate_state(1)[0])
        sampling = SamplingSpec(count=p, scheme=scheme, seed=sub + 1)
        try:
            out.append(simulate(model, duration, sub, sampling, id=f"{prefix}_{j + 1:03d}"))
        except DeadlockError as exc:
            if not allow_partial:
                raise
            warnings.warn(f"series {j + 1}: {exc}; partial series kept", stacklevel=2)
            if exc.partial is not None:
                out.append(exc.partial)
    return out


def simulate_lha(lha: Lha, duration: float, seed: int = 0, start_location=None,
                 steps: int = 1000, switch_prob: float = 0.05) -> TimeSeries:
    """Random execution of a synthesized LHA.

    Starts uniformly inside the invariant of ``start_location`` (default: the
    first location) and integrates with ``steps`` fixed steps. At each step an
    enabled transition is taken with probability ``switch_prob``; reaching the
    invariant boundary forces a transition. A deadlock truncates the series
    with a warning.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(seed)
    loc = lha.locations[0] if start_location is None else start_location
    inv = lha.invariant[loc]
    if not (np.all(np.isfinite(inv.lo)) and np.all(np.isfinite(inv.hi))):
        raise ValueError(f"cannot sample a start point in the unbounded invariant of {loc}")
    x = rng.uniform(inv.lo, inv.hi)
    dt = duration / steps
    times, pts = [0.0], [x.copy()]

    def enabled_edges(loc, x):
        return [
            (a, b) for (a, b) in sorted(lha.edges)
            if a == loc and b != loc and lha.guard[a, b].contains(x, 1e-9)
            and lha.invariant[b].contains(x, 1e-9)
        ]

    def emit(t, x):
        if t - times[-1] >= MIN_TIME_GAP:
            times.append(t)
            pts.append(x.copy())
        else:
            pts[-1] = x.copy()

    t = 0.0
    stuck = 0
    while duration - t > 1e-12:
        h = min(dt, duration - t)
        flow = lha.flow[loc]
        box = lha.invariant[loc]
        with np.errstate(divide="ignore", invalid="ignore"):
            room = np.where(flow > 0, (box.hi - x) / flow, np.where(flow < 0, (box.lo - x) / flow, np.inf))
        t_hit = max(0.0, float(np.min(room)))
        options = enabled_edges(loc, x)
        if options and rng.random() < switch_prob:
            loc = options[int(rng.integers(len(options)))][1]
            continue
        if t_hit <= h:
            x = np.clip(x + t_hit * flow, box.lo, box.hi)
            t += t_hit
            emit(t, x)
            options = enabled_edges(loc, x)
            stuck = stuck + 1 if t_hit == 0 else 0
            if not options or stuck > 100:
                warnings.warn(f"deadlock in location {loc} at t={t:.6g}; series truncated", stacklevel=2)
                break
            loc = options[int(rng.integers(len(options)))][1]
        else:
            x = x + h * flow
            t += h
            emit(t, x)
    if len(times) < 2:
        raise DeadlockError(f"deadlock in location {loc}", t, x)
    return TimeSeries(np.array(times), np.array(pts), id=f"lha_sim_{seed}")
