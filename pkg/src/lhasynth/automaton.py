"""Linear hybrid automata: data model, construction from a solution point,
capture/validity checks, and the end-to-end synthesis pipeline."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import flowpoly
from .flowpoly import VariableLayout, build_flow_polyhedron, intersect, minimize_epsilon
from .segmentation import PieceMapping, assign_locations
from .timeseries import PwlFunction, TimeSeries, check_uniform_dimension, distance, piece_slopes

log = logging.getLogger(__name__)

CHECK_TOL = 1e-6


class SelfCheckError(RuntimeError):
    """A synthesized execution failed its own capture or validity check."""


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box ``lo <= x <= hi`` (bounds may be infinite)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=np.float64).reshape(-1)
        hi = np.array(self.hi, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("lo and hi differ in length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError(f"empty or invalid box [{lo}, {hi}]")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def hull(cls, points) -> "Box":
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if len(pts) == 0:
            raise ValueError("hull of no points")
        return cls(pts.min(axis=0), pts.max(axis=0))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def bloat(self, eps: float) -> "Box":
        return Box(self.lo - eps, self.hi + eps)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def intersects(self, other: "Box") -> bool:
        return bool(np.all(self.lo <= other.hi) and np.all(other.lo <= self.hi))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


@dataclass(frozen=True)
class DiscreteStructure:
    locations: tuple
    edges: frozenset

    def __post_init__(self):
        locs = set(self.locations)
        for a, b in self.edges:
            if a not in locs or b not in locs:
                raise ValueError(f"edge ({a}, {b}) references an unknown location")


@dataclass(frozen=True, eq=False)
class Lha:
    """``(Loc, E, Flow, Inv, Grd)`` with constant flows and box invariants/guards."""

    structure: DiscreteStructure
    flow: Mapping[int, np.ndarray]
    invariant: Mapping[int, Box]
    guard: Mapping[tuple, Box]

    def __post_init__(self):
        flow = {loc: np.array(self.flow[loc], dtype=np.float64).reshape(-1) for loc in self.structure.locations}
        for loc in self.structure.locations:
            if loc not in self.invariant:
                raise ValueError(f"location {loc} has no invariant")
        for e in self.structure.edges:
            if e not in self.guard:
                raise ValueError(f"edge {e} has no guard")
            g = self.guard[e]
            if not (g.intersects(self.invariant[e[0]]) and g.intersects(self.invariant[e[1]])):
                raise ValueError(f"guard of edge {e} misses an endpoint invariant")
        object.__setattr__(self, "flow", flow)
        object.__setattr__(self, "invariant", dict(self.invariant))
        object.__setattr__(self, "guard", dict(self.guard))

    @property
    def locations(self) -> tuple:
        return self.structure.locations

    @property
    def edges(self) -> frozenset:
        return self.structure.edges

    @property
    def dim(self) -> int:
        return len(next(iter(self.flow.values())))

    def __eq__(self, other):
        if not isinstance(other, Lha):
            return NotImplemented
        return (
            self.structure == other.structure
            and all(np.array_equal(self.flow[k], other.flow[k]) for k in self.locations)
            and self.invariant == other.invariant
            and self.guard == other.guard
        )

    def to_dict(self, epsilon: float | None = None) -> dict:
        doc = {
            "dim": self.dim,
            "locations": [
                {
                    "id": loc,
                    "flow": self.flow[loc].tolist(),
                    "invariant": {"lo": self.invariant[loc].lo.tolist(), "hi": self.invariant[loc].hi.tolist()},
                }
                for loc in self.locations
            ],
            "transitions": [
                {
                    "source": a,
                    "target": b,
                    "guard": {"lo": self.guard[a, b].lo.tolist(), "hi": self.guard[a, b].hi.tolist()},
                }
                for a, b in sorted(self.edges)
            ],
        }
        if epsilon is not None:
            doc["epsilon"] = float(epsilon)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Lha":
        dim = int(doc["dim"])
        locs = tuple(int(loc["id"]) for loc in doc["locations"])
        flow = {int(loc["id"]): np.array(loc["flow"], dtype=np.float64) for loc in doc["locations"]}
        inv = {int(loc["id"]): Box(loc["invariant"]["lo"], loc["invariant"]["hi"]) for loc in doc["locations"]}
        guard = {
            (int(t["source"]), int(t["target"])): Box(t["guard"]["lo"], t["guard"]["hi"])
            for t in doc["transitions"]
        }
        for loc in locs:
            if len(flow[loc]) != dim or inv[loc].dim != dim:
                raise ValueError(f"location {loc}: dimension mismatch with dim={dim}")
        return cls(DiscreteStructure(locs, frozenset(guard)), flow, inv, guard)


def dumps_model(lha: Lha, epsilon: float | None = None) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(lha.to_dict(epsilon), indent=2)


def loads_model(text: str) -> tuple[Lha, float | None]:
    doc = json.loads(text)
    eps = doc.get("epsilon")
    return Lha.from_dict(doc), (None if eps is None else float(eps))


@dataclass(frozen=True, eq=False)
class Execution:
    """Dwell ``i`` starts at ``starts[i]`` in ``locations[i]`` and lasts
    ``durations[i]``; the last dwell ends at ``end``. Jumps keep the state."""

    locations: tuple
    starts: np.ndarray
    durations: np.ndarray
    end: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        starts = np.atleast_2d(np.array(self.starts, dtype=np.float64))
        durations = np.array(self.durations, dtype=np.float64).reshape(-1)
        end = np.array(self.end, dtype=np.float64).reshape(-1)
        if len(self.locations) != len(starts) or len(starts) != len(durations):
            raise ValueError("locations, starts and durations differ in length")
        if np.any(durations < 0):
            raise ValueError("negative dwell time")
        object.__setattr__(self, "locations", tuple(int(x) for x in self.locations))
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "durations", durations)
        object.__setattr__(self, "end", end)

    @property
    def steps(self):
        return list(zip(self.locations, self.starts, self.durations))

    @property
    def states(self) -> np.ndarray:
        """Continuous state at every dwell boundary, shape ``(steps + 1, n)``."""
        return np.vstack([self.starts, self.end])

    @property
    def duration(self) -> float:
        return float(self.durations.sum())

    def projection(self) -> PwlFunction:
        keep = self.durations > 0
        states = self.states
        times = self.t0 + np.concatenate([[0.0], np.cumsum(self.durations)])
        idx = np.flatnonzero(keep)
        bp = np.concatenate([[times[0]], times[idx + 1]])
        slopes = (states[idx + 1] - states[idx]) / self.durations[idx][:, None]
        return PwlFunction(bp, slopes, states[0])


@dataclass
class SynthesisResult:
    lha: Lha
    epsilon: float
    executions: list
    mapping: PieceMapping
    solution: flowpoly.SolutionPoint
    report: dict = field(default_factory=dict)


@dataclass
class CaptureReport:
    ok: bool
    max_deviation: float
    worst_time: float


@dataclass
class Violation:
    kind: str  # "flow", "invariant", "guard" or "edge"
    step: int
    message: str


@dataclass
class ValidationReport:
    ok: bool
    violations: list


def induce_discrete_structure(mapping: PieceMapping) -> DiscreteStructure:
    locs = set()
    edges = set()
    for lab in mapping.labels:
        lab = lab.tolist()
        locs.update(lab)
        edges.update(zip(lab[:-1], lab[1:]))
    return DiscreteStructure(tuple(sorted(locs)), frozenset(edges))


def induce_execution(s: TimeSeries, labels, slopes, x0, merge_dwells: bool = False) -> Execution:
    """Follow the location slopes along the pieces of ``s`` from ``x0``,
    jumping at every interior data point."""
    labels = np.asarray(labels, dtype=np.intp)
    slopes = np.atleast_2d(np.asarray(slopes, dtype=np.float64))
    if len(labels) != s.num_pieces:
        raise ValueError(f"{s.id}: {len(labels)} labels for {s.num_pieces} pieces")
    dur = np.diff(s.times)
    states = np.vstack([np.asarray(x0, dtype=np.float64).reshape(1, -1),
                        x0 + np.cumsum(dur[:, None] * slopes[labels], axis=0)])
    if merge_dwells:
        first = np.concatenate([[True], labels[1:] != labels[:-1]])
        starts = np.flatnonzero(first)
        ends = np.concatenate([starts[1:], [len(labels)]])
        return Execution(
            tuple(labels[starts]),
            states[starts],
            s.times[ends] - s.times[starts],
            states[-1],
            t0=float(s.times[0]),
        )
    return Execution(tuple(labels), states[:-1], dur, states[-1], t0=float(s.times[0]))


def build_lha(series: Sequence[TimeSeries], mapping: PieceMapping, slopes, epsilon: float) -> Lha:
    """Flows from ``slopes``; invariants and guards are eps-bloated interval
    hulls of the data points associated with each location / transition.

    A data point belongs to a location if its preceding or succeeding piece
    carries that label, and to transition ``(a, b)`` if the preceding piece is
    ``a`` and the succeeding piece is ``b``.
    """
    mapping.check_against(series)
    slopes = np.atleast_2d(np.asarray(slopes, dtype=np.float64))
    structure = induce_discrete_structure(mapping)
    loc_pts: dict[int, list] = {loc: [] for loc in structure.locations}
    edge_pts: dict[tuple, list] = {e: [] for e in structure.edges}
    for s, lab in zip(series, mapping.labels):
        q = s.points
        for i, loc in enumerate(lab.tolist()):
            loc_pts[loc].append(q[i])
            loc_pts[loc].append(q[i + 1])
        for i in range(len(lab) - 1):
            edge_pts[int(lab[i]), int(lab[i + 1])].append(q[i + 1])
    inv = {loc: Box.hull(pts).bloat(epsilon) for loc, pts in loc_pts.items()}
    guard = {}
    for e, pts in edge_pts.items():
        if not pts:
            raise RuntimeError(f"transition {e} has no associated data point")
        guard[e] = Box.hull(pts).bloat(epsilon)
    flow = {loc: slopes[loc] for loc in structure.locations}
    return Lha(structure, flow, inv, guard)


def check_epsilon_capture(exec: Execution, s: TimeSeries, epsilon: float, tol: float = CHECK_TOL) -> CaptureReport:
    f = exec.projection()
    dev = np.max(np.abs(f(s.times) - s.points), axis=1)
    worst = int(np.argmax(dev))
    d = distance(f, s)
    return CaptureReport(ok=d <= epsilon + tol, max_deviation=d, worst_time=float(s.times[worst]))


def validate_execution(lha: Lha, exec: Execution, tol: float = CHECK_TOL) -> ValidationReport:
    """Check that ``exec`` is an execution of ``lha`` up to ``tol``.

    Endpoints of each dwell suffice for the invariant check since flows are
    constant and invariants convex.
    """
    states = exec.states
    locs = list(exec.locations)
    for loc in set(locs):
        if loc not in lha.flow:
            raise KeyError(f"unknown location {loc}")
    if not locs:
        return ValidationReport(ok=True, violations=[])
    flows = np.array([lha.flow[loc] for loc in locs])
    lo = np.array([lha.invariant[loc].lo for loc in locs])
    hi = np.array([lha.invariant[loc].hi for loc in locs])
    disp_err = np.max(np.abs(np.diff(states, axis=0) - exec.durations[:, None] * flows), axis=1)
    start_ok = np.all((states[:-1] >= lo - tol) & (states[:-1] <= hi + tol), axis=1)
    end_ok = np.all((states[1:] >= lo - tol) & (states[1:] <= hi + tol), axis=1)
    jump_ok = np.ones(len(locs), dtype=bool)
    for i in range(len(locs) - 1):
        g = lha.guard.get((locs[i], locs[i + 1]))
        jump_ok[i] = g is not None and g.contains(states[i + 1], tol)
    bad = np.flatnonzero((disp_err > tol) | ~start_ok | ~end_ok | ~jump_ok)

    violations = []
    for i in bad.tolist():
        loc = locs[i]
        if disp_err[i] > tol:
            violations.append(Violation("flow", i, f"displacement off by {disp_err[i]:.3g} in location {loc}"))
        for which, ok, x in (("start", start_ok[i], states[i]), ("end", end_ok[i], states[i + 1])):
            if not ok:
                violations.append(Violation("invariant", i, f"{which} {x.tolist()} outside invariant of {loc}"))
        if not jump_ok[i]:
            nxt = locs[i + 1]
            if (loc, nxt) not in lha.guard:
                violations.append(Violation("edge", i, f"no transition ({loc}, {nxt})"))
            else:
                violations.append(Violation("guard", i, f"jump state {states[i + 1].tolist()} outside guard ({loc}, {nxt})"))
    return ValidationReport(ok=not violations, violations=violations)


def nearest_flow_labels(lha: Lha, s: TimeSeries) -> np.ndarray:
    """Label each piece of ``s`` with the location whose flow is closest to the piece slope."""
    locs = list(lha.locations)
    flows = np.array([lha.flow[loc] for loc in locs])
    sl = piece_slopes(s)
    d2 = ((sl[:, None, :] - flows[None, :, :]) ** 2).sum(axis=2)
    return np.array([locs[j] for j in np.argmin(d2, axis=1)], dtype=np.intp)


def best_execution(lha: Lha, s: TimeSeries, labels=None) -> tuple[Execution, float]:
    """Execution of ``lha`` closest to ``s`` for fixed flows.

    Pieces are labelled by nearest flow unless ``labels`` is given; the
    initial state and eps are then found by the single-series LP with all
    slope variables pinned to the model's flows.
    """
    if s.dim != lha.dim:
        raise ValueError(f"series dimension {s.dim} differs from model dimension {lha.dim}")
    if labels is None:
        labels = nearest_flow_labels(lha, s)
    locs = list(lha.locations)
    index = {loc: i for i, loc in enumerate(locs)}
    layout = VariableLayout(len(locs), s.dim, 1)
    P = intersect([build_flow_polyhedron(s, [index[int(x)] for x in labels], 0, layout)])
    fixed = {
        layout.slope_var(i, c): float(lha.flow[loc][c])
        for i, loc in enumerate(locs)
        for c in range(s.dim)
    }
    sol = minimize_epsilon(P, fixed=fixed)
    flows = np.zeros((max(locs) + 1, s.dim))
    for loc in locs:
        flows[loc] = lha.flow[loc]
    return induce_execution(s, labels, flows, sol.initial_states[0]), sol.epsilon


@dataclass
class SynthesisConfig:
    n_locations: int | None = None
    theta: float = 0.5
    k_max: int = 20
    rdp_tol: float | None = 0.01
    lp_tol: float = flowpoly.LP_TOL
    check_tol: float = CHECK_TOL
    merge_dwells: bool = False


def synthesize(series: Sequence[TimeSeries], config: SynthesisConfig | None = None, **kwargs) -> SynthesisResult:
    """Synthesize an LHA and the minimal eps for which it captures every series.

    Keyword arguments override fields of ``config``.
    """
    cfg = config or SynthesisConfig()
    if kwargs:
        cfg = SynthesisConfig(**{**cfg.__dict__, **kwargs})
    series = list(series)
    dim = check_uniform_dimension(series)
    timings = {}

    t = time.perf_counter()
    mapping = assign_locations(series, cfg.n_locations, theta=cfg.theta, k_max=cfg.k_max, rdp_tol=cfg.rdp_tol)
    timings["segmentation"] = time.perf_counter() - t

    t = time.perf_counter()
    layout = VariableLayout(mapping.n_locations, dim, len(series))
    polys = [build_flow_polyhedron(s, lab, j, layout) for j, (s, lab) in enumerate(zip(series, mapping.labels))]
    P = intersect(polys)
    timings["polyhedron"] = time.perf_counter() - t

    t = time.perf_counter()
    sol = minimize_epsilon(P, tol=cfg.lp_tol)
    timings["lp"] = time.perf_counter() - t

    t = time.perf_counter()
    executions = [
        induce_execution(s, lab, sol.slopes, x0, merge_dwells=cfg.merge_dwells)
        for s, lab, x0 in zip(series, mapping.labels, sol.initial_states)
    ]
    lha = build_lha(series, mapping, sol.slopes, sol.epsilon)
    timings["construction"] = time.perf_counter() - t

    t = time.perf_counter()
    for s, ex in zip(series, executions):
        cap = check_epsilon_capture(ex, s, sol.epsilon, cfg.check_tol)
        if not cap.ok:
            raise SelfCheckError(f"{s.id}: execution deviates {cap.max_deviation} > eps {sol.epsilon}")
        val = validate_execution(lha, ex, cfg.check_tol)
        if not val.ok:
            raise SelfCheckError(f"{s.id}: invalid execution: {val.violations[0].message}")
    timings["verification"] = time.perf_counter() - t
    timings["total"] = sum(timings.values())

    report = {
        "epsilon": sol.epsilon,
        "n_locations": mapping.n_locations,
        "unused_locations": mapping.unused_labels,
        "slopes": sol.slopes.tolist(),
        "initial_states": {s.id: x0.tolist() for s, x0 in zip(series, sol.initial_states)},
        "cost_table": [
            {"k": row.k, "cost": row.cost, "rel_improvement": row.rel_improvement}
            for row in mapping.cost_table
        ],
        "polyhedron_dimension": layout.size,
        "constraints_per_series": [P_s.num_constraints for P_s in polys],
        "constraint_count": P.num_constraints,
        "timings": timings,
    }
    log.info("synthesized %d locations, eps=%.6g in %.3fs", len(lha.locations), sol.epsilon, timings["total"])
    return SynthesisResult(lha, sol.epsilon, executions, mapping, sol, report)
