"""Phase 2 geometry: flow polyhedra, their intersection, and the epsilon LP.

Variables are laid out as ``[slopes (lambda*n) | initial states (r*n) | eps]``.
Constraints are stored as a sparse ``A v <= b`` system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import kernels
from .timeseries import TimeSeries

LP_TOL = 1e-7


class LPError(RuntimeError):
    """The LP backend failed or returned an impossible status."""


@dataclass(frozen=True)
class VariableLayout:
    n_locations: int
    dim: int
    n_series: int

    def __post_init__(self):
        if self.n_locations < 1 or self.dim < 1 or self.n_series < 1:
            raise ValueError("layout sizes must be positive")

    @property
    def size(self) -> int:
        return self.n_locations * self.dim + self.n_series * self.dim + 1

    @property
    def eps_var(self) -> int:
        return self.size - 1

    def slope_var(self, location: int, coord: int) -> int:
        if not (0 <= location < self.n_locations and 0 <= coord < self.dim):
            raise IndexError("slope variable out of range")
        return location * self.dim + coord

    def init_var(self, series: int, coord: int) -> int:
        if not (0 <= series < self.n_series and 0 <= coord < self.dim):
            raise IndexError("initial-state variable out of range")
        return self.n_locations * self.dim + series * self.dim + coord

    def name(self, index: int) -> str:
        n = self.dim
        if index == self.eps_var:
            return "eps"
        if index < self.n_locations * n:
            return f"m[{index // n},{index % n}]"
        if index < self.eps_var:
            j = index - self.n_locations * n
            return f"x0[{j // n},{j % n}]"
        raise IndexError(index)


@dataclass(frozen=True)
class LinearConstraint:
    """``sum(c * v[i] for i, c in coeffs) <= rhs``."""

    coeffs: tuple
    rhs: float

    def evaluate(self, point: np.ndarray) -> float:
        return sum(c * point[i] for i, c in self.coeffs)


class FlowPolyhedron:
    """Constraint system ``A v <= b`` over a :class:`VariableLayout`."""

    def __init__(self, layout: VariableLayout, A, b):
        A = sp.csr_matrix(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64).reshape(-1)
        if A.shape != (len(b), layout.size):
            raise ValueError(f"matrix shape {A.shape} does not match {len(b)} x {layout.size}")
        if not (np.all(np.isfinite(A.data)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite constraint data")
        b.setflags(write=False)
        self.layout = layout
        self.A = A
        self.b = b

    @classmethod
    def from_constraints(cls, layout: VariableLayout, constraints: Sequence[LinearConstraint]):
        rows, cols, vals = [], [], []
        for r, con in enumerate(constraints):
            for i, c in con.coeffs:
                rows.append(r)
                cols.append(i)
                vals.append(c)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(len(constraints), layout.size))
        return cls(layout, A, [con.rhs for con in constraints])

    @property
    def dimension(self) -> int:
        return self.layout.size

    @property
    def num_constraints(self) -> int:
        return len(self.b)

    def __len__(self) -> int:
        return self.num_constraints

    @property
    def constraints(self) -> list[LinearConstraint]:
        A = self.A
        out = []
        for r in range(A.shape[0]):
            lo, hi = A.indptr[r], A.indptr[r + 1]
            coeffs = tuple(zip(A.indices[lo:hi].tolist(), A.data[lo:hi].tolist()))
            out.append(LinearConstraint(coeffs, float(self.b[r])))
        return out

    def max_violation(self, point) -> float:
        v = np.asarray(point, dtype=np.float64)
        if self.num_constraints == 0:
            return 0.0
        return float(max(0.0, np.max(self.A @ v - self.b)))

    def dump(self) -> str:
        """Plain-text row format ``c1*v1 + c2*v2 ... <= rhs``."""
        lines = ["minimize eps"]
        for con in self.constraints:
            terms = " + ".join(f"{c!r}*{self.layout.name(i)}" for i, c in con.coeffs)
            lines.append(f"{terms or '0'} <= {con.rhs!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class SolutionPoint:
    slopes: np.ndarray
    initial_states: np.ndarray
    epsilon: float
    vector: np.ndarray


def build_flow_polyhedron(
    s: TimeSeries, labels, series_index: int, layout: VariableLayout
) -> FlowPolyhedron:
    """Two constraints per data point and coordinate keep the symbolic state
    ``x_k = x_0 + sum_j (t_j - t_{j-1}) m_{label(j)}`` within eps of ``q_k``.

    Rows ``0 .. n(p+1)-1`` are the upper bounds (point-major), the remaining
    rows the mirrored lower bounds.
    """
    labels = np.asarray(labels, dtype=np.intp)
    n, lam = layout.dim, layout.n_locations
    if s.dim != n:
        raise ValueError(f"{s.id}: dimension {s.dim} does not match layout dimension {n}")
    if not 0 <= series_index < layout.n_series:
        raise ValueError(f"series index {series_index} outside layout with {layout.n_series} series")
    if len(labels) != s.num_pieces:
        raise ValueError(f"{s.id}: {len(labels)} labels for {s.num_pieces} pieces")
    if labels.size and (labels.min() < 0 or labels.max() >= lam):
        raise ValueError(f"{s.id}: label outside 0..{lam - 1}")

    cum = kernels.cumulative_durations(np.diff(s.times), labels, lam)  # (p+1, lam)
    npts = len(s.times)
    k_idx, loc_idx = np.nonzero(cum)
    coef = cum[k_idx, loc_idx]

    rows, cols, vals = [], [], []
    half = npts * n
    for c in range(n):
        base = np.arange(npts) * n + c  # upper-bound row of (k, c)
        rows += [base[k_idx], base, base]
        cols += [
            loc_idx * n + c,
            np.full(npts, layout.init_var(series_index, c)),
            np.full(npts, layout.eps_var),
        ]
        vals += [coef, np.ones(npts), -np.ones(npts)]
    r = np.concatenate(rows)
    cidx = np.concatenate(cols)
    v = np.concatenate(vals)
    is_eps = cidx == layout.eps_var
    lower_vals = np.where(is_eps, v, -v)
    A = sp.csr_matrix(
        (np.concatenate([v, lower_vals]), (np.concatenate([r, r + half]), np.concatenate([cidx, cidx]))),
        shape=(2 * half, layout.size),
    )
    q = s.points.reshape(-1)
    return FlowPolyhedron(layout, A, np.concatenate([q, -q]))


def intersect(polys: Sequence[FlowPolyhedron]) -> FlowPolyhedron:
    """Stack all constraints and add ``eps >= 0`` once."""
    if not polys:
        raise ValueError("no polyhedra")
    layout = polys[0].layout
    for P in polys[1:]:
        if P.layout != layout:
            raise ValueError("polyhedra have different layouts")
    nonneg = sp.csr_matrix(([-1.0], ([0], [layout.eps_var])), shape=(1, layout.size))
    A = sp.vstack([P.A for P in polys] + [nonneg], format="csr")
    b = np.concatenate([P.b for P in polys] + [np.zeros(1)])
    return FlowPolyhedron(layout, A, b)


def _solve_lp(c, A, b, bounds, tol):
    """Minimize ``c @ v`` subject to ``A v <= b`` and variable bounds."""
    return linprog(
        c,
        A_ub=A,
        b_ub=b,
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol},
    )


def minimize_epsilon(
    P: FlowPolyhedron, fixed: Mapping[int, float] | None = None, tol: float = LP_TOL
) -> SolutionPoint:
    """Point of ``P`` with minimal eps.

    ``fixed`` pins variables (index -> value), e.g. the slopes when checking
    a given model. After solving, eps is tightened to the smallest value the
    returned slopes and initial states need, so the point satisfies every
    eps-bearing row exactly up to rounding.
    """
    layout = P.layout
    if P.num_constraints == 0:
        raise ValueError("empty constraint system")
    c = np.zeros(layout.size)
    c[layout.eps_var] = 1.0
    bounds = [(None, None)] * layout.size
    for i, val in (fixed or {}).items():
        bounds[i] = (float(val), float(val))
    res = _solve_lp(c, P.A, P.b, bounds, tol)
    if res.status == 2:
        raise LPError("LP reported infeasible; flow polyhedra are always feasible (internal error)")
    if res.status != 0 or res.x is None:
        raise LPError(f"LP solver failed: {res.message}")

    v = np.array(res.x, dtype=np.float64)
    col = P.A[:, layout.eps_var].toarray().ravel()
    v_no_eps = v.copy()
    v_no_eps[layout.eps_var] = 0.0
    slack = P.A @ v_no_eps - P.b
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(col < 0, slack / -col, -np.inf)
    eps = float(max(0.0, np.max(need)))
    if eps > v[layout.eps_var] + 1e3 * tol * max(1.0, abs(v[layout.eps_var])):
        raise LPError(f"LP solution violates constraints (eps {v[layout.eps_var]} vs {eps})")
    v[layout.eps_var] = eps

    lam, n, r = layout.n_locations, layout.dim, layout.n_series
    slopes = v[: lam * n].reshape(lam, n)
    x0 = v[lam * n: lam * n + r * n].reshape(r, n)
    return SolutionPoint(slopes=slopes, initial_states=x0, epsilon=eps, vector=v)
