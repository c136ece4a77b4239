import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhasynth.flowpoly import (
    FlowPolyhedron,
    LinearConstraint,
    VariableLayout,
    build_flow_polyhedron,
    intersect,
    minimize_epsilon,
)
from lhasynth.timeseries import TimeSeries

from conftest import D1, D2, T1, T2, random_series

LABELS = [0, 0, 1, 1, 1, 0]


def solve(series, labels, n_locations):
    layout = VariableLayout(n_locations, series[0].dim, len(series))
    P = intersect([build_flow_polyhedron(s, lab, j, layout)
                   for j, (s, lab) in enumerate(zip(series, labels))])
    return P, minimize_epsilon(P)


def grid_oracle_one_location(times, values, lo=-1.0, hi=2.0, step=1e-3):
    """min over (x0, m) on a grid of max_k |x0 + m t_k - q_k|."""
    grid = np.arange(lo, hi + step / 2, step)
    best = np.inf
    for m in grid:
        r = values - m * times
        # for fixed m the best grid x0 is the grid point nearest the midrange
        mid = 0.5 * (r.max() + r.min())
        for x0 in grid[np.clip(np.searchsorted(grid, mid) + np.arange(-1, 2), 0, len(grid) - 1)]:
            best = min(best, np.abs(x0 - r).max())
    return best


# --- layout and construction ----------------------------------------------------


def test_layout_indices():
    L = VariableLayout(2, 1, 2)
    assert L.size == 5
    assert [L.name(i) for i in range(5)] == ["m[0,0]", "m[1,0]", "x0[0,0]", "x0[1,0]", "eps"]
    with pytest.raises(IndexError):
        L.slope_var(2, 0)


def test_running_example_rows():
    L = VariableLayout(2, 1, 2)
    P = build_flow_polyhedron(TimeSeries(T1, D1), LABELS, 0, L)
    assert P.num_constraints == 14
    dense = P.A.toarray()
    # 1.59 m1 + 0.73 m2 + x0 - eps <= 70.44 (fourth data point)
    np.testing.assert_allclose(dense[3], [1.59, 0.73, 1.0, 0.0, -1.0], atol=1e-12)
    assert P.b[3] == 70.44
    np.testing.assert_allclose(dense[10], [-1.59, -0.73, -1.0, 0.0, -1.0], atol=1e-12)
    assert P.b[10] == -70.44
    np.testing.assert_allclose(dense[0], [0, 0, 1, 0, -1])
    np.testing.assert_allclose(dense[6], [2.8, 2.2, 1, 0, -1], atol=1e-12)


def test_single_piece_count():
    L = VariableLayout(1, 1, 1)
    assert build_flow_polyhedron(TimeSeries([0, 1], [0, 1]), [0], 0, L).num_constraints == 4


def test_intersection_count_and_errors():
    L = VariableLayout(2, 1, 2)
    polys = [build_flow_polyhedron(TimeSeries(t, d), LABELS, j, L)
             for j, (t, d) in enumerate(((T1, D1), (T2, D2)))]
    P = intersect(polys)
    assert P.num_constraints == 29 and P.dimension == 5
    np.testing.assert_array_equal(P.A.toarray()[-1], [0, 0, 0, 0, -1])
    assert intersect(polys[:1]).num_constraints == 15
    with pytest.raises(ValueError, match="no polyhedra"):
        intersect([])


def test_build_rejects_bad_input():
    L = VariableLayout(2, 1, 1)
    s = TimeSeries([0, 1, 2], [0, 1, 0])
    with pytest.raises(ValueError):
        build_flow_polyhedron(s, [0], 0, L)
    with pytest.raises(ValueError):
        build_flow_polyhedron(s, [0, 2], 0, L)
    with pytest.raises(ValueError):
        build_flow_polyhedron(s, [0, 1], 1, L)


def test_constraint_objects_match_matrix():
    L = VariableLayout(2, 1, 1)
    P = build_flow_polyhedron(TimeSeries([0, 1, 3], [0, 2, 1]), [0, 1], 0, L)
    Q = FlowPolyhedron.from_constraints(L, P.constraints)
    np.testing.assert_array_equal(P.A.toarray(), Q.A.toarray())
    v = np.array([1.0, -0.5, 0.2, 0.3])
    assert P.constraints[2].evaluate(v) == pytest.approx((P.A @ v)[2])
    assert LinearConstraint(((0, 2.0),), 1.0).evaluate([3.0]) == 6.0


def test_dump_format():
    L = VariableLayout(1, 1, 1)
    text = build_flow_polyhedron(TimeSeries([0, 1], [0, 1]), [0], 0, L).dump()
    lines = text.splitlines()
    assert lines[0] == "minimize eps"
    assert lines[2] == "1.0*m[0,0] + 1.0*x0[0,0] + -1.0*eps <= 1.0"
    assert len(lines) == 5


def test_nonzeros_bounded_independently_of_length():
    rng = np.random.default_rng(0)
    L = VariableLayout(3, 2, 1)
    s = random_series(rng, 2, 500)
    P = build_flow_polyhedron(s, rng.integers(0, 3, 499), 0, L)
    assert np.diff(P.A.indptr).max() <= L.n_locations + 1 + 1


@settings(max_examples=50)
@given(st.integers(1, 5), st.integers(1, 4), st.integers(1, 4), st.integers(1, 30), st.integers(0, 999))
def test_structural_counts(lam, n, r, p, seed):
    rng = np.random.default_rng(seed)
    L = VariableLayout(lam, n, r)
    series = [random_series(rng, n, p + 1) for _ in range(r)]
    polys = [build_flow_polyhedron(s, rng.integers(0, lam, p), j, L) for j, s in enumerate(series)]
    assert all(P.num_constraints == 2 * n * (p + 1) for P in polys)
    P = intersect(polys)
    assert P.dimension == lam * n + r * n + 1
    assert P.num_constraints == r * 2 * n * (p + 1) + 1


# --- LP -------------------------------------------------------------------------


def test_running_example_optimum():
    series = [TimeSeries(T1, D1), TimeSeries(T2, D2)]
    P, sol = solve(series, [LABELS, LABELS], 2)
    assert sol.epsilon == pytest.approx(1.24, abs=0.05)
    np.testing.assert_allclose(sol.slopes.ravel(), [4.31, -4.27], atol=0.05)
    assert sol.initial_states[0, 0] == pytest.approx(67.90, abs=0.05)
    # with the optimal slopes the second initial state is pinned to a single value
    assert sol.initial_states[1, 0] == pytest.approx(67.5566, abs=1e-3)
    assert P.max_violation(sol.vector) <= 1e-7


def test_rounded_optimum_misses_second_series():
    # (4.31, -4.27, x0 = 67.63) misses series 2 by more than 1.24, so the
    # rounded second initial state cannot be matched within 1.24.
    m = np.array([4.31, -4.27])[LABELS]
    cum = np.concatenate([[0.0], np.cumsum(np.diff(T2) * m)])
    assert np.abs(67.63 + cum - np.array(D2)).max() > 1.27


def test_peak_one_location_matches_grid():
    s = TimeSeries([0, 1, 2], [0, 1, 0])
    _, sol = solve([s], [[0, 0]], 1)
    assert sol.epsilon == pytest.approx(0.5, abs=1e-7)
    assert sol.slopes[0, 0] == pytest.approx(0.0, abs=1e-6)
    assert sol.initial_states[0, 0] == pytest.approx(0.5, abs=1e-6)
    oracle = grid_oracle_one_location(s.times, s.points.ravel())
    assert abs(sol.epsilon - oracle) <= 1e-3


def test_peak_two_locations_exact():
    s = TimeSeries([0, 1, 2], [0, 1, 0])
    _, sol = solve([s], [[0, 1]], 2)
    assert sol.epsilon == pytest.approx(0.0, abs=1e-7)
    np.testing.assert_allclose(sol.slopes.ravel(), [1, -1], atol=1e-6)
    assert sol.initial_states[0, 0] == pytest.approx(0.0, abs=1e-6)


def test_fixed_slopes():
    s = TimeSeries([0, 1, 2], [0, 1, 0])
    L = VariableLayout(1, 1, 1)
    P = intersect([build_flow_polyhedron(s, [0, 0], 0, L)])
    sol = minimize_epsilon(P, fixed={0: 1.0})
    assert sol.slopes[0, 0] == 1.0
    assert sol.epsilon == pytest.approx(1.0, abs=1e-7)


def _random_problem(rng, lam, n, r, p):
    series = [random_series(rng, n, p + 1, value_range=(-5, 5)) for _ in range(r)]
    labels = [rng.integers(0, lam, p) for _ in range(r)]
    return series, labels


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_solution_feasible(seed):
    rng = np.random.default_rng(seed)
    series, labels = _random_problem(rng, 3, 2, 3, 8)
    P, sol = solve(series, labels, 3)
    assert P.max_violation(sol.vector) <= 1e-7
    assert sol.epsilon >= 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_removing_a_series_never_increases_eps(seed):
    rng = np.random.default_rng(seed)
    series, labels = _random_problem(rng, 2, 2, 3, 6)
    _, full = solve(series, labels, 2)
    _, fewer = solve(series[:-1], labels[:-1], 2)
    assert fewer.epsilon <= full.epsilon + 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_splitting_a_location_never_increases_eps(seed):
    rng = np.random.default_rng(seed)
    series, labels = _random_problem(rng, 2, 1, 2, 8)
    _, coarse = solve(series, labels, 2)
    # move a random subset of location 0 into a new location 2
    split = [np.where((lab == 0) & (rng.random(len(lab)) < 0.5), 2, lab) for lab in labels]
    _, fine = solve(series, split, 3)
    assert fine.epsilon <= coarse.epsilon + 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-100, 100))
def test_translation_invariance(seed, c):
    rng = np.random.default_rng(seed)
    series, labels = _random_problem(rng, 2, 2, 2, 6)
    shifted = [TimeSeries(s.times, s.points + c) for s in series]
    _, a = solve(series, labels, 2)
    _, b = solve(shifted, labels, 2)
    assert b.epsilon == pytest.approx(a.epsilon, abs=1e-6)
    # the translated optimizer is optimal for the shifted data
    P, _ = solve(shifted, labels, 2)
    v = a.vector.copy()
    v[4:8] += c
    assert P.max_violation(v) <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10))
def test_time_scaling(seed, alpha):
    rng = np.random.default_rng(seed)
    series, labels = _random_problem(rng, 2, 1, 2, 6)
    scaled = [TimeSeries(s.times * alpha, s.points) for s in series]
    _, a = solve(series, labels, 2)
    P, b = solve(scaled, labels, 2)
    assert b.epsilon == pytest.approx(a.epsilon, abs=1e-6)
    v = a.vector.copy()
    v[:2] /= alpha
    assert P.max_violation(v) <= 1e-6
