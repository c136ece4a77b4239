"""Acceptance criteria, one test per criterion, each at its stated tolerance."""

import time

import numba
import numpy as np
import pytest

from lhasynth.automaton import check_epsilon_capture, synthesize, validate_execution
from lhasynth.datagen import cyclic_2d, generate, thermostat_family
from lhasynth.flowpoly import VariableLayout, build_flow_polyhedron, intersect, minimize_epsilon
from lhasynth.segmentation import choose_num_locations
from lhasynth.timeseries import TimeSeries, piece_slopes

from conftest import D1, D2, T1, T2

GRID_STEP = 1e-3


def min_eps(series, labels, n_locations):
    layout = VariableLayout(n_locations, series[0].dim, len(series))
    P = intersect([build_flow_polyhedron(s, lab, j, layout)
                   for j, (s, lab) in enumerate(zip(series, labels))])
    return minimize_epsilon(P).epsilon


@numba.njit(cache=True)
def _grid_min_fixed_first(cum, q, lo, step, count, m0):
    npts, lam = cum.shape
    best = np.inf
    m = np.zeros(lam)
    m[0] = m0
    total = count ** (lam - 1)
    for flat in range(total):
        rest = flat
        for l in range(1, lam):
            m[l] = lo + (rest % count) * step
            rest //= count
        rmin, rmax = np.inf, -np.inf
        for k in range(npts):
            r = q[k]
            for l in range(lam):
                r -= cum[k, l] * m[l]
            rmin = min(rmin, r)
            rmax = max(rmax, r)
        # for fixed slopes the best grid x0 is one of the two around the midrange
        i0 = np.floor((0.5 * (rmin + rmax) - lo) / step)
        for i in (i0, i0 + 1):
            i = min(max(i, 0.0), count - 1.0)
            x0 = lo + i * step
            best = min(best, max(rmax - x0, x0 - rmin))
    return best


@numba.njit(cache=True)
def _grid_min_coordinate(cum, q, lo, step, count):
    """Smallest max-deviation over the slope grid for one coordinate.

    ``cum[k, l]`` is the time spent in location ``l`` before point ``k``.
    """
    best = np.inf
    for i in range(count):
        best = min(best, _grid_min_fixed_first(cum, q, lo, step, count, lo + i * step))
    return best


def grid_search_eps(s, labels, lam, lo=-5.0, hi=5.0, step=GRID_STEP):
    """Grid oracle over slopes and x0 in [lo, hi]; coordinates decouple."""
    count = int(round((hi - lo) / step)) + 1
    cum = np.zeros((len(s.times), lam))
    for k in range(1, len(s.times)):
        cum[k] = cum[k - 1]
        cum[k, labels[k - 1]] += s.times[k] - s.times[k - 1]
    return max(_grid_min_coordinate(cum, s.points[:, c].copy(), lo, step, count) for c in range(s.dim))


# --- 1 ---------------------------------------------------------------------------------


def test_criterion_1_running_example(criterion):
    start = time.perf_counter()
    series = [TimeSeries(T1, D1, id="s1"), TimeSeries(T2, D2, id="s2")]
    res = synthesize(series, n_locations=2)
    elapsed = time.perf_counter() - start
    lha = res.lha
    up = max(lha.locations, key=lambda loc: lha.flow[loc][0])
    down = min(lha.locations, key=lambda loc: lha.flow[loc][0])
    checks = [
        1.19 <= res.epsilon <= 1.29,
        abs(lha.flow[up][0] - 4.31) <= 0.05,
        abs(lha.flow[down][0] + 4.27) <= 0.05,
        all(abs(lha.invariant[loc].lo[0] - 63.76) <= 0.05 and abs(lha.invariant[loc].hi[0] - 76.24) <= 0.05
            for loc in lha.locations),
        abs(lha.guard[up, down].lo[0] - 73.46) <= 0.05 and abs(lha.guard[up, down].hi[0] - 76.24) <= 0.05,
        abs(lha.guard[down, up].lo[0] - 63.76) <= 0.05 and abs(lha.guard[down, up].hi[0] - 66.24) <= 0.05,
        elapsed < 1.0,
    ]
    criterion(1, all(checks),
              f"eps={res.epsilon:.4f} flows=({lha.flow[up][0]:.4f}, {lha.flow[down][0]:.4f}) "
              f"inv=[{lha.invariant[up].lo[0]:.3f}, {lha.invariant[up].hi[0]:.3f}] "
              f"guards=[{lha.guard[up, down].lo[0]:.3f}, {lha.guard[up, down].hi[0]:.3f}] "
              f"[{lha.guard[down, up].lo[0]:.3f}, {lha.guard[down, up].hi[0]:.3f}] time={elapsed:.3f}s")


# --- 2 ---------------------------------------------------------------------------------


def test_criterion_2_clustering_table(criterion):
    slopes = np.concatenate([piece_slopes(TimeSeries(t, d)) for t, d in ((T1, D1), (T2, D2))])
    k, table = choose_num_locations(slopes, theta=0.5)
    res = synthesize([TimeSeries(T1, D1), TimeSeries(T2, D2)], n_locations=2)
    centers = sorted(res.mapping.centers.ravel())
    ok = (abs(table[0].cost - 259.76) <= 0.5 and k == 2
          and abs(centers[1] - 4.53) <= 0.05 and abs(centers[0] + 4.46) <= 0.05)
    criterion(2, ok, f"k=1 cost={table[0].cost:.2f} chosen k={k} centers=({centers[1]:.3f}, {centers[0]:.3f}) "
                     f"rel=" + ", ".join(f"{r.rel_improvement:.3f}" for r in table[1:]))


# --- 3 ---------------------------------------------------------------------------------


def test_criterion_3_more_locations(criterion):
    series = [TimeSeries(T1, D1), TimeSeries(T2, D2)]
    eps = {lam: synthesize(series, n_locations=lam).epsilon for lam in (2, 4, 6)}
    ok = eps[4] <= 0.45 and eps[6] <= 0.20 and eps[4] < eps[2] and eps[6] < eps[2]
    criterion(3, ok, f"eps(2)={eps[2]:.4f} eps(4)={eps[4]:.4f} eps(6)={eps[6]:.4f}")


# --- 4 ---------------------------------------------------------------------------------


def test_criterion_4_soundness_suite(criterion):
    shapes = [(n, r, p) for n in (1, 2, 3) for r in (1, 5) for p in (10, 50)]
    start = time.perf_counter()
    failures = []
    for seed in range(100):
        n, r, p = shapes[seed % len(shapes)]
        series = generate(thermostat_family(n), r, p, 40.0, seed=seed)
        res = synthesize(series)
        for s, ex in zip(series, res.executions):
            if not check_epsilon_capture(ex, s, res.epsilon, 1e-6).ok:
                failures.append((seed, s.id, "capture"))
            if not validate_execution(res.lha, ex, 1e-6).ok:
                failures.append((seed, s.id, "validity"))
    elapsed = time.perf_counter() - start
    criterion(4, not failures and elapsed < 60,
              f"100 instances, {len(failures)} failures, time={elapsed:.1f}s")


# --- 5 ---------------------------------------------------------------------------------


def test_criterion_5_oracle_optimality(criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    bad = []
    for trial in range(50):
        n = int(rng.integers(1, 3))
        pieces = int(rng.integers(1, 4))
        lam = int(rng.integers(1, 3))
        times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.5, 0.65, pieces))])
        s = TimeSeries(times, rng.uniform(-1, 1, size=(pieces + 1, n)))
        labels = rng.integers(0, lam, pieces)
        lp = min_eps([s], [labels], lam)
        grid = grid_search_eps(s, labels, lam)
        gap = abs(lp - grid)
        worst = max(worst, gap)
        if gap > GRID_STEP:
            bad.append((trial, lp, grid))
    criterion(5, not bad, f"50 instances, max |eps_LP - eps_grid| = {worst:.2e} (bound {GRID_STEP}), "
                          f"{len(bad)} over bound")


# --- 6 ---------------------------------------------------------------------------------


def test_criterion_6_structural_laws(criterion):
    rng = np.random.default_rng(6)
    bad = 0
    for _ in range(40):
        lam, n, r = (int(x) for x in rng.integers(1, 6, 3))
        npts = rng.integers(2, 40, r)
        layout = VariableLayout(lam, n, r)
        polys = []
        for j in range(r):
            times = np.cumsum(rng.uniform(0.1, 1, npts[j]))
            s = TimeSeries(times, rng.normal(size=(npts[j], n)))
            P = build_flow_polyhedron(s, rng.integers(0, lam, npts[j] - 1), j, layout)
            bad += P.num_constraints != 2 * n * npts[j]
            polys.append(P)
        Q = intersect(polys)
        bad += Q.dimension != lam * n + r * n + 1
        bad += Q.num_constraints != sum(2 * n * k for k in npts) + 1
    criterion(6, bad == 0, f"40 random shapes, {bad} mismatches")


# --- 7 ---------------------------------------------------------------------------------


def test_criterion_7_monotonicity(criterion):
    rng = np.random.default_rng(7)
    worst = -np.inf
    for _ in range(20):
        lam, n, r = 3, int(rng.integers(1, 3)), int(rng.integers(2, 5))
        series = [TimeSeries(np.cumsum(rng.uniform(0.2, 1, 12)), rng.uniform(-3, 3, size=(12, n)))
                  for _ in range(r)]
        labels = [rng.integers(0, lam, 11) for _ in range(r)]
        full = min_eps(series, labels, lam)
        drop = int(rng.integers(r))
        fewer = min_eps(series[:drop] + series[drop + 1:], labels[:drop] + labels[drop + 1:], lam)
        cls = int(rng.integers(lam))
        split = [np.where((lab == cls) & (rng.random(len(lab)) < 0.5), lam, lab) for lab in labels]
        finer = min_eps(series, split, lam + 1)
        worst = max(worst, fewer - full, finer - full)
    criterion(7, worst <= 1e-6, f"20 trials, largest increase {worst:.2e}")


# --- 8 ---------------------------------------------------------------------------------


def test_criterion_8_desk_scale(criterion):
    series = generate(thermostat_family(3), 20, 100, 40.0, seed=8)
    start = time.perf_counter()
    res = synthesize(series, n_locations=10)
    elapsed = time.perf_counter() - start
    t = res.report["timings"]
    share = t["lp"] / t["total"]
    criterion(8, elapsed < 300 and share >= 0.5,
              f"n=3 r=20 p=100 lambda=10: {elapsed:.2f}s, LP share {share:.0%}, "
              f"{res.report['constraint_count']} constraints, eps={res.epsilon:.4f}")


@pytest.mark.slow
def test_full_scale_benchmark_informational():
    series = generate(thermostat_family(7), 60, 200, 40.0, seed=7)
    res = synthesize(series, n_locations=15)
    t = res.report["timings"]
    print(f"n=7 r=60 p=200 lambda=15: total {t['total']:.1f}s, LP share {t['lp'] / t['total']:.0%}")


# --- 9 ---------------------------------------------------------------------------------


def test_criterion_9_cyclic_substitute(criterion):
    start = time.perf_counter()
    series = generate(cyclic_2d(), 20, 100, 40.0, seed=9)
    res = synthesize(series)
    ok = all(check_epsilon_capture(ex, s, res.epsilon).ok and validate_execution(res.lha, ex).ok
             for s, ex in zip(series, res.executions))
    elapsed = time.perf_counter() - start
    criterion(9, ok and elapsed < 60,
              f"20 series, lambda={res.report['n_locations']}, eps={res.epsilon:.4f}, time={elapsed:.2f}s")
