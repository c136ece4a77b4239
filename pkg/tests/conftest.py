import numpy as np
import pytest

from lhasynth.automaton import Box, DiscreteStructure, Lha
from lhasynth.timeseries import TimeSeries

# Two thermostat traces, rounded to two decimals.
T1 = [0.00, 0.76, 1.59, 2.32, 3.15, 3.79, 5.00]
D1 = [68.91, 72.41, 75.00, 70.44, 66.90, 65.00, 71.81]
T2 = [0.0, 0.75, 1.61, 2.33, 3.16, 3.76, 5.00]
D2 = [68.16, 71.85, 74.70, 70.22, 66.75, 65.00, 71.92]


@pytest.fixture
def thermo_pair():
    return [TimeSeries(T1, D1, id="s1"), TimeSeries(T2, D2, id="s2")]


@pytest.fixture
def thermo_csv(tmp_path):
    paths = []
    for name, t, d in (("s1", T1, D1), ("s2", T2, D2)):
        path = tmp_path / f"{name}.csv"
        path.write_text("t,x\n" + "".join(f"{a},{b}\n" for a, b in zip(t, d)))
        paths.append(path)
    return paths


def random_series(rng, n, npts, t_gap=(0.5, 1.0), value_range=(-1.0, 1.0), id="rand"):
    gaps = rng.uniform(*t_gap, size=npts - 1)
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    return TimeSeries(times, rng.uniform(*value_range, size=(npts, n)), id=id)


def rounded_thermo_lha():
    """Two-location thermostat model with bounds rounded to two decimals."""
    inv = Box([63.76], [76.24])
    return Lha(
        DiscreteStructure((0, 1), frozenset({(0, 0), (0, 1), (1, 1), (1, 0)})),
        {0: [4.31], 1: [-4.27]},
        {0: inv, 1: inv},
        {
            (0, 1): Box([73.46], [76.24]),
            (1, 0): Box([63.76], [66.24]),
            (0, 0): Box([70.61], [73.65]),
            (1, 1): Box([65.51], [71.68]),
        },
    )


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line, then assert."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
