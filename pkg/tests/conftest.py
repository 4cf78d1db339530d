"""Shared fixtures and independent oracles for the test-suite."""
import math

import numpy as np
import pytest

from blightwave.model import figure1_params, table5_params
from blightwave.solver import Grid


def ishigami(x, a=7.0, b=0.1):
    x = np.atleast_2d(x)
    return np.sin(x[:, 0]) + a * np.sin(x[:, 1]) ** 2 + b * x[:, 2] ** 4 * np.sin(x[:, 0])


def ishigami_indices(a=7.0, b=0.1):
    """Closed-form first-order and total indices of the Ishigami function."""
    pi4, pi8 = math.pi ** 4, math.pi ** 8
    v1 = 0.5 * (1 + b * pi4 / 5) ** 2
    v2 = a ** 2 / 8
    v13 = b ** 2 * pi8 * (1 / 18 - 1 / 50)
    var = v1 + v2 + v13
    first = np.array([v1, v2, 0.0]) / var
    total = np.array([v1 + v13, v2, v13]) / var
    return first, total


@pytest.fixture
def params5():
    return figure1_params()


@pytest.fixture
def params3():
    return table5_params()


@pytest.fixture
def small_grid():
    return Grid(100.0, 200)


def kpp_trajectory(n_cells=10000, t_end=30.0, record_times=None, eps=10.0):
    """Pure epiphytic (Fisher-KPP) run: S = I = 0 and R = N, so B has the fixed
    carrying capacity ``eps``; D1 = 50, r = 0.5 give the KPP speed 10 m/day."""
    from blightwave.solver import FieldState, integrate

    params = table5_params(eps=eps, r=0.5, D1=50.0)
    grid = Grid(1000.0, n_cells)
    z = np.zeros(n_cells)
    b = z.copy()
    b[0] = 1e6
    state = FieldState(0.0, b, z, z, z, z + params.N)
    if record_times is None:
        record_times = np.linspace(10.0, 30.0, 41)
    return integrate(state, params, grid, t_end, dt=0.1, record_times=record_times)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """``report(number, title, passed, detail)`` records one acceptance verdict line."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def report(number, title, passed, detail=""):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {title}" + (
            f" ({detail})" if detail else "")
        lines.append(line)
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
