"""Shared, session-scoped numerical fixtures.

Fronts and entire-solution runs are expensive, so each configuration is
computed once per test session and reused by the unit and acceptance tests.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from nlignite.entire import build_entire, default_forward_horizon, entire_window, prepare_pair
from nlignite.kernel import example_2_1, kernel_shift, top_hat
from nlignite.reaction import IgnitionNonlinearity, derive_constants
from nlignite.spectral import find_roots
from nlignite.waves import Orientation, solve_wave

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def spec():
    return example_2_1()


@pytest.fixture(scope="session")
def nl():
    return IgnitionNonlinearity.calibrated(rho=0.25, q=3, fprime_max=0.5)


@pytest.fixture(scope="session")
def constants(nl):
    return derive_constants(nl)


class FrontCache:
    """Newton fronts, roots and front pairs keyed by (kernel label, grid)."""

    def __init__(self, nl):
        self.nl = nl
        self._store: dict = {}
        self.timings: dict = {}

    def waves(self, label, spec, window=(-60.0, 60.0), h=0.05):
        key = ("waves", label, tuple(window), h)
        if key not in self._store:
            t = time.perf_counter()
            w = solve_wave(spec, self.nl, Orientation.INCREASING, "newton", window=window, h=h)
            wh = solve_wave(spec, self.nl, Orientation.DECREASING, "newton", window=window, h=h)
            self.timings[key] = time.perf_counter() - t
            self._store[key] = (w, wh)
        return self._store[key]

    def roots(self, label, spec, **grid):
        key = ("roots", label, tuple(sorted(grid.items())))
        if key not in self._store:
            w, wh = self.waves(label, spec, **grid)
            self._store[key] = find_roots(spec, w.speed, wh.speed, self.nl.fprime_at_1)
        return self._store[key]

    def pair(self, label, spec, **grid):
        key = ("pair", label, tuple(sorted(grid.items())))
        if key not in self._store:
            w, wh = self.waves(label, spec, **grid)
            self._store[key] = prepare_pair(w, wh, self.roots(label, spec, **grid), self.nl)
        return self._store[key]


@pytest.fixture(scope="session")
def fronts(nl):
    return FrontCache(nl)


@pytest.fixture(scope="session")
def default_waves(fronts, spec):
    return fronts.waves("example", spec)


@pytest.fixture(scope="session")
def default_roots(fronts, spec):
    return fronts.roots("example", spec)


@pytest.fixture(scope="session")
def default_pair(fronts, spec):
    return fronts.pair("example", spec)


@pytest.fixture(scope="session")
def default_params(default_pair):
    return default_pair.params(2.0, -1.0)


@pytest.fixture(scope="session")
def tracking_waves(spec, nl):
    t = time.perf_counter()
    tr = solve_wave(spec, nl, Orientation.INCREASING, "tracking", window=(-60.0, 60.0), h=0.05, dt=0.1)
    trh = solve_wave(spec, nl, Orientation.DECREASING, "tracking", window=(-60.0, 60.0), h=0.05, dt=0.1)
    return tr, trh, time.perf_counter() - t


@pytest.fixture(scope="session")
def shifted_specs(spec):
    return {"both_positive": kernel_shift(spec, -1.0), "both_negative": kernel_shift(spec, 1.0)}


@pytest.fixture(scope="session")
def tophat_waves(fronts):
    return fronts.waves("tophat", top_hat(0.2), window=(-10.0, 10.0), h=0.01)


class RunCache:
    """Entire-solution runs at theta = omega and omega + 1 on a shared window."""

    def __init__(self):
        self._store: dict = {}
        self.timings: dict = {}

    def runs(self, label, pair, n_list=(5, 10, 20)):
        if label not in self._store:
            t = time.perf_counter()
            params = pair.params(2.0, -1.0)
            thetas = [params.omega, params.omega + 1.0]
            t_fwd = max(default_forward_horizon(pair, th) for th in thetas)
            window = entire_window(pair, thetas, max(n_list), t_fwd)
            runs = tuple(build_entire(pair, params, th, n_list, t_fwd, window=window, jobs=3)
                         for th in thetas)
            self.timings[label] = time.perf_counter() - t
            self._store[label] = runs
        return self._store[label]


@pytest.fixture(scope="session")
def entire_runs():
    return RunCache()


@pytest.fixture(scope="session")
def default_runs(entire_runs, default_pair):
    return entire_runs.runs("example", default_pair)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
