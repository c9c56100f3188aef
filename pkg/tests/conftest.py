import numpy as np
import pytest

from snfilter import EnergyGrid, IntensityStats, ScanRecord


def brute_force_recursion(intensities, currents, mean, dispersion, guess=0.0):
    """Straight-loop reference for the per-bin recursion, plain floats only."""
    n_bins = len(currents[0])
    theta = [float(guess)] * n_bins if np.ndim(guess) == 0 else [float(g) for g in guess]
    for n, (intensity, row) in enumerate(zip(intensities, currents), start=1):
        delta = float(intensity) - mean
        for b in range(n_bins):
            residual = float(intensity) * theta[b] - float(row[b])
            theta[b] = theta[b] - delta / (dispersion * n) * residual
    return np.array(theta)


def make_scans(intensities, theta, noise=0.0):
    theta = np.asarray(theta, dtype=float)
    return [ScanRecord(i, i * theta + noise) for i in intensities]


@pytest.fixture
def grid():
    return EnergyGrid()


@pytest.fixture
def unit_stats():
    return IntensityStats.fixed(1.0, 0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


_ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the acceptance summary."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
