"""Randomized-perturbation estimator for linear measurements with biased noise.

Each scan gives, per energy bin, ``j_n = I_n * theta_n + N_n`` where the
excitation intensity ``I_n`` is drawn at random around a known mean and
``N_n`` is a bounded systematic contribution that does not depend on the
draw. The recursion

    theta_n = theta_{n-1} - (delta_n / (sigma2 * n)) * (I_n * theta_{n-1} - j_n)

with ``delta_n = I_n - mean_intensity`` weights every residual by the
zero-mean perturbation, so the systematic term averages out even though its
own mean is not zero. Bins do not interact.

Two baselines share the same inputs: a randomized least-squares ratio and
the plain scan average, which keeps the noise bias.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DegenerateDispersionError, EstimatorError


class StatsPolicy(str, Enum):
    FIXED_KNOWN = "fixed"
    RUNNING_EMPIRICAL = "running"


@dataclass(frozen=True)
class IntensityStats:
    """Mean and dispersion of the excitation intensity.

    Under ``FIXED_KNOWN`` both values are given up front and never change.
    Under ``RUNNING_EMPIRICAL`` they are streaming estimates (Welford, with
    the population variance convention) fed one intensity per step;
    `dispersion` is ``None`` until two samples have been seen.
    """

    mean_intensity: float
    dispersion: float | None
    policy: StatsPolicy = StatsPolicy.FIXED_KNOWN
    count: int = 0
    m2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "policy", StatsPolicy(self.policy))
        if self.policy is StatsPolicy.FIXED_KNOWN:
            if not (math.isfinite(self.mean_intensity) and self.mean_intensity > 0):
                raise EstimatorError(f"mean_intensity must be positive, got {self.mean_intensity!r}")
            if self.dispersion is None or not math.isfinite(self.dispersion):
                raise EstimatorError(f"dispersion must be a finite number, got {self.dispersion!r}")
            if self.dispersion <= 0:
                raise DegenerateDispersionError(f"dispersion must be positive, got {self.dispersion!r}")
        else:
            if self.count < 0:
                raise EstimatorError("count must be non-negative")
            if self.count > 0 and not self.mean_intensity > 0:
                raise EstimatorError(f"mean_intensity must be positive, got {self.mean_intensity!r}")

    @classmethod
    def fixed(cls, mean_intensity: float, dispersion: float) -> IntensityStats:
        return cls(float(mean_intensity), float(dispersion), StatsPolicy.FIXED_KNOWN)

    @classmethod
    def running(cls) -> IntensityStats:
        """Empty streaming statistics."""
        return cls(0.0, None, StatsPolicy.RUNNING_EMPIRICAL, 0, 0.0)

    @classmethod
    def from_samples(cls, intensities) -> IntensityStats:
        stats = cls.running()
        for value in np.asarray(intensities, dtype=np.float64).ravel():
            stats = update_running_stats(stats, value)
        return stats

    @property
    def ready(self) -> bool:
        """True when the dispersion is usable as a gain normalizer."""
        return self.dispersion is not None and self.dispersion > 0

    def frozen(self) -> IntensityStats:
        """Fixed-known copy of the current values."""
        if not self.ready:
            raise DegenerateDispersionError("intensity dispersion is not positive yet")
        return IntensityStats.fixed(self.mean_intensity, self.dispersion)


def update_running_stats(stats: IntensityStats, intensity: float) -> IntensityStats:
    """Fold one intensity sample into streaming statistics."""
    if stats.policy is not StatsPolicy.RUNNING_EMPIRICAL:
        raise EstimatorError("only running statistics can be updated")
    x = float(intensity)
    if not (math.isfinite(x) and x > 0):
        raise EstimatorError(f"intensity must be positive and finite, got {intensity!r}")
    count = stats.count + 1
    delta = x - stats.mean_intensity
    mean = stats.mean_intensity + delta / count
    m2 = stats.m2 + delta * (x - mean)
    dispersion = m2 / count if count >= 2 else None
    return IntensityStats(mean, dispersion, StatsPolicy.RUNNING_EMPIRICAL, count, m2)


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScanRecord:
    """One scan: a scalar excitation intensity and the per-bin photocurrent."""

    intensity: float
    photocurrent: np.ndarray

    def __post_init__(self):
        intensity = float(self.intensity)
        if not (math.isfinite(intensity) and intensity > 0):
            raise EstimatorError(f"scan intensity must be positive and finite, got {self.intensity!r}")
        current = _readonly(self.photocurrent)
        if current.ndim != 1 or current.size == 0:
            raise EstimatorError("photocurrent must be a non-empty 1-D vector")
        if not np.all(np.isfinite(current)):
            raise EstimatorError("photocurrent contains non-finite values")
        if np.any(current < 0):
            raise EstimatorError("photocurrent must be non-negative")
        object.__setattr__(self, "intensity", intensity)
        object.__setattr__(self, "photocurrent", current)

    def __len__(self):
        return self.photocurrent.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ScanRecord):
            return NotImplemented
        return self.intensity == other.intensity and np.array_equal(self.photocurrent, other.photocurrent)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class EstimatorState:
    theta_hat: np.ndarray
    iteration: int
    stats: IntensityStats

    def __post_init__(self):
        object.__setattr__(self, "theta_hat", _readonly(self.theta_hat))
        if self.iteration < 0:
            raise EstimatorError("iteration must be non-negative")

    @property
    def grid_len(self) -> int:
        return self.theta_hat.shape[0]


@dataclass(frozen=True, eq=False)
class ConvergenceTrace:
    """Estimate history at a few control bins, one row per iteration."""

    control_indices: tuple[int, ...]
    values: np.ndarray
    start_iteration: int = 0
    energies: np.ndarray | None = None

    def __post_init__(self):
        values = _readonly(self.values)
        if values.ndim != 2 or values.shape[1] != len(self.control_indices):
            raise EstimatorError("trace values must have one column per control point")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "control_indices", tuple(int(i) for i in self.control_indices))
        if self.energies is not None:
            object.__setattr__(self, "energies", _readonly(self.energies))

    @property
    def n_iterations(self) -> int:
        return self.values.shape[0]

    @property
    def iterations(self) -> np.ndarray:
        return np.arange(self.start_iteration + 1, self.start_iteration + self.n_iterations + 1)

    def series(self, k: int) -> list[tuple[int, float]]:
        """(iteration, estimate) pairs for control point `k`."""
        return [(int(n), float(v)) for n, v in zip(self.iterations, self.values[:, k])]


@dataclass(frozen=True)
class EstimationConfig:
    stats: IntensityStats
    initial_guess: float | Sequence[float] = 0.0
    control_indices: tuple[int, ...] = field(default_factory=tuple)


def init_state(grid_len: int, stats: IntensityStats, initial_guess=0.0) -> EstimatorState:
    """Fresh state at iteration 0. The default guess is all zeros."""
    if isinstance(grid_len, bool) or int(grid_len) != grid_len or grid_len < 1:
        raise EstimatorError(f"grid_len must be a positive integer, got {grid_len!r}")
    guess = np.asarray(initial_guess, dtype=np.float64)
    if guess.ndim == 0:
        theta = np.full(int(grid_len), float(guess))
    elif guess.ndim == 1 and guess.shape[0] == grid_len:
        theta = guess
    else:
        raise EstimatorError(f"initial guess has length {guess.size}, expected {grid_len}")
    if not np.all(np.isfinite(theta)):
        raise EstimatorError("initial guess contains non-finite values")
    return EstimatorState(theta, 0, stats)


def stack_scans(scans: Sequence[ScanRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Intensities ``(n,)`` and photocurrents ``(n, bins)`` of a scan sequence."""
    scans = list(scans)
    if not scans:
        raise EstimatorError("scan sequence is empty")
    n_bins = len(scans[0])
    for k, scan in enumerate(scans):
        if len(scan) != n_bins:
            raise EstimatorError(f"scan {k + 1} has {len(scan)} bins, expected {n_bins}")
    intensities = np.array([s.intensity for s in scans], dtype=np.float64)
    currents = np.vstack([s.photocurrent for s in scans])
    return intensities, currents


def _gain_schedule(stats: IntensityStats, intensities: np.ndarray):
    """Per-step mean and dispersion, plus the statistics after the last step."""
    n = intensities.shape[0]
    if stats.policy is StatsPolicy.FIXED_KNOWN:
        return np.full(n, stats.mean_intensity), np.full(n, stats.dispersion), stats
    means = np.empty(n)
    dispersions = np.empty(n)
    for k, value in enumerate(intensities):
        stats = update_running_stats(stats, value)
        if not stats.ready:
            raise DegenerateDispersionError(
                f"running dispersion is not positive at step {k + 1}; prime the statistics first"
            )
        means[k] = stats.mean_intensity
        dispersions[k] = stats.dispersion
    return means, dispersions, stats


def _fold(state: EstimatorState, intensities, currents, control_indices=()):
    if currents.shape[1] != state.grid_len:
        raise EstimatorError(f"scan has {currents.shape[1]} bins, state has {state.grid_len}")
    if not np.all(np.isfinite(state.theta_hat)):
        raise EstimatorError("state estimate contains non-finite values")
    means, dispersions, stats = _gain_schedule(state.stats, intensities)
    theta, trace = kernels.spsa_fold(
        state.theta_hat, intensities, means, dispersions, currents, state.iteration, control_indices
    )
    if not np.all(np.isfinite(theta)):
        raise EstimatorError("estimate overflowed to a non-finite value")
    return EstimatorState(theta, state.iteration + intensities.shape[0], stats), trace


def spsa_step(state: EstimatorState, scan: ScanRecord) -> EstimatorState:
    """One application of the recursion. `state` is not modified."""
    new_state, _ = _fold(
        state, np.array([scan.intensity]), scan.photocurrent.reshape(1, -1)
    )
    return new_state


def run_estimation(
    scans: Sequence[ScanRecord],
    config: EstimationConfig,
    state: EstimatorState | None = None,
) -> tuple[EstimatorState, ConvergenceTrace]:
    """Fold `spsa_step` over `scans` in order, recording control-bin history.

    Starts from `state` when given (continuing its iteration count),
    otherwise from ``init_state`` with the configured guess.
    """
    intensities, currents = stack_scans(scans)
    if state is None:
        state = init_state(currents.shape[1], config.stats, config.initial_guess)
    control = np.asarray(config.control_indices, dtype=np.intp).reshape(-1)
    if control.size and (control.min() < 0 or control.max() >= currents.shape[1]):
        raise EstimatorError("control index outside the energy grid")
    start = state.iteration
    final, values = _fold(state, intensities, currents, control)
    return final, ConvergenceTrace(tuple(control.tolist()), values, start)


def randomized_least_squares(
    scans: Sequence[ScanRecord],
    stats: IntensityStats | None = None,
    center: str = "sample",
) -> np.ndarray:
    """Correlation-ratio estimate ``sum(delta * j) / sum(delta * I)`` per bin.

    With ``center="sample"`` (default) the perturbation is taken about the
    sample mean of the intensities, which makes any noise that is constant
    across scans cancel exactly. ``center="known"`` uses
    ``stats.mean_intensity`` instead.
    """
    intensities, currents = stack_scans(scans)
    if center == "sample":
        delta = intensities - intensities.mean()
        # sum(delta) == 0 analytically; centering j too drops the constant
        # term before it meets rounding error
        currents = currents - currents.mean(axis=0)
        denominator = float(delta @ delta)
    elif center == "known":
        if stats is None or (stats.policy is StatsPolicy.RUNNING_EMPIRICAL and stats.count == 0):
            raise EstimatorError("center='known' needs intensity statistics")
        delta = intensities - stats.mean_intensity
        denominator = float(delta @ intensities)
    else:
        raise EstimatorError(f"unknown center {center!r}")
    if not abs(denominator) > 1e-12 * float(intensities @ intensities):
        raise DegenerateDispersionError("intensity draw is degenerate: sum(delta * I) vanishes")
    return (delta @ currents) / denominator


def naive_mean_baseline(scans: Sequence[ScanRecord], stats: IntensityStats) -> np.ndarray:
    """Scan average divided by the mean intensity; biased by the noise mean."""
    _, currents = stack_scans(scans)
    if not stats.mean_intensity > 0:
        raise EstimatorError("mean intensity is not available")
    return currents.mean(axis=0) / stats.mean_intensity

