"""Experiment orchestration: simulate or ingest scans, run every estimator
on the same sequence, track control points and score against the truth."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, EstimatorError
from .estimator import (
    ConvergenceTrace,
    EstimationConfig,
    IntensityStats,
    ScanRecord,
    naive_mean_baseline,
    randomized_least_squares,
    run_estimation,
    stack_scans,
)
from .io import read_scans
from .spectrum import (
    DisturbanceModel,
    DOSModel,
    EnergyGrid,
    IntensityModel,
    NoiseProfile,
    eval_theta_bar,
    implied_dispersion,
    simulate_scans,
)

log = logging.getLogger(__name__)

ESTIMATORS = ("spsa", "rls", "naive_mean")
DEFAULT_N_CONTROL = 12
# declared mean intensity vs sample mean, relative
MEAN_MISMATCH_WARN = 0.20


@dataclass(frozen=True)
class ExperimentConfig:
    n_scans: int = 50
    grid: EnergyGrid = field(default_factory=EnergyGrid)
    dos: DOSModel = field(default_factory=DOSModel)
    intensity: IntensityModel = field(default_factory=IntensityModel)
    noise: NoiseProfile = field(default_factory=NoiseProfile)
    disturbance: DisturbanceModel = field(default_factory=DisturbanceModel)
    control_points: tuple[float, ...] | None = None
    seed: int | None = None
    initial_guess: float | tuple[float, ...] = 0.0
    stats_policy: str = "fixed"
    stabilization_rel_tol: float = 0.05
    stabilization_window: int = 5

    def __post_init__(self):
        if isinstance(self.n_scans, bool) or int(self.n_scans) != self.n_scans or self.n_scans < 1:
            raise ConfigError(f"must be a positive integer, got {self.n_scans!r}", key="experiment.n_scans")
        if self.stats_policy not in ("fixed", "empirical"):
            raise ConfigError("must be 'fixed' or 'empirical'", key="estimator.stats_policy")
        if not self.stabilization_rel_tol > 0:
            raise ConfigError("must be positive", key="estimator.stabilization_rel_tol")
        if int(self.stabilization_window) != self.stabilization_window or self.stabilization_window < 2:
            raise ConfigError("must be an integer >= 2", key="estimator.stabilization_window")
        if self.control_points is not None:
            object.__setattr__(self, "control_points", tuple(float(e) for e in self.control_points))
            if not self.control_points:
                raise ConfigError("needs at least one energy", key="estimator.control_points")
        if not isinstance(self.initial_guess, (int, float)):
            object.__setattr__(self, "initial_guess", tuple(float(v) for v in self.initial_guess))
        self.check_grid(self.grid)

    def check_grid(self, grid: EnergyGrid) -> None:
        """Validate the grid-dependent settings against `grid`."""
        energies = grid.energies
        lo, hi = energies[0], energies[-1]
        if self.noise.enabled:
            if not lo <= self.noise.lo_ev <= hi:
                raise ConfigError(f"{self.noise.lo_ev} eV lies outside the grid [{lo}, {hi}]", key="noise.lo_ev")
            if not lo <= self.noise.hi_ev <= hi:
                raise ConfigError(f"{self.noise.hi_ev} eV lies outside the grid [{lo}, {hi}]", key="noise.hi_ev")
        if self.control_points is not None:
            for energy in self.control_points:
                try:
                    grid.snap(energy)
                except ConfigError as exc:
                    raise ConfigError(str(exc), key="estimator.control_points") from None
        if isinstance(self.initial_guess, tuple) and len(self.initial_guess) != grid.n_bins:
            raise ConfigError(
                f"has {len(self.initial_guess)} values, grid has {grid.n_bins} bins",
                key="experiment.initial_guess",
            )

    def control_indices(self, grid: EnergyGrid | None = None) -> tuple[int, ...]:
        """Bins tracked in the trace: configured energies, else evenly spaced."""
        grid = grid or self.grid
        if self.control_points is None:
            targets = np.linspace(grid.energies[0], grid.energies[-1], min(DEFAULT_N_CONTROL, grid.n_bins))
        else:
            targets = self.control_points
        return tuple(grid.snap(float(e)) for e in targets)

    def with_grid(self, grid: EnergyGrid) -> ExperimentConfig:
        return replace(self, grid=grid)


@dataclass(frozen=True)
class EstimatorMetrics:
    rmse_in_window: float
    rmse_out_window: float | None
    max_abs_error: float

    def to_dict(self):
        return {
            "rmse_in_window": self.rmse_in_window,
            "rmse_out_window": self.rmse_out_window,
            "max_abs_error": self.max_abs_error,
        }


@dataclass(frozen=True)
class ComparisonReport:
    metrics: dict[str, EstimatorMetrics]
    stabilization_iteration: int | None
    n_scans: int
    n_bins_in_window: int
    n_bins_out_window: int
    clamp_count: int = 0
    zero_perturbation_steps: int = 0
    warnings: tuple[str, ...] = ()

    def ratio(self, baseline: str = "naive_mean", estimator: str = "spsa", region: str = "in") -> float | None:
        """Baseline RMSE divided by estimator RMSE in a region ('in' or 'out')."""
        key = "rmse_in_window" if region == "in" else "rmse_out_window"
        if baseline not in self.metrics or estimator not in self.metrics:
            return None
        num = getattr(self.metrics[baseline], key)
        den = getattr(self.metrics[estimator], key)
        if num is None or den is None:
            return None
        if den == 0:
            return float("inf") if num > 0 else 1.0
        return num / den

    def to_dict(self):
        return {
            "metrics": {name: m.to_dict() for name, m in sorted(self.metrics.items())},
            "ratios": {
                "naive_over_spsa_in_window": self.ratio("naive_mean", "spsa", "in"),
                "naive_over_spsa_out_window": self.ratio("naive_mean", "spsa", "out"),
                "naive_over_rls_in_window": self.ratio("naive_mean", "rls", "in"),
            },
            "stabilization_iteration": self.stabilization_iteration,
            "n_scans": self.n_scans,
            "n_bins_in_window": self.n_bins_in_window,
            "n_bins_out_window": self.n_bins_out_window,
            "clamp_count": self.clamp_count,
            "zero_perturbation_steps": self.zero_perturbation_steps,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    report: ComparisonReport
    trace: ConvergenceTrace
    spectra: dict[str, np.ndarray]
    theta_bar: np.ndarray
    noise_profile: np.ndarray
    scans: list[ScanRecord]
    grid: EnergyGrid
    stats: IntensityStats


def _trailing_changes(values: np.ndarray, window: int) -> np.ndarray:
    """Max relative deviation from the newest value over each trailing window.

    Row ``k`` covers iterations ``k + 1 .. k + window`` (1-based); columns are
    control points.
    """
    segs = np.lib.stride_tricks.sliding_window_view(values, window, axis=0)
    newest = segs[..., -1]
    spread = np.max(np.abs(segs - newest[..., None]), axis=-1)
    scale = np.abs(newest)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(spread == 0, 0.0, spread / scale)
    return rel


def stabilization_check(trace: ConvergenceTrace, rel_tol: float = 0.05, window: int = 5) -> int | None:
    """First iteration where every control point has settled.

    Settled at iteration n means: over the `window` estimates ending at n,
    the largest deviation from the estimate at n is below ``rel_tol`` times
    its magnitude, for every control point. Returns None if that never
    happens.
    """
    if int(window) != window or window < 2:
        raise EstimatorError(f"window must be an integer >= 2, got {window!r}")
    if trace.n_iterations < window:
        raise EstimatorError(f"trace has {trace.n_iterations} iterations, shorter than window {window}")
    rel = _trailing_changes(trace.values, int(window))
    settled = np.all(rel < rel_tol, axis=1)
    hits = np.flatnonzero(settled)
    if hits.size == 0:
        return None
    return trace.start_iteration + int(hits[0]) + int(window)


def trailing_change(trace: ConvergenceTrace, window: int = 5) -> float:
    """Worst relative change over the last `window` iterations, all control points."""
    if trace.n_iterations < window:
        raise EstimatorError(f"trace has {trace.n_iterations} iterations, shorter than window {window}")
    return float(np.max(_trailing_changes(trace.values[-window:], window)))


def _rmse(errors: np.ndarray) -> float | None:
    if errors.size == 0:
        return None
    return float(np.sqrt(np.mean(errors * errors)))


def score(estimate: np.ndarray, theta_bar: np.ndarray, in_window: np.ndarray) -> EstimatorMetrics:
    errors = estimate - theta_bar
    return EstimatorMetrics(
        rmse_in_window=_rmse(errors[in_window]) or 0.0,
        rmse_out_window=_rmse(errors[~in_window]),
        max_abs_error=float(np.max(np.abs(errors))),
    )


def estimation_stats(config: ExperimentConfig, intensities: np.ndarray) -> IntensityStats:
    if config.stats_policy == "fixed":
        return IntensityStats.fixed(config.intensity.mean, implied_dispersion(config.intensity))
    return IntensityStats.from_samples(intensities).frozen()


def analyze_scans(
    scans: Sequence[ScanRecord],
    config: ExperimentConfig,
    stats: IntensityStats,
    grid: EnergyGrid,
    clamp_count: int = 0,
    warnings: Sequence[str] = (),
) -> ExperimentResult:
    """Run all estimators on one scan sequence and score them against the
    model's ground truth on `grid`."""
    config.check_grid(grid)
    scans = list(scans)
    intensities, _ = stack_scans(scans)
    if len(scans[0]) != grid.n_bins:
        raise EstimatorError(f"scans have {len(scans[0])} bins, grid has {grid.n_bins}")
    controls = config.control_indices(grid)
    est_config = EstimationConfig(stats, config.initial_guess, controls)
    state, trace = run_estimation(scans, est_config)
    trace = replace(trace, energies=grid.energies[list(controls)])

    warnings = list(warnings)
    try:
        rls = randomized_least_squares(scans, stats)
    except EstimatorError as exc:
        warnings.append(f"rls: {exc}")
        rls = np.full(grid.n_bins, np.nan)
    spectra = {"spsa": np.array(state.theta_hat), "rls": rls, "naive_mean": naive_mean_baseline(scans, stats)}

    theta_bar = eval_theta_bar(config.dos, grid)
    noise_profile = config.noise.profile(grid.energies)
    in_window = config.noise.in_window(grid.energies)
    metrics = {name: score(est, theta_bar, in_window) for name, est in spectra.items() if np.all(np.isfinite(est))}

    if trace.n_iterations >= config.stabilization_window:
        stab = stabilization_check(trace, config.stabilization_rel_tol, config.stabilization_window)
    else:
        stab = None
    report = ComparisonReport(
        metrics=metrics,
        stabilization_iteration=stab,
        n_scans=len(scans),
        n_bins_in_window=int(np.count_nonzero(in_window)),
        n_bins_out_window=int(np.count_nonzero(~in_window)),
        clamp_count=clamp_count,
        zero_perturbation_steps=int(np.count_nonzero(intensities == stats.mean_intensity)),
        warnings=tuple(warnings),
    )
    return ExperimentResult(report, trace, spectra, theta_bar, noise_profile, scans, grid, stats)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Simulate `config.n_scans` scans and evaluate every estimator on them."""
    if config.seed is None:
        raise ConfigError("a seed is required", key="experiment.seed")
    run = simulate_scans(
        config.dos, config.grid, config.intensity, config.noise, config.disturbance, config.n_scans, config.seed
    )
    intensities = np.array([s.intensity for s in run.scans])
    stats = estimation_stats(config, intensities)
    return analyze_scans(run.scans, config, stats, config.grid, clamp_count=run.clamp_count)


@dataclass(frozen=True, eq=False)
class IngestedScans:
    scans: list[ScanRecord]
    stats: IntensityStats
    grid: EnergyGrid
    warnings: tuple[str, ...]


def ingest_external_scans(path) -> IngestedScans:
    """Load a scan file and settle the intensity statistics.

    Declared header values are used when present; missing ones are
    estimated from the file's intensities with the streaming update. A
    declared mean more than 20% away from the sample mean is reported as a
    warning.
    """
    scan_file = read_scans(path)
    intensities = np.array([s.intensity for s in scan_file.scans])
    warnings = []
    empirical = IntensityStats.from_samples(intensities)
    mean = scan_file.declared_mean
    if mean is None:
        mean = empirical.mean_intensity
    elif abs(mean - empirical.mean_intensity) > MEAN_MISMATCH_WARN * empirical.mean_intensity:
        msg = (
            f"declared mean intensity {mean!r} differs from the sample mean "
            f"{empirical.mean_intensity!r} by more than {MEAN_MISMATCH_WARN:.0%}"
        )
        log.warning(msg)
        warnings.append(msg)
    dispersion = scan_file.declared_dispersion
    if dispersion is None:
        if scan_file.declared_mean is None:
            dispersion = empirical.dispersion
        else:
            dispersion = float(np.mean((intensities - mean) ** 2))
    if dispersion is None or dispersion <= 0:
        raise EstimatorError("scan intensities do not vary; the dispersion is not positive")
    stats = IntensityStats.fixed(mean, dispersion)
    return IngestedScans(scan_file.scans, stats, scan_file.grid, tuple(warnings))
