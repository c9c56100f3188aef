"""Randomized-perturbation filtering of non-zero-mean systematic noise.

Typical use::

    from snfilter import ExperimentConfig, run_experiment

    result = run_experiment(ExperimentConfig(seed=42))
    print(result.report.ratio())
"""
__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DegenerateDispersionError,
    EstimatorError,
    ScanFormatError,
    SNFilterError,
)
from .estimator import (  # noqa: E402
    ConvergenceTrace,
    EstimationConfig,
    EstimatorState,
    IntensityStats,
    ScanRecord,
    StatsPolicy,
    init_state,
    naive_mean_baseline,
    randomized_least_squares,
    run_estimation,
    spsa_step,
    update_running_stats,
)
from .spectrum import (  # noqa: E402
    DisturbanceModel,
    DOSModel,
    EnergyGrid,
    IntensityDistribution,
    IntensityModel,
    NoiseProfile,
    Peak,
    PeakShape,
    eval_theta_bar,
    implied_dispersion,
    sample_scan,
    simulate_scans,
)
from .harness import (  # noqa: E402
    ComparisonReport,
    ExperimentConfig,
    ExperimentResult,
    ingest_external_scans,
    run_experiment,
    stabilization_check,
)
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "__version__",
    "BACKEND",
    "ComparisonReport",
    "ConfigError",
    "ConvergenceTrace",
    "DegenerateDispersionError",
    "DisturbanceModel",
    "DOSModel",
    "EnergyGrid",
    "EstimationConfig",
    "EstimatorError",
    "EstimatorState",
    "eval_theta_bar",
    "ExperimentConfig",
    "ExperimentResult",
    "implied_dispersion",
    "ingest_external_scans",
    "init_state",
    "IntensityDistribution",
    "IntensityModel",
    "IntensityStats",
    "naive_mean_baseline",
    "NoiseProfile",
    "Peak",
    "PeakShape",
    "randomized_least_squares",
    "run_estimation",
    "run_experiment",
    "sample_scan",
    "ScanFormatError",
    "ScanRecord",
    "simulate_scans",
    "SNFilterError",
    "spsa_step",
    "stabilization_check",
    "StatsPolicy",
    "update_running_stats",
]
