"""Synthetic photoemission scans with a known ground truth.

The photocurrent in bin E of scan n is ``I_n * theta_n(E) + N_n(E)``:

* ``theta_bar(E) = scale_const * DOS(E)`` is the quantity to recover,
  with the emission cross-section folded into ``scale_const``;
* ``theta_n = max(theta_bar + w_n, 0)``, ``w_n`` a zero-mean disturbance;
* ``I_n`` is the randomly drawn excitation intensity;
* ``N_n(E)`` is a bounded, non-negative systematic contribution that is
  zero outside its energy window and never depends on ``I_n``.

Seeding: scan ``k`` of a run with seed ``s`` draws from
``numpy.random.default_rng(SeedSequence(s).spawn(n)[k])``, so scans can be
generated in any order or in parallel with identical results. Within one
scan the draw order is intensity, disturbance, noise jitter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError
from .estimator import ScanRecord


class PeakShape(str, Enum):
    GAUSSIAN = "gaussian"
    LORENTZIAN = "lorentzian"


class IntensityDistribution(str, Enum):
    UNIFORM = "uniform"
    TRUNCATED_GAUSSIAN = "truncated_gaussian"
    TWO_POINT = "two_point"


@dataclass(frozen=True)
class EnergyGrid:
    start_ev: float = 25.8
    stop_ev: float = 37.8
    step_ev: float = 0.05

    def __post_init__(self):
        for name in ("start_ev", "stop_ev", "step_ev"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError("must be finite", key=f"grid.{name}")
        if not self.step_ev > 0:
            raise ConfigError(f"must be positive, got {self.step_ev!r}", key="grid.step_ev")
        if not self.start_ev < self.stop_ev:
            raise ConfigError("start_ev must be below stop_ev", key="grid.stop_ev")

    @property
    def n_bins(self) -> int:
        return int(round((self.stop_ev - self.start_ev) / self.step_ev)) + 1

    def __len__(self):
        return self.n_bins

    @property
    def energies(self) -> np.ndarray:
        # rounding keeps bin labels like 28.8 exact instead of 28.799999999999997
        return np.round(self.start_ev + self.step_ev * np.arange(self.n_bins), 10)

    def snap(self, energy_ev: float) -> int:
        """Index of the bin nearest `energy_ev`; error if it lies off the grid."""
        idx = int(round((energy_ev - self.start_ev) / self.step_ev))
        if idx < 0 or idx >= self.n_bins or abs(self.energies[idx] - energy_ev) > self.step_ev / 2 + 1e-9:
            raise ConfigError(f"energy {energy_ev!r} eV is outside the grid")
        return idx


@dataclass(frozen=True)
class Peak:
    """One spectral feature. `width_ev` is the Gaussian sigma or Lorentzian HWHM."""

    center_ev: float
    width_ev: float
    amplitude: float
    shape: PeakShape = PeakShape.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "shape", PeakShape(self.shape))
        if not self.width_ev > 0:
            raise ConfigError(f"peak width must be positive, got {self.width_ev!r}", key="dos.peaks")
        if not self.amplitude > 0:
            raise ConfigError(f"peak amplitude must be positive, got {self.amplitude!r}", key="dos.peaks")

    def __call__(self, energies):
        x = (np.asarray(energies, dtype=np.float64) - self.center_ev) / self.width_ev
        if self.shape is PeakShape.GAUSSIAN:
            return self.amplitude * np.exp(-0.5 * x * x)
        return self.amplitude / (1.0 + x * x)


def _default_peaks():
    # two W 5d-like features, binding energies ~4.5 and ~1.2 eV below E_F
    return (Peak(31.0, 1.0, 1.0), Peak(34.3, 0.8, 0.8))


@dataclass(frozen=True)
class DOSModel:
    peaks: tuple[Peak, ...] = field(default_factory=_default_peaks)
    background: float = 1.0
    scale_const: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(self.peaks))
        if not self.background >= 0:
            raise ConfigError(f"must be non-negative, got {self.background!r}", key="dos.background")
        if not self.scale_const > 0:
            raise ConfigError(f"must be positive, got {self.scale_const!r}", key="dos.scale_const")

    def dos(self, energies) -> np.ndarray:
        energies = np.asarray(energies, dtype=np.float64)
        total = np.full(energies.shape, float(self.background))
        for peak in self.peaks:
            total = total + peak(energies)
        return total


def eval_theta_bar(dos: DOSModel, grid: EnergyGrid) -> np.ndarray:
    """Mean signal per bin, ``scale_const * DOS(E)``."""
    return dos.scale_const * dos.dos(grid.energies)


_TRUNC_SIGMAS = 2.0


@dataclass(frozen=True)
class IntensityModel:
    """Random excitation intensity on ``mean * [1 - h, 1 + h]``.

    ``uniform`` fills the interval; ``two_point`` takes the endpoints with
    equal probability (the classic symmetric perturbation);
    ``truncated_gaussian`` is a normal with sigma ``h * mean / 2`` cut at
    two sigma.
    """

    mean: float = 1.0
    half_width_frac: float = 0.9
    distribution: IntensityDistribution = IntensityDistribution.TWO_POINT

    def __post_init__(self):
        object.__setattr__(self, "distribution", IntensityDistribution(self.distribution))
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise ConfigError(f"must be positive, got {self.mean!r}", key="intensity.mean")
        if not 0 < self.half_width_frac < 1:
            raise ConfigError(
                f"must lie in (0, 1), got {self.half_width_frac!r}", key="intensity.half_width_frac"
            )

    @property
    def half_width(self) -> float:
        return self.mean * self.half_width_frac

    def sample(self, rng: np.random.Generator) -> float:
        a = self.half_width
        if self.distribution is IntensityDistribution.UNIFORM:
            delta = rng.uniform(-a, a)
        elif self.distribution is IntensityDistribution.TWO_POINT:
            delta = a if rng.random() < 0.5 else -a
        else:
            scale = a / _TRUNC_SIGMAS
            while True:
                z = rng.standard_normal()
                if abs(z) <= _TRUNC_SIGMAS:
                    break
            delta = scale * z
        return self.mean + delta


def implied_dispersion(model: IntensityModel) -> float:
    """Exact variance of ``I_n - mean`` under `model`."""
    a = model.half_width
    if model.distribution is IntensityDistribution.UNIFORM:
        return a * a / 3.0
    if model.distribution is IntensityDistribution.TWO_POINT:
        return a * a
    c = _TRUNC_SIGMAS
    pdf = math.exp(-0.5 * c * c) / math.sqrt(2.0 * math.pi)
    mass = math.erf(c / math.sqrt(2.0))
    return (a / c) ** 2 * (1.0 - 2.0 * c * pdf / mass)


class NoiseMode(str, Enum):
    DETERMINISTIC = "deterministic"
    PER_SCAN_JITTER = "jitter"


@dataclass(frozen=True)
class NoiseProfile:
    """Systematic noise confined to ``[lo_ev, hi_ev]``.

    The parametric shape is a raised-cosine bump on a pedestal,
    ``amplitude * (pedestal + (1 - pedestal) * (1 - cos(2 pi x)) / 2)`` with
    ``x`` the position inside the window, so the noise stays positive up to
    the window edges. A tabulated shape (pairs of energy and value, linearly
    interpolated) replaces it when given. With ``jitter > 0`` each scan
    scales the profile by ``1 + jitter * u``, ``u`` uniform on [-1, 1].
    """

    lo_ev: float = 28.8
    hi_ev: float = 35.9
    amplitude: float = 0.3
    pedestal: float = 0.4
    table: tuple[tuple[float, float], ...] = ()
    jitter: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "table", tuple((float(e), float(v)) for e, v in self.table))
        if not self.lo_ev < self.hi_ev:
            raise ConfigError("lo_ev must be below hi_ev", key="noise.hi_ev")
        if not self.amplitude >= 0:
            raise ConfigError(f"must be non-negative, got {self.amplitude!r}", key="noise.amplitude")
        if not 0 <= self.pedestal <= 1:
            raise ConfigError(f"must lie in [0, 1], got {self.pedestal!r}", key="noise.pedestal")
        if not 0 <= self.jitter < 1:
            raise ConfigError(f"must lie in [0, 1), got {self.jitter!r}", key="noise.jitter")
        if any(v < 0 or not math.isfinite(v) for _, v in self.table):
            raise ConfigError("tabulated values must be finite and non-negative", key="noise.table")
        if self.table and any(b[0] <= a[0] for a, b in zip(self.table, self.table[1:])):
            raise ConfigError("tabulated energies must increase", key="noise.table")

    @property
    def mode(self) -> NoiseMode:
        return NoiseMode.PER_SCAN_JITTER if self.jitter > 0 else NoiseMode.DETERMINISTIC

    def in_window(self, energies) -> np.ndarray:
        energies = np.asarray(energies, dtype=np.float64)
        return (energies >= self.lo_ev) & (energies <= self.hi_ev)

    def profile(self, energies) -> np.ndarray:
        """Mean noise level per energy; zero outside the window or when disabled."""
        energies = np.asarray(energies, dtype=np.float64)
        if not self.enabled:
            return np.zeros(energies.shape)
        inside = self.in_window(energies)
        if self.table:
            table = np.array(self.table)
            values = np.interp(energies, table[:, 0], table[:, 1], left=0.0, right=0.0)
        else:
            x = (energies - self.lo_ev) / (self.hi_ev - self.lo_ev)
            bump = 0.5 * (1.0 - np.cos(2.0 * np.pi * x))
            values = self.amplitude * (self.pedestal + (1.0 - self.pedestal) * bump)
        return np.where(inside, values, 0.0)

    @property
    def bound(self) -> float:
        """Upper bound on any per-scan noise value."""
        if not self.enabled:
            return 0.0
        peak = max((v for _, v in self.table), default=0.0) if self.table else self.amplitude
        return peak * (1.0 + self.jitter)


@dataclass(frozen=True)
class DisturbanceModel:
    sigma_w: float = 0.005

    def __post_init__(self):
        if not (math.isfinite(self.sigma_w) and self.sigma_w >= 0):
            raise ConfigError(f"must be non-negative, got {self.sigma_w!r}", key="disturbance.sigma_w")

    def sample(self, rng: np.random.Generator, n_bins: int) -> np.ndarray:
        if self.sigma_w == 0:
            return np.zeros(n_bins)
        return rng.normal(0.0, self.sigma_w, n_bins)


def _draw_scan(theta_bar, noise_profile, intensity_model, noise, disturbance, rng):
    intensity = intensity_model.sample(rng)
    theta_n = theta_bar + disturbance.sample(rng, theta_bar.shape[0])
    clamped = int(np.count_nonzero(theta_n < 0))
    theta_n = np.maximum(theta_n, 0.0)
    if noise.enabled and noise.jitter > 0:
        noise_n = noise_profile * (1.0 + noise.jitter * rng.uniform(-1.0, 1.0))
    else:
        noise_n = noise_profile
    return ScanRecord(intensity, intensity * theta_n + noise_n), clamped


def sample_scan(
    dos: DOSModel,
    grid: EnergyGrid,
    intensity_model: IntensityModel,
    noise: NoiseProfile,
    disturbance: DisturbanceModel,
    rng: np.random.Generator,
) -> ScanRecord:
    """Draw one scan using `rng`."""
    theta_bar = eval_theta_bar(dos, grid)
    scan, _ = _draw_scan(theta_bar, noise.profile(grid.energies), intensity_model, noise, disturbance, rng)
    return scan


@dataclass(frozen=True, eq=False)
class SimulatedRun:
    scans: list[ScanRecord]
    theta_bar: np.ndarray
    noise_profile: np.ndarray
    clamp_count: int


def scan_rngs(seed: int, n_scans: int) -> list[np.random.Generator]:
    """Independent per-scan generators derived from one seed."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(n_scans)]


def simulate_scans(
    dos: DOSModel,
    grid: EnergyGrid,
    intensity_model: IntensityModel,
    noise: NoiseProfile,
    disturbance: DisturbanceModel,
    n_scans: int,
    seed: int,
) -> SimulatedRun:
    theta_bar = eval_theta_bar(dos, grid)
    noise_profile = noise.profile(grid.energies)
    scans = []
    clamps = 0
    for rng in scan_rngs(seed, n_scans):
        scan, clamped = _draw_scan(theta_bar, noise_profile, intensity_model, noise, disturbance, rng)
        scans.append(scan)
        clamps += clamped
    return SimulatedRun(scans, theta_bar, noise_profile, clamps)

