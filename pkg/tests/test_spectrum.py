import numpy as np
import pytest

from snfilter import (
    ConfigError,
    DegenerateDispersionError,
    DisturbanceModel,
    DOSModel,
    EnergyGrid,
    IntensityModel,
    IntensityStats,
    NoiseProfile,
    Peak,
    eval_theta_bar,
    implied_dispersion,
    sample_scan,
    simulate_scans,
)
from snfilter.spectrum import NoiseMode, scan_rngs

QUIET = NoiseProfile(enabled=False)
STILL = DisturbanceModel(0.0)


def test_default_grid_has_241_bins(grid):
    assert grid.n_bins == 241
    e = grid.energies
    assert e[0] == 25.8 and e[-1] == 37.8
    assert np.all(np.diff(e) > 0)


@pytest.mark.parametrize("kwargs", [dict(step_ev=0.0), dict(step_ev=-0.1), dict(start_ev=5.0, stop_ev=5.0)])
def test_grid_validation(kwargs):
    with pytest.raises(ConfigError):
        EnergyGrid(**kwargs)


def test_snap(grid):
    assert grid.snap(28.8) == 60
    assert grid.snap(28.81) == 60
    with pytest.raises(ConfigError):
        grid.snap(40.0)


def test_flat_dos():
    grid = EnergyGrid(0.0, 1.0, 0.25)
    theta = eval_theta_bar(DOSModel(peaks=(), background=0.7, scale_const=2.0), grid)
    assert theta.tolist() == [1.4] * 5


@pytest.mark.parametrize("shape", ["gaussian", "lorentzian"])
def test_single_peak_symmetric(shape):
    grid = EnergyGrid(0.0, 10.0, 0.1)
    theta = eval_theta_bar(DOSModel(peaks=(Peak(5.0, 0.7, 2.0, shape),), background=0.1), grid)
    assert np.argmax(theta) == 50
    np.testing.assert_allclose(theta, theta[::-1], rtol=1e-12)
    assert theta[50] == pytest.approx(2.1)


def test_default_dos_reference(grid):
    theta = eval_theta_bar(DOSModel(), grid)
    assert theta.min() >= 1.0
    assert grid.energies[np.argmax(theta)] == pytest.approx(31.0, abs=0.05)
    # direct evaluation at the second feature: 1 + 0.8 + tail of the first peak
    i = grid.snap(34.3)
    assert theta[i] == pytest.approx(1.0 + 0.8 + np.exp(-0.5 * 3.3**2), rel=1e-12)


def test_clean_scan_is_exact(grid):
    dos = DOSModel()
    scan = sample_scan(dos, grid, IntensityModel(), QUIET, STILL, np.random.default_rng(3))
    assert np.array_equal(scan.photocurrent, scan.intensity * eval_theta_bar(dos, grid))


def test_noise_only_inside_window(grid):
    dos, model = DOSModel(), IntensityModel()
    noisy = sample_scan(dos, grid, model, NoiseProfile(), STILL, np.random.default_rng(5))
    clean = sample_scan(dos, grid, model, QUIET, STILL, np.random.default_rng(5))
    outside = ~NoiseProfile().in_window(grid.energies)
    assert np.array_equal(noisy.photocurrent[outside], clean.photocurrent[outside])
    assert np.all(noisy.photocurrent[~outside] > clean.photocurrent[~outside])
    assert outside.sum() == 98


def test_noise_profile_bounded_and_windowed(grid):
    for noise in (NoiseProfile(), NoiseProfile(pedestal=0.0), NoiseProfile(table=((29.0, 0.1), (33.0, 0.5), (35.0, 0.0)))):
        n = noise.profile(grid.energies)
        inside = noise.in_window(grid.energies)
        assert np.all(n[~inside] == 0)
        assert np.all((n >= 0) & (n <= noise.bound))
    assert NoiseProfile().profile(grid.energies)[grid.snap(28.8)] == pytest.approx(0.3 * 0.4)


def test_noise_modes():
    assert NoiseProfile().mode is NoiseMode.DETERMINISTIC
    assert NoiseProfile(jitter=0.2).mode is NoiseMode.PER_SCAN_JITTER
    with pytest.raises(ConfigError, match="noise.jitter"):
        NoiseProfile(jitter=1.0)


def test_expected_photocurrent_monte_carlo():
    grid = EnergyGrid(28.0, 34.0, 0.5)
    dos, model = DOSModel(), IntensityModel(distribution="uniform", half_width_frac=0.3)
    noise, dist = NoiseProfile(jitter=0.3), DisturbanceModel(0.05)
    run = simulate_scans(dos, grid, model, noise, dist, 10_000, seed=11)
    j = np.vstack([s.photocurrent for s in run.scans])
    expected = model.mean * eval_theta_bar(dos, grid) + noise.profile(grid.energies)
    se = j.std(axis=0, ddof=1) / np.sqrt(j.shape[0])
    assert np.all(np.abs(j.mean(axis=0) - expected) < 3 * se)


def test_uniform_dispersion():
    assert implied_dispersion(IntensityModel(1.0, 0.3, "uniform")) == pytest.approx(0.03, rel=1e-14)
    assert implied_dispersion(IntensityModel(2.0, 0.5, "two_point")) == 1.0


def test_narrow_intensity_is_degenerate():
    assert implied_dispersion(IntensityModel(1.0, 1e-9, "uniform")) < 1e-17
    with pytest.raises(ConfigError):
        IntensityModel(1.0, 0.0)
    with pytest.raises(DegenerateDispersionError):
        IntensityStats.fixed(1.0, 0.0)


@pytest.mark.parametrize("dist", ["truncated_gaussian", "uniform", "two_point"])
def test_dispersion_matches_samples(dist):
    model = IntensityModel(1.0, 0.6, dist)
    rng = np.random.default_rng(99)
    samples = np.array([model.sample(rng) for _ in range(1_000_000)])
    assert np.var(samples - model.mean) == pytest.approx(implied_dispersion(model), rel=0.01)
    assert samples.min() >= 0.4 and samples.max() <= 1.6


def test_independence_deterministic_noise(grid):
    run = simulate_scans(DOSModel(), grid, IntensityModel(), NoiseProfile(), STILL, 500, seed=1)
    i = grid.snap(32.0)
    intensities = np.array([s.intensity for s in run.scans])
    noise_vals = np.array([s.photocurrent[i] - s.intensity * run.theta_bar[i] for s in run.scans])
    # noise is a constant, so the covariance vanishes identically
    assert np.ptp(noise_vals) < 1e-12
    assert np.cov(intensities, np.full(500, run.noise_profile[i]))[0, 1] == 0.0


def test_independence_jittered_noise():
    grid = EnergyGrid(31.0, 32.0, 0.5)
    noise = NoiseProfile(jitter=0.5)
    run = simulate_scans(DOSModel(), grid, IntensityModel(), noise, STILL, 10_000, seed=4)
    intensities = np.array([s.intensity for s in run.scans])
    noise_vals = np.array([s.photocurrent[0] - s.intensity * run.theta_bar[0] for s in run.scans])
    assert abs(np.corrcoef(intensities, noise_vals)[0, 1]) < 3 / np.sqrt(10_000)


def test_support_outside_window(grid):
    run = simulate_scans(DOSModel(), grid, IntensityModel(), NoiseProfile(jitter=0.4), DisturbanceModel(0.01), 20, seed=8)
    outside = ~NoiseProfile().in_window(grid.energies)
    rngs = scan_rngs(8, 20)
    for scan, rng in zip(run.scans, rngs):
        intensity = IntensityModel().sample(rng)
        theta_n = np.maximum(run.theta_bar + DisturbanceModel(0.01).sample(rng, grid.n_bins), 0)
        assert scan.intensity == intensity
        assert np.array_equal(scan.photocurrent[outside], (intensity * theta_n)[outside])


def test_reproducible(grid):
    a = simulate_scans(DOSModel(), grid, IntensityModel(), NoiseProfile(jitter=0.1), DisturbanceModel(0.02), 30, seed=5)
    b = simulate_scans(DOSModel(), grid, IntensityModel(), NoiseProfile(jitter=0.1), DisturbanceModel(0.02), 30, seed=5)
    c = simulate_scans(DOSModel(), grid, IntensityModel(), NoiseProfile(jitter=0.1), DisturbanceModel(0.02), 30, seed=6)
    assert all(x == y for x, y in zip(a.scans, b.scans))
    assert not all(x == y for x, y in zip(a.scans, c.scans))


def test_clamping_counted():
    grid = EnergyGrid(0.0, 1.0, 0.1)
    dos = DOSModel(peaks=(), background=0.01)
    run = simulate_scans(dos, grid, IntensityModel(), QUIET, DisturbanceModel(0.05), 50, seed=2)
    assert run.clamp_count > 0
    assert all(np.all(s.photocurrent >= 0) for s in run.scans)
    assert simulate_scans(DOSModel(), EnergyGrid(), IntensityModel(), QUIET, DisturbanceModel(0.005), 50, 2).clamp_count == 0
