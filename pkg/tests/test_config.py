import pytest

from snfilter import ConfigError, ExperimentConfig
from snfilter.config import default_config_text, load_config, parse_config
from snfilter.spectrum import IntensityDistribution, PeakShape


def test_default_text_parses_back_to_defaults():
    assert parse_config(default_config_text()) == ExperimentConfig()


def test_empty_config_is_default():
    config = parse_config("")
    assert config == ExperimentConfig()
    assert config.seed is None


def test_values_are_applied():
    config = parse_config(
        """
[experiment]
seed = 7
n_scans = 20
[intensity]
distribution = uniform
half_width_frac = 0.5
[dos]
peaks = 30.0 0.5 2.0 lorentzian; 33 1 1
[noise]
table = 29:0.1, 31:0.4, 35:0.0
[estimator]
control_points = 26.0, 30.0, 34.0
"""
    )
    assert config.seed == 7 and config.n_scans == 20
    assert config.intensity.distribution is IntensityDistribution.UNIFORM
    assert config.dos.peaks[0].shape is PeakShape.LORENTZIAN
    assert config.dos.peaks[1].shape is PeakShape.GAUSSIAN
    assert config.noise.table == ((29.0, 0.1), (31.0, 0.4), (35.0, 0.0))
    assert config.control_indices() == (4, 84, 164)


@pytest.mark.parametrize(
    "text, key",
    [
        ("[noise]\nlo_evv = 30\n", "noise.lo_evv"),
        ("[nosie]\nlo_ev = 30\n", "nosie"),
        ("[DEFAULT]\nseed = 1\n", "DEFAULT"),
        ("[noise]\nlo_ev = 10\n", "noise.lo_ev"),
        ("[noise]\nhi_ev = 40\n", "noise.hi_ev"),
        ("[grid]\nstep_ev = 0\n", "grid.step_ev"),
        ("[experiment]\nn_scans = many\n", "experiment.n_scans"),
        ("[experiment]\nn_scans = 0\n", "experiment.n_scans"),
        ("[intensity]\nhalf_width_frac = 1.5\n", "intensity.half_width_frac"),
        ("[dos]\npeaks = 30 1\n", "dos.peaks"),
        ("[estimator]\ncontrol_points = 50.0\n", "estimator.control_points"),
        ("[noise]\nenabled = maybe\n", "noise.enabled"),
    ],
)
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert key in str(err.value)


def test_syntax_error():
    with pytest.raises(ConfigError):
        parse_config("no section header\n")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")
