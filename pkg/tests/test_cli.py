import json
import shutil
import subprocess

import pytest

from snfilter.cli import main
from snfilter.io import read_overlay, read_trace


@pytest.fixture
def scans(tmp_path):
    path = tmp_path / "scans.csv"
    assert main(["simulate", "-o", str(path), "--seed", "42"]) == 0
    return path


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_simulate_is_deterministic(tmp_path, scans):
    other = tmp_path / "again.csv"
    assert main(["simulate", "-o", str(other), "--seed", "42"]) == 0
    assert scans.read_bytes() == other.read_bytes()
    assert len(scans.read_text().splitlines()) == 3 + 50


def test_seed_from_config(tmp_path, scans):
    cfg = write(tmp_path, "c.ini", "[experiment]\nseed = 42\n")
    out = tmp_path / "fromcfg.csv"
    assert main(["simulate", "-c", str(cfg), "-o", str(out)]) == 0
    assert out.read_bytes() == scans.read_bytes()


def test_seed_flag_overrides_config(tmp_path, scans):
    cfg = write(tmp_path, "c.ini", "[experiment]\nseed = 1\n")
    out = tmp_path / "flag.csv"
    assert main(["simulate", "-c", str(cfg), "-o", str(out), "--seed", "42"]) == 0
    assert out.read_bytes() == scans.read_bytes()


def test_env_var_config(tmp_path, monkeypatch, scans):
    cfg = write(tmp_path, "env.ini", "[experiment]\nseed = 42\n")
    monkeypatch.setenv("SNFILTER_CONFIG", str(cfg))
    out = tmp_path / "env.csv"
    assert main(["simulate", "-o", str(out)]) == 0
    assert out.read_bytes() == scans.read_bytes()


def test_estimate_pipeline(tmp_path, scans):
    prefix = tmp_path / "run"
    assert main(["estimate", "-s", str(scans), "-o", str(prefix)]) == 0
    trace = read_trace(f"{prefix}.trace.csv")
    assert trace.values.shape == (50, 12)
    overlay = read_overlay(f"{prefix}.spectra.csv")
    assert len(overlay) == 5


def test_estimate_matches_library_run(tmp_path, scans):
    from snfilter import ExperimentConfig, run_experiment

    prefix = tmp_path / "run"
    main(["estimate", "-s", str(scans), "-o", str(prefix)])
    result = run_experiment(ExperimentConfig(seed=42))
    assert read_trace(f"{prefix}.trace.csv").values.tobytes() == result.trace.values.tobytes()


def test_estimate_clean_within_two_percent(tmp_path):
    cfg = write(tmp_path, "clean.ini", "[experiment]\nseed = 42\n[noise]\nenabled = false\n")
    path = tmp_path / "clean.csv"
    assert main(["simulate", "-c", str(cfg), "-o", str(path)]) == 0
    prefix = tmp_path / "clean"
    assert main(["estimate", "-c", str(cfg), "-s", str(path), "-o", str(prefix)]) == 0
    overlay = read_overlay(f"{prefix}.spectra.csv")
    rel = abs(overlay["spsa_estimate"] - overlay["reference"]) / overlay["reference"]
    assert rel.max() < 0.02


def test_estimate_missing_scans_writes_nothing(tmp_path):
    assert main(["estimate", "-s", str(tmp_path / "missing.csv"), "-o", str(tmp_path / "out")]) == 1
    assert list(tmp_path.iterdir()) == []


def test_compare_report(tmp_path, scans, capsys):
    js = tmp_path / "report.json"
    assert main(["compare", "-s", str(scans), "--json", str(js)]) == 0
    text = capsys.readouterr().out
    assert "naive_over_spsa_in_window: 14.16" in text
    payload = json.loads(js.read_text())
    assert payload["ratios"]["naive_over_spsa_in_window"] >= 10
    assert payload["stabilization_iteration"] == 8


def test_compare_is_byte_identical(tmp_path, scans, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["compare", "-s", str(scans), "--json", str(a)])
    first = capsys.readouterr().out
    main(["compare", "-s", str(scans), "--json", str(b)])
    assert capsys.readouterr().out == first
    assert a.read_bytes() == b.read_bytes()


def test_compare_noise_disabled(tmp_path, capsys):
    cfg = write(tmp_path, "clean.ini", "[experiment]\nseed = 42\n[noise]\nenabled = false\n")
    path = tmp_path / "clean.csv"
    main(["simulate", "-c", str(cfg), "-o", str(path)])
    capsys.readouterr()
    assert main(["compare", "-c", str(cfg), "-s", str(path), "--format", "json"]) == 0
    clean = json.loads(capsys.readouterr().out)
    # without systematic noise the naive error is the same inside and outside the window
    in_win = clean["metrics"]["naive_mean"]["rmse_in_window"]
    out_win = clean["metrics"]["naive_mean"]["rmse_out_window"]
    assert 0.5 < in_win / out_win < 2.0


def test_commands_do_not_touch_inputs(tmp_path, scans):
    cfg = write(tmp_path, "c.ini", "[experiment]\nseed = 42\n")
    before = scans.read_bytes(), cfg.read_bytes()
    main(["estimate", "-c", str(cfg), "-s", str(scans), "-o", str(tmp_path / "p")])
    main(["compare", "-c", str(cfg), "-s", str(scans)])
    assert (scans.read_bytes(), cfg.read_bytes()) == before


def test_trace_command(tmp_path, capsys):
    out, overlay = tmp_path / "t.csv", tmp_path / "o.csv"
    assert main(["trace", "--seed", "42", "-o", str(out), "--overlay", str(overlay)]) == 0
    assert "stabilization_iteration: 8" in capsys.readouterr().out
    assert read_trace(out).n_iterations == 50
    assert len(read_overlay(overlay)) == 5


def test_config_command(capsys):
    assert main(["config"]) == 0
    assert "[noise]" in capsys.readouterr().out


BAD_CONFIGS = {
    "unknown_key": "[noise]\nlo_evv = 30\n",
    "unknown_section": "[nosie]\n",
    "window_outside_grid": "[noise]\nlo_ev = 10\n",
    "bad_number": "[grid]\nstep_ev = fast\n",
    "zero_step": "[grid]\nstep_ev = 0\n",
    "syntax": "seed = 1\n",
}

BAD_SCANS = {
    "truncated": "#snfilter-scans,version=1\n#grid,start_ev=25.8,stop_ev=37.8,step_ev=0.05\n1,1.0,1",
    "version": "#snfilter-scans,version=9\n",
    "empty": "",
    "short_row": "#snfilter-scans,version=1\n#grid,start_ev=25.8,stop_ev=37.8,step_ev=0.05\n1,1.0,1,2\n",
    "zero_step": "#snfilter-scans,version=1\n#grid,start_ev=25.8,stop_ev=37.8,step_ev=0\n",
    "negative_intensity": "#snfilter-scans,version=1\n#grid,start_ev=1,stop_ev=2,step_ev=1\n1,-1.0,1,2\n",
    "constant_intensity": "#snfilter-scans,version=1\n#grid,start_ev=1,stop_ev=2,step_ev=1\n1,1.0,1,2\n2,1.0,1,2\n",
}


@pytest.mark.parametrize("name", sorted(BAD_CONFIGS))
@pytest.mark.parametrize("command", ["simulate", "trace"])
def test_bad_config_exits_2(tmp_path, name, command, capsys):
    cfg = write(tmp_path, "bad.ini", BAD_CONFIGS[name])
    assert main([command, "-c", str(cfg), "-o", str(tmp_path / "out.csv"), "--seed", "1"]) == 2
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "out.csv").exists()


def test_config_error_names_key(tmp_path, capsys):
    cfg = write(tmp_path, "bad.ini", BAD_CONFIGS["window_outside_grid"])
    main(["simulate", "-c", str(cfg), "-o", str(tmp_path / "o.csv"), "--seed", "1"])
    assert "noise.lo_ev" in capsys.readouterr().err


def test_missing_seed_exits_2(tmp_path):
    assert main(["simulate", "-o", str(tmp_path / "x.csv")]) == 2
    assert main(["trace", "-o", str(tmp_path / "x.csv")]) == 2


@pytest.mark.parametrize("name", sorted(BAD_SCANS))
@pytest.mark.parametrize("command", ["estimate", "compare"])
def test_bad_scans_exit_1(tmp_path, name, command):
    path = write(tmp_path, "bad.csv", BAD_SCANS[name])
    argv = [command, "-s", str(path)] + (["-o", str(tmp_path / "p")] if command == "estimate" else [])
    assert main(argv) == 1
    assert sorted(p.name for p in tmp_path.iterdir()) == ["bad.csv"]


def test_missing_config_file_exits_2(tmp_path, scans):
    assert main(["compare", "-c", str(tmp_path / "none.ini"), "-s", str(scans)]) == 2


def test_unwritable_output_exits_1(tmp_path, scans):
    assert main(["estimate", "-s", str(scans), "-o", str(tmp_path / "nodir" / "p")]) == 1
    assert main(["simulate", "--seed", "1", "-o", str(tmp_path / "nodir" / "x.csv")]) == 1


@pytest.mark.parametrize(
    "argv",
    [[], ["bogus"], ["simulate"], ["simulate", "-o", "x.csv", "--seed", "abc"], ["compare"], ["estimate", "-s", "x"]],
)
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 2


@pytest.mark.skipif(shutil.which("snfilter") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = subprocess.run(["snfilter", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "0.1.0" in out.stdout
    out = subprocess.run(["snfilter", "simulate", "-o", str(tmp_path / "x.csv")], capture_output=True, text=True)
    assert out.returncode == 2
