"""Command-line entry point.

Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ENV_VAR, default_config_text, load_config
from .errors import ConfigError, SNFilterError
from .harness import ExperimentConfig, analyze_scans, ingest_external_scans, run_experiment
from .io import ScanFile, emit_plot_data, format_json, write_estimates, write_json, write_scans
from .spectrum import implied_dispersion, simulate_scans

log = logging.getLogger("snfilter")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _resolve_config(path: str | None) -> ExperimentConfig:
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return ExperimentConfig()
    return load_config(path)


def _with_seed(config: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    if seed is not None:
        config = replace(config, seed=seed)
    if config.seed is None:
        raise ConfigError("no seed: pass --seed or set it in the config", key="experiment.seed")
    return config


def cmd_simulate(args) -> int:
    config = _with_seed(_resolve_config(args.config), args.seed)
    run = simulate_scans(
        config.dos, config.grid, config.intensity, config.noise, config.disturbance, config.n_scans, config.seed
    )
    scan_file = ScanFile(
        config.grid, run.scans, config.intensity.mean, implied_dispersion(config.intensity)
    )
    write_scans(args.out, scan_file)
    print(f"wrote {len(run.scans)} scans x {config.grid.n_bins} bins to {args.out} (clamped {run.clamp_count})")
    return EXIT_OK


def _analyze_file(scans_path, config_path):
    config = _resolve_config(config_path)
    ingested = ingest_external_scans(scans_path)
    config = config.with_grid(ingested.grid)
    return analyze_scans(ingested.scans, config, ingested.stats, ingested.grid, warnings=ingested.warnings)


def cmd_estimate(args) -> int:
    result = _analyze_file(args.scans, args.config)
    prefix = args.out_prefix
    targets = {
        "spectra": Path(f"{prefix}.spectra.csv"),
        "trace": Path(f"{prefix}.trace.csv"),
        "estimates": Path(f"{prefix}.estimates.csv"),
    }
    for path in targets.values():
        if not path.parent.is_dir():
            raise SNFilterError(f"output directory {path.parent} does not exist")
    emit_plot_data(result, "overlay", targets["spectra"])
    emit_plot_data(result, "trace", targets["trace"])
    write_estimates(targets["estimates"], result.grid.energies, result.spectra)
    stab = result.report.stabilization_iteration
    print(f"{result.report.n_scans} scans, stabilized at iteration {stab if stab is not None else 'never'}")
    for path in targets.values():
        print(f"wrote {path}")
    return EXIT_OK


def render_report(report) -> str:
    lines = [f"scans: {report.n_scans}   bins in/out of noise window: {report.n_bins_in_window}/{report.n_bins_out_window}"]
    lines.append(f"{'estimator':<12}{'rmse_in':>14}{'rmse_out':>14}{'max_abs':>14}")
    for name in ("spsa", "rls", "naive_mean"):
        m = report.metrics.get(name)
        if m is None:
            lines.append(f"{name:<12}{'n/a':>14}")
            continue
        out = "n/a" if m.rmse_out_window is None else f"{m.rmse_out_window:.6g}"
        lines.append(f"{name:<12}{m.rmse_in_window:>14.6g}{out:>14}{m.max_abs_error:>14.6g}")
    for label, value in report.to_dict()["ratios"].items():
        lines.append(f"{label}: {'n/a' if value is None else f'{value:.4g}'}")
    stab = report.stabilization_iteration
    lines.append(f"stabilization_iteration: {stab if stab is not None else 'none'}")
    lines.append(f"clamp_count: {report.clamp_count}   zero_perturbation_steps: {report.zero_perturbation_steps}")
    for warning in report.warnings:
        lines.append(f"warning: {warning}")
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    result = _analyze_file(args.scans, args.config)
    payload = result.report.to_dict()
    payload["tool"] = __version__
    if args.json:
        write_json(args.json, payload)
    if args.format == "json":
        sys.stdout.write(format_json(payload))
    else:
        sys.stdout.write(render_report(result.report))
    return EXIT_OK


def cmd_trace(args) -> int:
    config = _with_seed(_resolve_config(args.config), args.seed)
    result = run_experiment(config)
    emit_plot_data(result, "trace", args.out)
    if args.overlay:
        emit_plot_data(result, "overlay", args.overlay)
    stab = result.report.stabilization_iteration
    print(f"stabilization_iteration: {stab if stab is not None else 'none'}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_config(args) -> int:
    sys.stdout.write(default_config_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snfilter",
        description="Filter non-zero-mean systematic noise from randomized-intensity scan series.",
        epilog=(
            f"Config file: INI sections as printed by 'snfilter config'; --config overrides ${ENV_VAR}. "
            "Exit codes: 0 ok, 1 runtime/data error, 2 usage/config error."
        ),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("-c", "--config", default=None, metavar="INI", help=f"config file (default: ${ENV_VAR} or built-in)")

    p = sub.add_parser("simulate", help="generate a synthetic scan file")
    add_config(p)
    p.add_argument("-o", "--out", required=True, metavar="CSV")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate the spectrum from a scan file")
    add_config(p)
    p.add_argument("-s", "--scans", required=True, metavar="CSV")
    p.add_argument("-o", "--out-prefix", required=True, metavar="PREFIX",
                   help="writes PREFIX.spectra.csv, PREFIX.trace.csv, PREFIX.estimates.csv")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("compare", help="score all estimators against the configured model")
    add_config(p)
    p.add_argument("-s", "--scans", required=True, metavar="CSV")
    p.add_argument("--json", default=None, metavar="PATH", help="also write the report as JSON")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("trace", help="run a simulated experiment and write the convergence trace")
    add_config(p)
    p.add_argument("-o", "--out", required=True, metavar="CSV")
    p.add_argument("--overlay", default=None, metavar="CSV", help="also write the spectra overlay")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("config", help="print the default config file")
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"snfilter: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SNFilterError, OSError) as exc:
        print(f"snfilter: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
