"""Plain-text file formats: scans, convergence traces, plot data, reports.

All formats are comma-separated with ``#`` metadata lines at the top. The
first line names the format and its version plus the writing tool's
version. Floats are written with ``repr`` (shortest decimal that
round-trips), so reading a file back gives bit-identical values.

Scan file::

    #snfilter-scans,version=1,tool=0.1.0
    #grid,start_ev=25.8,stop_ev=37.8,step_ev=0.05
    #intensity,mean=1.0,dispersion=0.81          (optional line, keys optional)
    1,1.9,<bin 1>,...,<bin n>
    2,0.1,...

Every line, including the last, ends with a newline; a missing final
newline is reported as a truncated row.

Writes go to a temporary file that is renamed into place, so a failed
write leaves no partial output. Concurrent writes to the same path are not
supported.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import EstimatorError, ScanFormatError
from .estimator import ConvergenceTrace, ScanRecord
from .spectrum import EnergyGrid

SCAN_FORMAT = "snfilter-scans"
TRACE_FORMAT = "snfilter-trace"
OVERLAY_FORMAT = "snfilter-overlay"
FORMAT_VERSION = 1

OVERLAY_COLUMNS = ("E_kin_eV", "reference", "noisy_scan", "spsa_estimate", "noise_profile")


def fmt(value) -> str:
    return repr(float(value))


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _meta_line(tag: str, **fields) -> str:
    parts = [f"#{tag}"] + [f"{k}={v}" for k, v in fields.items()]
    return ",".join(parts)


def _parse_meta(line: str, lineno: int) -> tuple[str, dict[str, str]]:
    if not line.startswith("#"):
        raise ScanFormatError("expected a '#' metadata line", lineno)
    tag, *items = line[1:].split(",")
    fields = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ScanFormatError(f"malformed metadata field {item!r}", lineno)
        fields[key] = value
    return tag, fields


def _meta_float(fields, key, lineno) -> float:
    try:
        value = float(fields[key])
    except KeyError:
        raise ScanFormatError(f"missing {key}", lineno) from None
    except ValueError:
        raise ScanFormatError(f"{key} is not a number: {fields[key]!r}", lineno) from None
    if not math.isfinite(value):
        raise ScanFormatError(f"{key} must be finite", lineno)
    return value


def _split_lines(text: str) -> list[str]:
    lines = text.split("\n")
    if lines[-1] != "":
        raise ScanFormatError("truncated line (no trailing newline)", len(lines))
    return lines[:-1]


def _check_version(line: str, expected_tag: str) -> dict[str, str]:
    tag, fields = _parse_meta(line, 1)
    if tag != expected_tag:
        raise ScanFormatError(f"not a {expected_tag} file (found {tag!r})", 1)
    if fields.get("version") != str(FORMAT_VERSION):
        raise ScanFormatError(
            f"unsupported format version {fields.get('version')!r}, expected {FORMAT_VERSION}", 1
        )
    return fields


@dataclass(frozen=True, eq=False)
class ScanFile:
    grid: EnergyGrid
    scans: list[ScanRecord]
    declared_mean: float | None = None
    declared_dispersion: float | None = None

    def __eq__(self, other):
        if not isinstance(other, ScanFile):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.declared_mean == other.declared_mean
            and self.declared_dispersion == other.declared_dispersion
            and len(self.scans) == len(other.scans)
            and all(a == b for a, b in zip(self.scans, other.scans))
        )


def format_scans(scan_file: ScanFile) -> str:
    grid = scan_file.grid
    lines = [
        _meta_line(SCAN_FORMAT, version=FORMAT_VERSION, tool=__version__),
        _meta_line("grid", start_ev=fmt(grid.start_ev), stop_ev=fmt(grid.stop_ev), step_ev=fmt(grid.step_ev)),
    ]
    declared = {}
    if scan_file.declared_mean is not None:
        declared["mean"] = fmt(scan_file.declared_mean)
    if scan_file.declared_dispersion is not None:
        declared["dispersion"] = fmt(scan_file.declared_dispersion)
    if declared:
        lines.append(_meta_line("intensity", **declared))
    n_bins = grid.n_bins
    for k, scan in enumerate(scan_file.scans, start=1):
        if len(scan) != n_bins:
            raise ScanFormatError(f"scan {k} has {len(scan)} bins, grid has {n_bins}")
        lines.append(",".join([str(k), fmt(scan.intensity)] + [fmt(v) for v in scan.photocurrent]))
    return "\n".join(lines) + "\n"


def write_scans(path, scan_file: ScanFile) -> None:
    atomic_write_text(path, format_scans(scan_file))


def parse_scans(text: str) -> ScanFile:
    lines = _split_lines(text)
    if not lines:
        raise ScanFormatError("empty file", 1)
    _check_version(lines[0], SCAN_FORMAT)
    if len(lines) < 2:
        raise ScanFormatError("missing grid line", 2)
    tag, fields = _parse_meta(lines[1], 2)
    if tag != "grid":
        raise ScanFormatError(f"expected grid line, found {tag!r}", 2)
    start, stop, step = (_meta_float(fields, k, 2) for k in ("start_ev", "stop_ev", "step_ev"))
    if step <= 0:
        raise ScanFormatError(f"grid step must be positive, got {step!r}", 2)
    if start >= stop:
        raise ScanFormatError("grid start must be below stop", 2)
    grid = EnergyGrid(start, stop, step)
    n_bins = grid.n_bins

    declared_mean = declared_dispersion = None
    row = 2
    if len(lines) > 2 and lines[2].startswith("#"):
        tag, fields = _parse_meta(lines[2], 3)
        if tag != "intensity":
            raise ScanFormatError(f"unexpected metadata line {tag!r}", 3)
        unknown = set(fields) - {"mean", "dispersion"}
        if unknown:
            raise ScanFormatError(f"unknown intensity fields {sorted(unknown)}", 3)
        if "mean" in fields:
            declared_mean = _meta_float(fields, "mean", 3)
            if declared_mean <= 0:
                raise ScanFormatError("declared mean intensity must be positive", 3)
        if "dispersion" in fields:
            declared_dispersion = _meta_float(fields, "dispersion", 3)
            if declared_dispersion <= 0:
                raise ScanFormatError("declared dispersion must be positive", 3)
        row = 3

    scans = []
    for offset, line in enumerate(lines[row:]):
        lineno = row + offset + 1
        expected_index = offset + 1
        cells = line.split(",")
        try:
            index = int(cells[0])
        except ValueError:
            raise ScanFormatError(f"bad scan index {cells[0]!r}", lineno) from None
        if index != expected_index:
            raise ScanFormatError(f"scan index {index} out of sequence, expected {expected_index}", lineno)
        if len(cells) < 2:
            raise ScanFormatError(f"scan {index}: missing intensity", lineno)
        got = len(cells) - 2
        if got != n_bins:
            detail = f"bin {got + 1} missing" if got < n_bins else f"{got - n_bins} extra values"
            raise ScanFormatError(f"scan {index} has {got} bins, expected {n_bins} ({detail})", lineno)
        try:
            values = [float(c) for c in cells[1:]]
        except ValueError as exc:
            raise ScanFormatError(f"scan {index}: {exc}", lineno) from None
        try:
            scans.append(ScanRecord(values[0], np.array(values[1:])))
        except EstimatorError as exc:
            raise ScanFormatError(f"scan {index}: {exc}", lineno) from None
    if not scans:
        raise ScanFormatError("file contains no scans", len(lines) + 1)
    return ScanFile(grid, scans, declared_mean, declared_dispersion)


def read_scans(path) -> ScanFile:
    return parse_scans(Path(path).read_text(encoding="utf-8"))


def energy_label(energy: float) -> str:
    return f"E_{energy:.3f}"


def format_trace(trace: ConvergenceTrace) -> str:
    if trace.energies is None:
        raise ValueError("trace needs control-point energies to be written")
    lines = [
        _meta_line(TRACE_FORMAT, version=FORMAT_VERSION, tool=__version__, start=trace.start_iteration),
        "#control-bins," + ",".join(str(i) for i in trace.control_indices),
        ",".join(["iteration"] + [energy_label(e) for e in trace.energies]),
    ]
    for n, row in zip(trace.iterations, trace.values):
        lines.append(",".join([str(int(n))] + [fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> ConvergenceTrace:
    lines = _split_lines(text)
    if len(lines) < 3:
        raise ScanFormatError("trace file is missing its header", len(lines) + 1)
    fields = _check_version(lines[0], TRACE_FORMAT)
    start = int(fields.get("start", "0"))
    tag, *bins = lines[1][1:].split(",") if lines[1].startswith("#") else ("", [])
    if tag != "control-bins":
        raise ScanFormatError("expected control-bins line", 2)
    header = lines[2].split(",")
    if header[0] != "iteration" or len(header) != len(bins) + 1:
        raise ScanFormatError("column header does not match control bins", 3)
    try:
        energies = [float(h[2:]) for h in header[1:]]
        indices = [int(b) for b in bins]
    except ValueError as exc:
        raise ScanFormatError(str(exc), 3) from None
    rows = []
    for offset, line in enumerate(lines[3:]):
        lineno = offset + 4
        cells = line.split(",")
        if len(cells) != len(header):
            raise ScanFormatError(f"expected {len(header)} columns, got {len(cells)}", lineno)
        if int(cells[0]) != start + offset + 1:
            raise ScanFormatError("iterations must increase by one", lineno)
        rows.append([float(c) for c in cells[1:]])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(indices))
    return ConvergenceTrace(tuple(indices), values, start, np.array(energies))


def write_trace(path, trace: ConvergenceTrace) -> None:
    atomic_write_text(path, format_trace(trace))


def read_trace(path) -> ConvergenceTrace:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


def format_overlay(energies, reference, noisy_scan, estimate, noise_profile) -> str:
    columns = [np.asarray(c, dtype=np.float64) for c in (energies, reference, noisy_scan, estimate, noise_profile)]
    if len({c.shape for c in columns}) != 1:
        raise ValueError("overlay columns must have equal length")
    lines = [_meta_line(OVERLAY_FORMAT, version=FORMAT_VERSION, tool=__version__), ",".join(OVERLAY_COLUMNS)]
    for row in zip(*columns):
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_overlay(text: str) -> dict[str, np.ndarray]:
    lines = _split_lines(text)
    _check_version(lines[0], OVERLAY_FORMAT)
    if len(lines) < 2 or tuple(lines[1].split(",")) != OVERLAY_COLUMNS:
        raise ScanFormatError("unexpected overlay columns", 2)
    data = np.array([[float(c) for c in line.split(",")] for line in lines[2:]], dtype=np.float64)
    data = data.reshape(-1, len(OVERLAY_COLUMNS))
    return {name: data[:, k] for k, name in enumerate(OVERLAY_COLUMNS)}


def read_overlay(path) -> dict[str, np.ndarray]:
    return parse_overlay(Path(path).read_text(encoding="utf-8"))


def emit_plot_data(result, kind: str, path) -> None:
    """Write plot-ready columns for a finished experiment.

    ``kind="overlay"``: energy, reference ``theta_bar * mean_I``, the first
    noisy scan, the SPSA estimate times ``mean_I``, and the noise profile.
    ``kind="trace"``: the convergence trace file.
    """
    if kind == "trace":
        write_trace(path, result.trace)
    elif kind == "overlay":
        mean_i = result.stats.mean_intensity
        text = format_overlay(
            result.grid.energies,
            result.theta_bar * mean_i,
            result.scans[0].photocurrent,
            result.spectra["spsa"] * mean_i,
            result.noise_profile,
        )
        atomic_write_text(path, text)
    else:
        raise ValueError(f"unknown plot kind {kind!r}")


def format_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, payload) -> None:
    atomic_write_text(path, format_json(payload))


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_estimates(path, energies: Sequence[float], spectra: dict[str, np.ndarray]) -> None:
    """Per-bin estimates of every estimator, one column each."""
    names = sorted(spectra)
    lines = [
        _meta_line("snfilter-estimates", version=FORMAT_VERSION, tool=__version__),
        ",".join(["E_kin_eV"] + names),
    ]
    for k, energy in enumerate(energies):
        lines.append(",".join([fmt(energy)] + [fmt(spectra[name][k]) for name in names]))
    atomic_write_text(path, "\n".join(lines) + "\n")
