"""INI-style experiment configuration.

Every key is optional and falls back to the default shown by
``snfilter config``. Unknown sections or keys are errors. The seed has no
default; it must come from ``[experiment] seed`` or ``--seed``.
"""
from __future__ import annotations

import configparser
from dataclasses import fields
from pathlib import Path

from .errors import ConfigError
from .harness import ExperimentConfig
from .spectrum import (
    DisturbanceModel,
    DOSModel,
    EnergyGrid,
    IntensityModel,
    NoiseProfile,
    Peak,
)

ENV_VAR = "SNFILTER_CONFIG"


def _bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    return int(text.strip())


def _float(text):
    return float(text.strip())


def _guess(text):
    items = [v for v in text.replace(",", " ").split()]
    if len(items) == 1:
        return float(items[0])
    return tuple(float(v) for v in items)


def _peaks(text):
    text = text.strip()
    if text.lower() in ("", "none"):
        return ()
    peaks = []
    for chunk in text.split(";"):
        parts = chunk.split()
        if len(parts) not in (3, 4):
            raise ValueError(f"peak {chunk.strip()!r} needs 'center width amplitude [shape]'")
        peaks.append(Peak(float(parts[0]), float(parts[1]), float(parts[2]), *(parts[3:] or ["gaussian"])))
    return tuple(peaks)


def _table(text):
    text = text.strip()
    if not text:
        return ()
    pairs = []
    for item in text.split(","):
        energy, sep, value = item.partition(":")
        if not sep:
            raise ValueError(f"table entry {item.strip()!r} needs 'energy:value'")
        pairs.append((float(energy), float(value)))
    return tuple(pairs)


def _controls(text):
    text = text.strip()
    if text.lower() in ("", "auto"):
        return None
    return tuple(float(v) for v in text.replace(",", " ").split())


def _fmt_peaks(peaks):
    return "; ".join(f"{p.center_ev!r} {p.width_ev!r} {p.amplitude!r} {p.shape.value}" for p in peaks) or "none"


# section -> key -> (parser, formatter for defaults, help)
SCHEMA = {
    "experiment": {
        "n_scans": (_int, repr, "number of simulated scans"),
        "seed": (_int, None, "RNG seed (required here or via --seed)"),
        "initial_guess": (_guess, repr, "starting estimate: one number, or one per bin"),
    },
    "grid": {
        "start_ev": (_float, repr, "first bin, eV"),
        "stop_ev": (_float, repr, "last bin, eV"),
        "step_ev": (_float, repr, "bin spacing, eV"),
    },
    "dos": {
        "peaks": (_peaks, _fmt_peaks, "'center width amplitude [gaussian|lorentzian]' separated by ';'"),
        "background": (_float, repr, "flat DOS floor"),
        "scale_const": (_float, repr, "factor folded into the DOS"),
    },
    "intensity": {
        "mean": (_float, repr, "mean excitation intensity"),
        "half_width_frac": (_float, repr, "draws lie in mean*(1 +/- h), 0 < h < 1"),
        "distribution": (str.strip, lambda v: v.value, "two_point | uniform | truncated_gaussian"),
    },
    "noise": {
        "enabled": (_bool, lambda v: str(v).lower(), "add systematic noise"),
        "lo_ev": (_float, repr, "noise window start, eV"),
        "hi_ev": (_float, repr, "noise window end, eV"),
        "amplitude": (_float, repr, "peak height of the raised-cosine bump"),
        "pedestal": (_float, repr, "fraction of amplitude kept at the window edges"),
        "jitter": (_float, repr, "per-scan relative amplitude jitter, 0 = deterministic"),
        "table": (_table, lambda v: ", ".join(f"{e!r}:{x!r}" for e, x in v), "optional 'energy:value, ...' shape"),
    },
    "disturbance": {
        "sigma_w": (_float, repr, "std of the per-scan signal disturbance"),
    },
    "estimator": {
        "stats_policy": (str.strip, str, "fixed (model values) | empirical (from the scans)"),
        "control_points": (_controls, lambda v: "auto" if v is None else ", ".join(map(repr, v)), "energies in eV, or auto (12 evenly spaced)"),
        "stabilization_rel_tol": (_float, repr, "relative tolerance for the stabilization check"),
        "stabilization_window": (_int, repr, "iterations in the stabilization window"),
    },
}

_MODEL_SECTIONS = {
    "grid": EnergyGrid,
    "dos": DOSModel,
    "intensity": IntensityModel,
    "noise": NoiseProfile,
    "disturbance": DisturbanceModel,
}


def _defaults():
    base = ExperimentConfig()
    values = {
        "experiment": {"n_scans": base.n_scans, "seed": None, "initial_guess": base.initial_guess},
        "estimator": {
            "stats_policy": base.stats_policy,
            "control_points": base.control_points,
            "stabilization_rel_tol": base.stabilization_rel_tol,
            "stabilization_window": base.stabilization_window,
        },
    }
    for section, _ in _MODEL_SECTIONS.items():
        model = getattr(base, section)
        values[section] = {f.name: getattr(model, f.name) for f in fields(model)}
    return values


def default_config_text() -> str:
    """The full default configuration, as a commented config file."""
    lines = []
    for section, keys in SCHEMA.items():
        defaults = _defaults()[section]
        lines.append(f"[{section}]")
        for key, (_, formatter, doc) in keys.items():
            lines.append(f"# {doc}")
            value = defaults[key]
            if formatter is None or value is None:
                lines.append(f"# {key} =")
            else:
                lines.append(f"{key} = {formatter(value)}")
        lines.append("")
    return "\n".join(lines)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    values = _defaults()
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", key=section)
        for key, raw in parser.items(section):
            name = f"{section}.{key}"
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {name}", key=name)
            convert = SCHEMA[section][key][0]
            try:
                values[section][key] = convert(raw)
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"bad value {raw.strip()!r}: {exc}", key=name) from None

    models = {}
    for section, cls in _MODEL_SECTIONS.items():
        try:
            models[section] = cls(**values[section])
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), key=section) from None
    exp, est = values["experiment"], values["estimator"]
    return ExperimentConfig(
        n_scans=exp["n_scans"],
        seed=exp["seed"],
        initial_guess=exp["initial_guess"],
        control_points=est["control_points"],
        stats_policy=est["stats_policy"],
        stabilization_rel_tol=est["stabilization_rel_tol"],
        stabilization_window=est["stabilization_window"],
        **models,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))
