"""Run configuration: JSON loading, schema validation, per-command defaults."""
from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema

SCHEMA_VERSION = 1

DEFAULTS = {
    "seed": 0,
    "output_dir": "out",
    "quiet": False,
    "tolerances": {"integration": 1e-10, "newton": 1e-10, "regularity_floor": 1e-4},
    "flow": {"n_samples": 10000, "n_orbits": 200, "tau_max": 60.0, "cluster_eps": 1e-4, "tube_radius": 0.1,
             "f_tilde": None, "n_plot_orbits": 12, "orbit_tau": 20.0},
    "escape": {"eps": 0.05, "delta": None, "tube_radius": None, "f_tilde": None, "t1_cap": 200.0,
               "n_samples": 10000, "fd_step": 1e-3, "interval": True, "interval_step": 0.05,
               "interval_samples": 1000, "interval_refine": 3},
    "qsim": {"v0": "x1^2/(2*h0)", "n_times": 401, "mode": "effective", "dt": 0.05, "method": "eig",
             "initial": {"type": "coherent", "z": [2.8284271247461903, 0.0, -2.8284271247461903, 0.0]},
             "leak_cap": 1e-6, "top_bands": 5, "time_origin": "blowdown", "fit_start": 1.0},
    "average": {"nodes": 256, "grid": {"n": 64, "radius": [1.0, 4.0]}, "seminorm": None},
}

REQUIRED = {
    "flow": ["h", "e0"],
    "escape": ["h", "e0"],
    "qsim": ["qsim"],
    "average": ["average"],
}

# fields that do not influence results and are left out of the report echo
NON_RESULT_FIELDS = ("output_dir", "quiet")


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


def load_schema() -> dict:
    text = resources.files("sobolev_escape.cli").joinpath("config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str | Path, command: str, overrides: dict | None = None) -> dict:
    """Read, validate and complete a run configuration for ``command``."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return resolve_config(raw, command, overrides)


def resolve_config(raw: dict, command: str, overrides: dict | None = None) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "(top level)"
        raise ConfigError(f"config field {where}: {exc.message}") from None
    if "command" in raw and raw["command"] != command:
        raise ConfigError(f"config is for command {raw['command']!r}, not {command!r}")
    for field in REQUIRED[command]:
        if field not in raw:
            raise ConfigError(f"missing required field {field!r} for command {command!r}")
    sections = {"flow": ["flow"], "escape": ["flow", "escape"], "qsim": ["qsim"], "average": ["average"]}[command]
    cfg = {"schema_version": SCHEMA_VERSION, "command": command}
    for key in ("seed", "output_dir", "quiet", "tolerances"):
        cfg[key] = _merge(DEFAULTS[key], raw[key]) if isinstance(DEFAULTS[key], dict) and key in raw \
            else raw.get(key, copy.deepcopy(DEFAULTS[key]))
    for key in ("h", "e0"):
        if key in raw:
            cfg[key] = raw[key]
    for sec in sections:
        cfg[sec] = _merge(DEFAULTS[sec], raw.get(sec, {}))
    return cfg


def echo(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in NON_RESULT_FIELDS}
