"""Experiment configuration: schema, strict parsing, canonical serialisation.

Configs are plain nested mappings (JSON or YAML on disk).  Parsing is
strict: unknown keys and malformed values raise ConfigError with the path
of the offending field so batch users can locate mistakes.  Serialisation
is canonical JSON-ready data; parse(serialize(cfg)) reproduces cfg exactly.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import engine, levels
from .ensemble import InhomogeneousProfile
from .errors import ConfigError
from .levels import RateParams, ZeemanConfig
from .sequence import (
    DriveCalibration,
    PumpPulse,
    ReadoutPulse,
    RFPulse,
    StimulationPulse,
    WaitPulse,
)

__all__ = [
    "ExperimentConfig",
    "OutputSpec",
    "SweepSpec",
    "parse_config",
    "parse_config_file",
    "serialize_config",
    "apply_override",
]


@dataclass(frozen=True)
class SweepSpec:
    """Repeat the scenario with one config field stepped through values.

    path uses dotted keys with optional list indices, e.g.
    ``sequence[2].voltage_Vpp`` or ``drive.stim_detuning_MHz``.
    """

    path: str
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError("sweep values must be non-empty")


@dataclass(frozen=True)
class OutputSpec:
    spectra: bool = True
    trace_window_MHz: tuple | None = None
    metrics_window_MHz: tuple | None = None
    sweep: SweepSpec | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    zeeman: ZeemanConfig
    rates: RateParams
    profile: InhomogeneousProfile
    sequence: tuple
    outputs: OutputSpec = OutputSpec()
    drive: DriveCalibration = DriveCalibration()
    target_od: float | None = 1.0
    probe_linewidth_MHz: float = 1.0
    dt_max_ms: float | None = None
    seed: int = 0


_PULSE_KINDS = {
    "pump": (
        PumpPulse,
        {
            "start_ms": 0.0,
            "duration_ms": None,
            "center_MHz": None,
            "power_rate_per_ms": None,
            "sweep_span_MHz": 0.0,
            "sweep_period_ms": 0.0,
            "gate_gap_MHz": 0.0,
        },
    ),
    "stimulation": (
        StimulationPulse,
        {"start_ms": 0.0, "duration_ms": None, "power_mW": None},
    ),
    "rf": (
        RFPulse,
        {
            "start_ms": 0.0,
            "duration_ms": None,
            "center_MHz": None,
            "bandwidth_MHz": None,
            "voltage_Vpp": None,
            "sweep_period_ms": 0.001,
        },
    ),
    "wait": (WaitPulse, {"start_ms": 0.0, "duration_ms": None}),
    "readout": (
        ReadoutPulse,
        {"f_start_MHz": None, "f_stop_MHz": None, "n_points": None, "at_delay_ms": None},
    ),
}


def _require_mapping(obj, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected a mapping, got {type(obj).__name__}")
    return obj


def _check_keys(d, allowed, path):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else str(key), "unknown key")


def _number(value, path, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _window(value, path):
    if value is None:
        return None
    if (not isinstance(value, (list, tuple)) or len(value) != 2):
        raise ConfigError(path, "expected [low_MHz, high_MHz]")
    lo = _number(value[0], f"{path}[0]")
    hi = _number(value[1], f"{path}[1]")
    if not hi > lo:
        raise ConfigError(path, "window high must exceed low")
    return (lo, hi)


def _build_section(raw, path, cls, defaults):
    """Parse a purely numeric section against a {key: default} whitelist."""
    raw = _require_mapping(raw, path)
    _check_keys(raw, set(defaults), path)
    kwargs = {}
    for key, default in defaults.items():
        if key in raw:
            kwargs[key] = _number(raw[key], f"{path}.{key}")
        elif default is None:
            raise ConfigError(f"{path}.{key}", "missing required key")
        else:
            kwargs[key] = default
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_pulse(raw, path):
    raw = _require_mapping(raw, path)
    kind = raw.get("kind")
    if kind not in _PULSE_KINDS:
        raise ConfigError(
            f"{path}.kind", f"expected one of {sorted(_PULSE_KINDS)}, got {kind!r}"
        )
    cls, fields_ = _PULSE_KINDS[kind]
    body = {k: v for k, v in raw.items() if k != "kind"}
    _check_keys(body, set(fields_), path)
    kwargs = {}
    for key, default in fields_.items():
        if key in body:
            val = body[key]
        elif default is None:
            raise ConfigError(f"{path}.{key}", "missing required key")
        else:
            val = default
        if key == "n_points":
            kwargs[key] = _integer(val, f"{path}.{key}")
        else:
            kwargs[key] = _number(val, f"{path}.{key}")
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


_TOP_KEYS = {
    "zeeman", "rates", "profile", "sequence", "outputs", "drive",
    "target_od", "probe_linewidth_MHz", "dt_max_ms", "seed",
}

_ZEEMAN_DEFAULTS = {
    "field_mT": None,
    "theta_deg": 135.0,
    "g_ground": 12.0,
    "g_excited": 8.0,
    "bohr_MHz_per_mT": 13.996,
}

_RATES_DEFAULTS = {
    "t1_ms": None,
    "tz_ms": None,
    "beta": None,
    "beta_z2": "default",
    "sigma_scale": 1.0,
    "persistent_fraction": 0.0,
    "persistent_leak_scale": levels.PERSISTENT_LEAK_SCALE,
}

_PROFILE_DEFAULTS = {
    "center_MHz": 0.0,
    "fwhm_MHz": 1000.0,
    "shape": "flat",
    "grid_span_MHz": 500.0,
    "grid_step_MHz": 0.5,
}

_DRIVE_DEFAULTS = {
    "pump_linewidth_MHz": 1.0,
    "stim_slope_per_mW_ms": engine.DEFAULT_STIM_SLOPE_PER_MW_MS,
    "stim_detuning_MHz": 0.0,
    "stim_response_fwhm_MHz": 14000.0,
    "rf_coupling_per_V2_ms": engine.DEFAULT_RF_COUPLING_PER_V2_MS,
}


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw mapping into an ExperimentConfig.

    Raises ConfigError with a dotted field path for unknown keys, missing
    required keys, type errors, and any value a model type rejects.
    """
    raw = _require_mapping(raw, "")
    _check_keys(raw, _TOP_KEYS, "")
    for key in ("zeeman", "rates", "profile", "sequence"):
        if key not in raw:
            raise ConfigError(key, "missing required section")

    zeeman = _build_section(raw["zeeman"], "zeeman", ZeemanConfig, _ZEEMAN_DEFAULTS)

    rates_raw = _require_mapping(raw["rates"], "rates")
    _check_keys(rates_raw, set(_RATES_DEFAULTS), "rates")
    rates_kw = {}
    for key, default in _RATES_DEFAULTS.items():
        if key in rates_raw:
            rates_kw[key] = _number(rates_raw[key], f"rates.{key}",
                                    allow_none=(key == "beta_z2"))
        elif default is None:
            raise ConfigError(f"rates.{key}", "missing required key")
        elif default == "default":
            rates_kw[key] = None
        else:
            rates_kw[key] = default
    try:
        rates = RateParams(**rates_kw)
    except ValueError as exc:
        raise ConfigError("rates", str(exc)) from exc

    profile_raw = _require_mapping(raw["profile"], "profile")
    _check_keys(profile_raw, set(_PROFILE_DEFAULTS), "profile")
    profile_kw = {}
    for key, default in _PROFILE_DEFAULTS.items():
        val = profile_raw.get(key, default)
        if key == "shape":
            if not isinstance(val, str):
                raise ConfigError(f"profile.{key}", f"expected a string, got {val!r}")
            profile_kw[key] = val
        else:
            profile_kw[key] = _number(val, f"profile.{key}")
    try:
        profile = InhomogeneousProfile(**profile_kw)
    except ValueError as exc:
        raise ConfigError("profile", str(exc)) from exc

    drive = _build_section(raw.get("drive", {}), "drive", DriveCalibration, _DRIVE_DEFAULTS)

    seq_raw = raw["sequence"]
    if not isinstance(seq_raw, (list, tuple)):
        raise ConfigError("sequence", "expected a list of pulses")
    sequence = tuple(
        _parse_pulse(p, f"sequence[{i}]") for i, p in enumerate(seq_raw)
    )

    outputs_raw = _require_mapping(raw.get("outputs", {}), "outputs")
    _check_keys(
        outputs_raw,
        {"spectra", "trace_window_MHz", "metrics_window_MHz", "sweep"},
        "outputs",
    )
    spectra_flag = outputs_raw.get("spectra", True)
    if not isinstance(spectra_flag, bool):
        raise ConfigError("outputs.spectra", f"expected a boolean, got {spectra_flag!r}")
    sweep = None
    if outputs_raw.get("sweep") is not None:
        sweep_raw = _require_mapping(outputs_raw["sweep"], "outputs.sweep")
        _check_keys(sweep_raw, {"path", "values"}, "outputs.sweep")
        if "path" not in sweep_raw or "values" not in sweep_raw:
            raise ConfigError("outputs.sweep", "sweep needs 'path' and 'values'")
        if not isinstance(sweep_raw["path"], str):
            raise ConfigError("outputs.sweep.path", "expected a string")
        if not isinstance(sweep_raw["values"], (list, tuple)) or not sweep_raw["values"]:
            raise ConfigError("outputs.sweep.values", "expected a non-empty list")
        values = tuple(
            _number(v, f"outputs.sweep.values[{i}]")
            for i, v in enumerate(sweep_raw["values"])
        )
        sweep = SweepSpec(path=sweep_raw["path"], values=values)
    outputs = OutputSpec(
        spectra=spectra_flag,
        trace_window_MHz=_window(outputs_raw.get("trace_window_MHz"), "outputs.trace_window_MHz"),
        metrics_window_MHz=_window(
            outputs_raw.get("metrics_window_MHz"), "outputs.metrics_window_MHz"
        ),
        sweep=sweep,
    )

    target_od = _number(raw.get("target_od", 1.0), "target_od", allow_none=True)
    probe_lw = _number(raw.get("probe_linewidth_MHz", 1.0), "probe_linewidth_MHz")
    if probe_lw <= 0:
        raise ConfigError("probe_linewidth_MHz", "must be > 0")
    dt_max = _number(raw.get("dt_max_ms"), "dt_max_ms", allow_none=True)
    if dt_max is not None and dt_max <= 0:
        raise ConfigError("dt_max_ms", "must be > 0")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed", f"expected an integer, got {seed!r}")

    return ExperimentConfig(
        zeeman=zeeman,
        rates=rates,
        profile=profile,
        sequence=sequence,
        outputs=outputs,
        drive=drive,
        target_od=target_od,
        probe_linewidth_MHz=probe_lw,
        dt_max_ms=dt_max,
        seed=seed,
    )


def parse_config_file(path) -> ExperimentConfig:
    """Load a JSON or YAML config file."""
    text = Path(path).read_text()
    if str(path).endswith((".yaml", ".yml")):
        raw = yaml.safe_load(text)
    else:
        raw = json.loads(text)
    return parse_config(raw)


def _pulse_dict(pulse) -> dict:
    for kind, (cls, fields_) in _PULSE_KINDS.items():
        if type(pulse) is cls:
            d = {"kind": kind}
            d.update({k: getattr(pulse, k) for k in fields_})
            return d
    raise TypeError(f"not a pulse: {pulse!r}")


def serialize_config(cfg: ExperimentConfig) -> dict:
    """Canonical mapping representation; JSON- and YAML-serialisable."""
    out = {
        "zeeman": {k: getattr(cfg.zeeman, k) for k in _ZEEMAN_DEFAULTS},
        "rates": {k: getattr(cfg.rates, k) for k in _RATES_DEFAULTS},
        "profile": {k: getattr(cfg.profile, k) for k in _PROFILE_DEFAULTS},
        "drive": {k: getattr(cfg.drive, k) for k in _DRIVE_DEFAULTS},
        "sequence": [_pulse_dict(p) for p in cfg.sequence],
        "outputs": {
            "spectra": cfg.outputs.spectra,
            "trace_window_MHz": list(cfg.outputs.trace_window_MHz)
            if cfg.outputs.trace_window_MHz else None,
            "metrics_window_MHz": list(cfg.outputs.metrics_window_MHz)
            if cfg.outputs.metrics_window_MHz else None,
            "sweep": {
                "path": cfg.outputs.sweep.path,
                "values": list(cfg.outputs.sweep.values),
            } if cfg.outputs.sweep else None,
        },
        "target_od": cfg.target_od,
        "probe_linewidth_MHz": cfg.probe_linewidth_MHz,
        "dt_max_ms": cfg.dt_max_ms,
        "seed": cfg.seed,
    }
    return out


_PATH_TOKEN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)((?:\[\d+\])*)$")


def apply_override(raw: dict, path: str, value) -> dict:
    """Return a copy of a raw config mapping with one field replaced.

    Understands dotted paths with list indices, e.g.
    ``sequence[1].duration_ms``.
    """
    out = copy.deepcopy(raw)
    node = out
    parts = path.split(".")
    for i, part in enumerate(parts):
        m = _PATH_TOKEN.match(part)
        if not m:
            raise ConfigError(path, f"malformed override path near {part!r}")
        key, idx_part = m.group(1), m.group(2)
        last = i == len(parts) - 1
        indices = [int(s) for s in re.findall(r"\[(\d+)\]", idx_part)]
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(path, f"no such key {key!r}")
        if not indices and last:
            node[key] = value
            return out
        node = node[key]
        for j, ix in enumerate(indices):
            if not isinstance(node, list) or ix >= len(node):
                raise ConfigError(path, f"index {ix} out of range at {key!r}")
            if last and j == len(indices) - 1:
                node[ix] = value
                return out
            node = node[ix]
    raise ConfigError(path, "path resolved to nothing")
