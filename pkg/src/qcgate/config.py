"""Flat ``key = value`` experiment configuration.

Layers are applied in order: built-in defaults for the scenario, then a
config file, then inline overrides. Lists are comma separated and ``#``
starts a comment.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .hamiltonians import FLOQUET_CONVENTIONS, PROTOCOL_KINDS
from .metrics import NORMS
from .ramps import RAMP_KINDS

SCENARIOS = (
    "duration_sweep",
    "dynamical",
    "cost_sweep",
    "timing_sweep",
    "dephasing_sweep",
    "bloch",
    "sequence",
    "cz",
)
GATES = ("hadamard", "cz")
TIMING_SEMANTICS = ("extend", "stretch", "clamp")
DEPHASING_MODES = ("fixed_tau", "fixed_gamma")
IE_DEPHASING = ("all", "first")
INTEGRATOR_CHOICES = ("magnus4", "midpoint")
CD_METHODS = ("variational", "exact")
INPUT_STATES = ("plus", "minus", "zero", "one")
FORMATS = ("csv", "json")

ALIASES = {"protocol": "protocols", "fmt": "format"}


class ConfigError(ValueError):
    """Bad key or value; ``key`` names the offender."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "duration_sweep"
    protocols: tuple = ("uncontrolled", "cd", "fe", "ie")
    gate: str = "hadamard"
    ramp: str = "linear"
    ramps: tuple = RAMP_KINDS
    tau: float = 1.0
    tau_min: float = 0.1
    tau_max: float = 10.0
    tau_points: int = 40
    ratio: float = 200.0
    floquet_convention: str = "first_harmonic"
    agp_order: int = 1
    cd_method: str = "variational"
    norm: str = "trace"
    eps_max: float = 0.3
    eps_step: float = 0.01
    timing_semantics: str = "extend"
    gamma_tau_max: float = 5.0
    gamma_points: int = 26
    gamma: float = 1.0
    gamma_tau: float = 0.0
    dephasing_mode: str = "fixed_tau"
    ie_dephasing: str = "all"
    input_state: str = "plus"
    steps_per_unit: int = 1000
    integrator: str = "magnus4"
    threads: int = 0
    record_runtime: bool = True
    format: str = "csv"
    output: str = "-"

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_text(self) -> str:
        return "\n".join(f"{k} = {_format_value(v)}" for k, v in self.as_dict().items()) + "\n"


SCENARIO_DEFAULTS = {
    "duration_sweep": {},
    "dynamical": {},
    "cost_sweep": {"protocols": ("cd", "fe", "ie"), "tau_min": 0.05, "tau_max": 20.0},
    "timing_sweep": {"protocols": ("ie",)},
    "dephasing_sweep": {"protocols": ("cd", "ie")},
    "bloch": {"protocols": ("cd", "ie")},
    "sequence": {"protocols": ("cd",)},
    "cz": {"protocols": ("cd", "ie"), "gate": "cz"},
}

_CHOICES = {
    "scenario": SCENARIOS,
    "protocols": PROTOCOL_KINDS,
    "gate": GATES,
    "ramp": RAMP_KINDS,
    "ramps": RAMP_KINDS,
    "floquet_convention": FLOQUET_CONVENTIONS,
    "cd_method": CD_METHODS,
    "norm": NORMS,
    "timing_semantics": TIMING_SEMANTICS,
    "dephasing_mode": DEPHASING_MODES,
    "ie_dephasing": IE_DEPHASING,
    "input_state": INPUT_STATES,
    "integrator": INTEGRATOR_CHOICES,
    "format": FORMATS,
}

_POSITIVE = {"tau", "tau_min", "tau_max", "tau_points", "ratio", "eps_step", "gamma_points", "steps_per_unit",
             "agp_order", "gamma"}
_NONNEGATIVE = {"eps_max", "gamma_tau_max", "gamma_tau", "threads"}


def valid_keys() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _canonical_key(key: str) -> str:
    key = key.strip().replace("-", "_")
    key = ALIASES.get(key, key)
    if key not in valid_keys():
        raise ConfigError(f"unknown key {key!r}; valid keys: {', '.join(valid_keys())}", key)
    return key


def _parse_value(key: str, raw: str):
    default = getattr(ExperimentConfig(), key)
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            value = low in ("true", "1", "yes")
        elif isinstance(default, tuple):
            value = tuple(x.strip().lower() for x in raw.split(",") if x.strip())
            if not value:
                raise ValueError("empty list")
        elif isinstance(default, int):
            value = int(raw)
        elif isinstance(default, float):
            value = float(raw)
        else:
            value = raw if key == "output" else raw.lower()
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for key {key!r}", key) from None
    return value


def _validate_field(key: str, value) -> None:
    choices = _CHOICES.get(key)
    if choices is not None:
        items = value if isinstance(value, tuple) else (value,)
        for item in items:
            if item not in choices:
                raise ConfigError(
                    f"invalid value {item!r} for key {key!r}: expected {'|'.join(choices)}", key
                )
    if key in _POSITIVE and not value > 0:
        raise ConfigError(f"key {key!r} must be positive, got {value!r}", key)
    if key in _NONNEGATIVE and not value >= 0:
        raise ConfigError(f"key {key!r} must be non-negative, got {value!r}", key)


def parse_pairs(lines) -> dict:
    """Parse ``key = value`` lines (comments and blank lines ignored)."""
    out = {}
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = text.split("=", 1)
        key = _canonical_key(key)
        out[key] = _parse_value(key, raw)
    return out


def load_file(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_pairs(text.splitlines())


def parse_overrides(items) -> dict:
    """Overrides given as ``key=value`` or ``--key=value`` strings."""
    out = {}
    for item in items:
        text = item[2:] if item.startswith("--") else item
        if "=" not in text:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw = text.split("=", 1)
        key = _canonical_key(key)
        out[key] = _parse_value(key, raw)
    return out


def resolve(scenario: str, file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults < file < overrides and validate every field."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}", "scenario")
    merged = {"scenario": scenario, **SCENARIO_DEFAULTS[scenario]}
    merged.update(file_values or {})
    merged.update(overrides or {})
    merged["scenario"] = scenario
    cfg = replace(ExperimentConfig(), **merged)
    for key, value in cfg.as_dict().items():
        _validate_field(key, value)
    if cfg.tau_min > cfg.tau_max:
        raise ConfigError("tau_min exceeds tau_max", "tau_min")
    if cfg.eps_max > 0.5:
        raise ConfigError("eps_max must not exceed 0.5", "eps_max")
    if cfg.scenario in ("bloch", "dephasing_sweep", "timing_sweep", "sequence") and cfg.gate != "hadamard":
        raise ConfigError(f"scenario {cfg.scenario!r} is defined for the hadamard gate only", "gate")
    if cfg.scenario == "cz" and cfg.gate != "cz":
        raise ConfigError("scenario 'cz' needs gate = cz", "gate")
    return cfg
