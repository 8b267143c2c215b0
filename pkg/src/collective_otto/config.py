"""Run configuration: a sectioned key-value (INI) file plus command-line overrides."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .spectra import LINEAR, LMG, MODEL_KINDS, POWERX, ModelSpec, SpinEnsemble, twice
from .steady_state import WEIGHT_PRESETS, normalize_weights, weights_preset
from .work_stats import COLLECTIVE, COUPLINGS, INDEPENDENT, CycleParams

FORMATS = ("csv", "jsonl")


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


# (section, key) for every RunConfig field
_LAYOUT = {
    "model": ("model", "kind"),
    "x": ("model", "x"),
    "gamma_lmg": ("model", "gamma_lmg"),
    "n": ("ensemble", "n"),
    "s": ("ensemble", "s"),
    "omega_c": ("cycle", "omega_c"),
    "omega_h": ("cycle", "omega_h"),
    "beta_c": ("cycle", "beta_c"),
    "beta_h": ("cycle", "beta_h"),
    "delta": ("cycle", "delta"),
    "coupling": ("coupling", "mode"),
    "weights": ("coupling", "weights"),
    "format": ("output", "format"),
    "path": ("output", "path"),
    "precision": ("output", "precision"),
}
_BY_KEY = {f"{sec}.{key}": name for name, (sec, key) in _LAYOUT.items()}


@dataclass(frozen=True)
class RunConfig:
    model: str = LINEAR
    x: int = 1
    gamma_lmg: float = 0.0
    n: int = 1
    s: str = "1/2"
    omega_c: float | None = None
    omega_h: float | None = None
    beta_c: float | None = None
    beta_h: float | None = None
    delta: float | None = None
    coupling: str = COLLECTIVE
    weights: str = "symmetric"
    format: str = "csv"
    path: str = ""
    precision: int = 17

    def validate(self) -> "RunConfig":
        if self.model not in MODEL_KINDS:
            raise ConfigError("model.kind", f"expected one of {MODEL_KINDS}, got {self.model!r}")
        if self.model == POWERX and self.x < 1:
            raise ConfigError("model.x", "must be an integer >= 1")
        if self.n < 1:
            raise ConfigError("ensemble.n", "must be a positive integer")
        try:
            twice(Fraction(self.s))
        except (ValueError, ZeroDivisionError):
            raise ConfigError("ensemble.s", f"not a positive half-integer: {self.s!r}") from None
        for name in ("omega_c", "omega_h", "beta_h"):
            if getattr(self, name) is None:
                raise ConfigError(".".join(_LAYOUT[name]), "is required")
        if (self.beta_c is None) == (self.delta is None):
            raise ConfigError("cycle.beta_c", "exactly one of cycle.beta_c or cycle.delta must be given")
        if not self.omega_c > 0:
            raise ConfigError("cycle.omega_c", "must be positive")
        if not self.omega_h > 0:
            raise ConfigError("cycle.omega_h", "must be positive")
        if self.omega_c > self.omega_h:
            raise ConfigError("cycle.omega_c", f"omega_c={self.omega_c} exceeds omega_h={self.omega_h}")
        if not (self.beta_h >= 0) or not math.isfinite(self.beta_h):
            raise ConfigError("cycle.beta_h", "must be finite and nonnegative")
        if self.delta is not None and not self.delta > 0:
            raise ConfigError("cycle.delta", "must be positive")
        if self.beta_c is not None and not (math.isfinite(self.beta_c) and self.beta_c >= self.beta_h):
            raise ConfigError("cycle.beta_c", "must be finite and not below beta_h")
        if self.coupling not in COUPLINGS:
            raise ConfigError("coupling.mode", f"expected one of {COUPLINGS}")
        if self.coupling == INDEPENDENT and (self.model != LINEAR or self.s != "1/2"):
            raise ConfigError("coupling.mode", "independent coupling needs the linear qubit model")
        if self.coupling == COLLECTIVE:
            try:
                normalize_weights(self.ensemble(), self.weight_map())
            except ValueError as exc:
                raise ConfigError("coupling.weights", str(exc)) from None
        if self.format not in FORMATS:
            raise ConfigError("output.format", f"expected one of {FORMATS}")
        if not 1 <= self.precision <= 17:
            raise ConfigError("output.precision", "must be between 1 and 17")
        return self

    def model_spec(self) -> ModelSpec:
        if self.model == POWERX:
            return ModelSpec.power(self.x)
        if self.model == LMG:
            return ModelSpec.lmg(self.gamma_lmg)
        return ModelSpec.linear()

    def ensemble(self) -> SpinEnsemble:
        return SpinEnsemble.of(self.n, Fraction(self.s))

    def weight_map(self) -> dict | None:
        if self.coupling != COLLECTIVE:
            return None
        if self.weights in WEIGHT_PRESETS:
            return weights_preset(self.weights, self.ensemble())
        out = {}
        for item in self.weights.split(","):
            j, _, w = item.partition(":")
            if not w:
                raise ValueError(f"expected 'j:weight' pairs or a preset, got {self.weights!r}")
            out[Fraction(j.strip())] = float(w)
        return out

    @property
    def weights_label(self) -> str:
        return self.weights

    def resolved_beta_c(self) -> float:
        if self.beta_c is not None:
            return self.beta_c
        return (self.beta_h * self.omega_h + self.delta) / self.omega_c

    def cycle_params(self) -> CycleParams:
        self.validate()
        try:
            return CycleParams.make(self.model_spec(), self.ensemble(), self.omega_c, self.omega_h,
                                    self.resolved_beta_c(), self.beta_h, self.coupling, self.weight_map())
        except ValueError as exc:
            raise ConfigError("cycle", str(exc)) from None

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        for name, (section, key) in _LAYOUT.items():
            value = getattr(self, name)
            if value is None:
                continue
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, key, repr(value) if isinstance(value, float) else str(value))
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def with_overrides(self, overrides: dict[str, str]) -> "RunConfig":
        """Apply ``{"section.key": "text"}`` overrides; ``None`` values remove a key."""
        changes = {}
        for dotted, text in overrides.items():
            if dotted not in _BY_KEY:
                raise ConfigError(dotted, "unknown configuration key")
            name = _BY_KEY[dotted]
            changes[name] = None if text is None else _coerce(name, text, dotted)
        return replace(self, **changes)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, text: str, where: str):
    kind = _FIELD_TYPES[name]
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind in ("float", "float | None"):
            return float(text)
    except ValueError:
        raise ConfigError(where, f"cannot parse {text!r}") from None
    return text


def parse_ini(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None
    overrides = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            overrides[f"{section}.{key}"] = value
    return RunConfig().with_overrides(overrides)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("file", f"cannot read {path}: {exc.strerror}") from None
    return parse_ini(text)


def preset_text(name: str) -> str:
    ref = resources.files("collective_otto") / "presets" / f"{name}.preset"
    if not ref.is_file():
        raise ConfigError("preset", f"unknown preset {name!r}")
    return ref.read_text()


def load_preset(name: str) -> RunConfig:
    return parse_ini(preset_text(name))
