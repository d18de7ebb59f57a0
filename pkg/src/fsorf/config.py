"""Experiment configuration: YAML loading, defaults and validation.

Validation never stops at the first problem; :class:`ConfigError` carries every
offending field as ``section.field: message``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .actor_critic import ActorCriticParams
from .atmosphere import WeatherParams
from .dqn import DqnParams
from .ensemble import EnsembleConfig
from .environment import EnvConfig
from .forecast import ForecastParams

AGENT_KINDS = ("myopic", "actor_critic", "dqn", "dqn_ensemble")


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  {e}" for e in self.errors))


@dataclass(frozen=True)
class MyopicParams:
    p: float = 0.5

    def validate(self) -> list[str]:
        return [] if 0.0 <= self.p <= 1.0 else ["p must be in [0, 1]"]


@dataclass(frozen=True)
class ExperimentConfig:
    agent: str = "dqn"
    episodes: int = 600
    seed: int = 1
    output_dir: str = "runs"
    env: EnvConfig = field(default_factory=EnvConfig)
    weather: WeatherParams = field(default_factory=WeatherParams)
    myopic: MyopicParams = field(default_factory=MyopicParams)
    actor_critic: ActorCriticParams = field(default_factory=ActorCriticParams)
    dqn: DqnParams = field(default_factory=DqnParams)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    forecast: ForecastParams = field(default_factory=ForecastParams)

    def validate(self) -> list[str]:
        errors = self._validate_top()
        for name in SECTIONS:
            errors.extend(f"{name}.{e}" for e in getattr(self, name).validate())
        return errors

    def _validate_top(self) -> list[str]:
        errors = []
        if self.agent not in AGENT_KINDS:
            errors.append(f"agent: must be one of {', '.join(AGENT_KINDS)}")
        if not isinstance(self.episodes, int) or self.episodes < 1:
            errors.append("episodes: must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            errors.append("seed: must be an integer >= 0")
        return errors

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


SECTIONS = {
    "env": EnvConfig,
    "weather": WeatherParams,
    "myopic": MyopicParams,
    "actor_critic": ActorCriticParams,
    "dqn": DqnParams,
    "ensemble": EnsembleConfig,
    "forecast": ForecastParams,
}
TOP_LEVEL = ("agent", "episodes", "seed", "output_dir")
TUPLE_FIELDS = {"hidden_dims", "visibilities_km"}


def default_config_text() -> str:
    return resources.files("fsorf").joinpath("default_config.yaml").read_text(encoding="utf-8")


def _unchecked(cls, values: dict):
    """Instance of a frozen dataclass built without running ``__post_init__``."""
    obj = object.__new__(cls)
    for f in dataclasses.fields(cls):
        if f.name in values:
            v = values[f.name]
        elif f.default is not dataclasses.MISSING:
            v = f.default
        else:
            v = f.default_factory()
        object.__setattr__(obj, f.name, v)
    return obj


def _coerce(name, value):
    if name in TUPLE_FIELDS and isinstance(value, list):
        return tuple(value)
    if name == "regimes" and isinstance(value, list):
        return tuple(tuple(r) if isinstance(r, list) else r for r in value)
    return value


def _check_types(cls, values: dict, section: str) -> list[str]:
    errors = []
    defaults = {f.name: f for f in dataclasses.fields(cls)}
    for key, v in values.items():
        f = defaults[key]
        d = f.default if f.default is not dataclasses.MISSING else None
        if isinstance(d, bool) or d is None:
            continue
        if isinstance(d, (int, float)) and (isinstance(v, bool) or not isinstance(v, (int, float))):
            errors.append(f"{section}.{key}: expected a number, got {v!r}")
        elif isinstance(d, int) and not isinstance(d, bool) and isinstance(v, float) and not v.is_integer():
            errors.append(f"{section}.{key}: expected an integer, got {v!r}")
        elif isinstance(d, str) and not isinstance(v, str):
            errors.append(f"{section}.{key}: expected a string, got {v!r}")
        elif isinstance(d, tuple) and not isinstance(v, (tuple, list)):
            errors.append(f"{section}.{key}: expected a list, got {v!r}")
    return errors


def _section(cls, name: str, raw, errors: list):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        errors.append(f"{name}: expected a mapping, got {type(raw).__name__}")
        return cls()
    known = {f.name for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in known:
            errors.append(f"{name}.{key}: unknown key")
    values = {k: _coerce(k, v) for k, v in raw.items() if k in known}
    type_errors = _check_types(cls, values, name)
    errors.extend(type_errors)
    if type_errors:
        return _unchecked(cls, {})
    # integer-valued floats from YAML (e.g. 1e6) become ints where the default is an int
    for k, v in list(values.items()):
        d = next(f.default for f in dataclasses.fields(cls) if f.name == k)
        if isinstance(d, int) and not isinstance(d, bool) and isinstance(v, float):
            values[k] = int(v)
    obj = _unchecked(cls, values)
    try:
        sub = obj.validate()
    except (TypeError, ValueError) as exc:
        errors.append(f"{name}: malformed value ({exc})")
        return obj
    errors.extend(f"{name}.{e}" for e in sub)
    if sub:
        return obj
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        errors.append(f"{name}: {exc}")
        return obj


def from_dict(data: dict | None, base: dict | None = None) -> ExperimentConfig:
    """Build and validate a config; ``data`` overrides ``base`` (default: the shipped YAML)."""
    merged = merge(base if base is not None else yaml.safe_load(default_config_text()), data or {})
    errors: list[str] = []
    for key in merged:
        if key not in TOP_LEVEL and key not in SECTIONS:
            errors.append(f"{key}: unknown key")
    top = {k: merged[k] for k in TOP_LEVEL if k in merged}
    for k in ("episodes", "seed"):
        v = top.get(k)
        if isinstance(v, float) and v.is_integer():
            top[k] = int(v)
    sections = {name: _section(cls, name, merged.get(name), errors) for name, cls in SECTIONS.items()}
    cfg = _unchecked(ExperimentConfig, {**top, **sections})
    errors.extend(cfg._validate_top())
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(**top, **sections)


def merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def load(path) -> ExperimentConfig:
    """Read a YAML file; missing keys fall back to the shipped defaults."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileNotFoundError(f"{path}: {exc.strerror or exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: not valid YAML ({exc})"]) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return from_dict(data)


def default() -> ExperimentConfig:
    return from_dict({})


def to_dict(cfg: ExperimentConfig) -> dict:
    def plain(v):
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        return v
    out = {k: getattr(cfg, k) for k in TOP_LEVEL}
    for name in SECTIONS:
        sec = getattr(cfg, name)
        out[name] = {f.name: plain(getattr(sec, f.name)) for f in dataclasses.fields(sec)}
    return out
