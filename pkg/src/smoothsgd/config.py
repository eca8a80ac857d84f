"""Experiment configuration, loaded from JSON with unknown keys rejected."""
from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .losses import QuantileSet
from .models import KINDS, ModelSpec
from .optimizers import OptimizerConfig
from .stream_data import FEATURE_DIM

__all__ = [
    "CompareConfig",
    "ConfigError",
    "DataConfig",
    "ExperimentConfig",
    "ModelConfig",
    "OutputConfig",
    "RegretConfig",
    "SynthConfig",
    "load_config",
]

STRATEGIES = ("online", "offline")
FORMATS = ("csv", "json")
COMPARE_METHODS = ("sgd_offline", "sgd_online", "hts", "pts")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "linear"
    input_window: int = 24
    horizons: int = 24
    hidden_dim: int = 8
    init_scale: float = 0.01

    def spec(self, quantile_count: int) -> ModelSpec:
        return ModelSpec(self.kind, self.input_window, FEATURE_DIM, self.horizons, quantile_count, self.hidden_dim)


@dataclass(frozen=True)
class SynthConfig:
    length_hours: int | None = None  # None: exactly enough for train + test chunks
    daily_amp: float = 1.0
    weekly_amp: float = 0.5
    trend: float = 0.0
    noise_sd: float = 0.1
    base: float = 0.0
    seed: int | None = None  # None: follow the experiment seed


@dataclass(frozen=True)
class DataConfig:
    csv: str | None = None
    synth: SynthConfig = field(default_factory=SynthConfig)


@dataclass(frozen=True)
class RegretConfig:
    enabled: bool = True
    window: int | None = None  # None: the optimizer's window
    alpha: float | None = None  # None: the optimizer's alpha


@dataclass(frozen=True)
class OutputConfig:
    path: str | None = None
    format: str = "json"


@dataclass(frozen=True)
class CompareConfig:
    etas: tuple[float, ...] = (1.0, 3.0, 5.0, 9.0)
    methods: tuple[str, ...] = COMPARE_METHODS
    seeds: tuple[int, ...] = (0,)
    workers: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    strategy: str = "online"
    train_chunks: int = 12
    test_chunks: int = 3
    chunk_hours: int = 720
    origin_stride: int = 24
    quantiles: tuple[float, ...] = (0.1, 0.5, 0.9)
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    regret: RegretConfig = field(default_factory=RegretConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if self.strategy == "offline" and self.optimizer.method != "sgd":
            raise ConfigError("offline strategy retrains with plain sgd; set optimizer.method to 'sgd'")
        for name in ("train_chunks", "test_chunks", "chunk_hours", "origin_stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.model.kind not in KINDS:
            raise ConfigError(f"model.kind must be one of {KINDS}")
        if self.output.format not in FORMATS:
            raise ConfigError(f"output.format must be one of {FORMATS}")
        if not self.model.init_scale > 0:
            raise ConfigError("model.init_scale must be > 0")
        for m in self.compare.methods:
            if m not in COMPARE_METHODS:
                raise ConfigError(f"unknown compare method {m!r}; expected one of {COMPARE_METHODS}")
        try:
            QuantileSet(self.quantiles)
            self.model.spec(len(self.quantiles))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def quantile_set(self) -> QuantileSet:
        return QuantileSet(self.quantiles)

    @property
    def model_spec(self) -> ModelSpec:
        return self.model.spec(len(self.quantiles))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return _to_plain(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        return _build(cls, raw, "")


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    return obj


def _build(cls, raw, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown keys {unknown}")
    kwargs = {}
    for name, value in raw.items():
        kwargs[name] = _coerce(hints[name], value, f"{where}.{name}" if where else name)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from None


def _coerce(tp, value, where: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, where)
    if origin in (typing.Union, types.UnionType):
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError(f"{where}: null not allowed")
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, where)
    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list")
        return tuple(_coerce(args[0], v, where) for v in value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    return value


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(raw)
