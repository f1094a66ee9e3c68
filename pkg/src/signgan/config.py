"""Experiment configuration: one JSON document with ``model``, ``schedule``,
``optimizer``, ``training`` and ``data`` sections. Unknown keys and bad values
raise :class:`ConfigError` naming the dotted field.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

from .core import ModelConfig
from .errors import ConfigError


@dataclass(frozen=True)
class LambdaSchedule:
    """Weight on the generator's L1 term.

    ``dynamic`` follows ``i + j * (cos(pi * e / half_period) + 1) / 2`` for
    epoch progress ``e``; ``static`` holds ``static_value`` (default
    ``i + j / 2``). ``continuation`` picks how the cosine continues past one
    half-period: ``mirror`` keeps the continuous cosine, ``restart`` jumps
    back to ``i + j``.
    """

    i: float = 50.0
    j: float = 100.0
    half_period: float = 1.5
    mode: str = "dynamic"
    continuation: str = "mirror"
    static_value: Optional[float] = None

    def __post_init__(self):
        if not self.i >= 0:
            raise ConfigError("schedule.i", f"must be >= 0, got {self.i!r}")
        if not self.j >= 0:
            raise ConfigError("schedule.j", f"must be >= 0, got {self.j!r}")
        if not self.half_period > 0:
            raise ConfigError("schedule.half_period", f"must be > 0, got {self.half_period!r}")
        if self.mode not in ("dynamic", "static"):
            raise ConfigError("schedule.mode", f"must be 'dynamic' or 'static', got {self.mode!r}")
        if self.continuation not in ("mirror", "restart"):
            raise ConfigError("schedule.continuation", f"must be 'mirror' or 'restart', got {self.continuation!r}")


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 2e-4
    betas: Tuple[float, float] = (0.5, 0.999)

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError("optimizer.lr", f"must be > 0, got {self.lr!r}")
        betas = tuple(self.betas)
        if len(betas) != 2 or not all(0 <= b < 1 for b in betas):
            raise ConfigError("optimizer.betas", f"must be two numbers in [0, 1), got {self.betas!r}")
        object.__setattr__(self, "betas", betas)


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 4
    parser_epochs: int = 30
    predictor_epochs: int = 30
    joint: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("batch_size",):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise ConfigError(f"training.{name}", f"must be a positive integer, got {getattr(self, name)!r}")
        for name in ("parser_epochs", "predictor_epochs"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 0:
                raise ConfigError(f"training.{name}", f"must be a non-negative integer, got {getattr(self, name)!r}")


@dataclass(frozen=True)
class DataConfig:
    stride: int = 1

    def __post_init__(self):
        if not isinstance(self.stride, int) or self.stride < 1:
            raise ConfigError("data.stride", f"must be a positive integer, got {self.stride!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: LambdaSchedule = field(default_factory=LambdaSchedule)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with per-section field overrides, e.g. ``replace(schedule={"mode": "static"})``."""
        return from_dict(_merge(self.to_dict(), sections))


_SECTIONS = {
    "model": ModelConfig,
    "schedule": LambdaSchedule,
    "optimizer": OptimizerConfig,
    "training": TrainingConfig,
    "data": DataConfig,
}


def _merge(base: dict, overrides: dict) -> dict:
    out = {k: dict(v) for k, v in base.items()}
    for section, values in overrides.items():
        out.setdefault(section, {}).update(values)
    return out


def _build_section(name: str, cls, values) -> object:
    if not isinstance(values, dict):
        raise ConfigError(name, "section must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"{name}.{key}", f"unknown field; expected one of {sorted(known)}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(name, str(exc)) from exc


def from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    for key in doc:
        if key not in _SECTIONS:
            raise ConfigError(key, f"unknown section; expected one of {sorted(_SECTIONS)}")
    return ExperimentConfig(**{name: _build_section(name, cls, doc.get(name, {})) for name, cls in _SECTIONS.items()})


def load_config(path: Union[str, Path, None]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
    return from_dict(doc)
