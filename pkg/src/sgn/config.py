"""Declarative run configuration: one YAML document, validated up front.

Layout (every key optional except ``data.train``)::

    seeds:   {init, latent, shuffle}
    latent:  {kind: uniform|gm, dim, components, sigma}
    network: {hidden: [300], activation_gain, output_activation, output_scale, output_bias}
    train:   {N, B, k, eta, epochs, eps, grad_norm, latent_refresh}
    data:    {train, test, validation_size, split_seed, limit}
    output:  {dir, checkpoint_every, log_wall_time, grid_every, grid_rows, grid_cols}
    eval:    {n_generated, n_test, sigma_min, sigma_max, sigma_count, at_end}
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import mlp
from .trainer import GRAD_NORMS, LATENT_REFRESH, Seeds, TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class LatentConfig:
    kind: str = "uniform"
    dim: int = 100
    components: int = 32
    sigma: float = 0.1


@dataclass
class NetworkConfig:
    hidden: list[int] = field(default_factory=lambda: [300])
    activation_gain: float = 5.0
    output_activation: str = "linear"
    output_scale: float = 1.0
    output_bias: str = "zero"


@dataclass
class TrainSection:
    N: int = 1000
    B: int = 1000
    k: int = 1
    eta: float = 0.2
    epochs: int = 100
    eps: float = 1e-12
    grad_norm: str = "per-sample-unit"
    latent_refresh: str = "fixed"


@dataclass
class DataConfig:
    train: str = ""
    test: str = ""
    validation_size: int = 5000
    split_seed: int = 0
    limit: int = 0


@dataclass
class OutputConfig:
    dir: str = "runs/default"
    checkpoint_every: int = 0
    log_wall_time: bool = True
    grid_every: int = 0
    grid_rows: int = 10
    grid_cols: int = 10


@dataclass
class EvalConfig:
    n_generated: int = 10000
    n_test: int = 10000
    sigma_min: float = 0.01
    sigma_max: float = 1.0
    sigma_count: int = 30
    at_end: bool = False

    def grid(self) -> np.ndarray:
        return np.logspace(np.log10(self.sigma_min), np.log10(self.sigma_max), self.sigma_count)


@dataclass
class SeedsConfig:
    init: int = 0
    latent: int = 1
    shuffle: int = 2


@dataclass
class RunConfig:
    seeds: SeedsConfig = field(default_factory=SeedsConfig)
    latent: LatentConfig = field(default_factory=LatentConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainSection = field(default_factory=TrainSection)
    data: DataConfig = field(default_factory=DataConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(N=t.N, B=t.B, k=t.k, eta=t.eta, epochs=t.epochs, eps=t.eps,
                           grad_norm=t.grad_norm, latent_refresh=t.latent_refresh,
                           seeds=Seeds(self.seeds.init, self.seeds.latent, self.seeds.shuffle))

    def layer_dims(self, data_dim: int) -> list[int]:
        return [self.latent.dim, *self.network.hidden, data_dim]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def validate(self) -> None:
        if self.latent.kind not in ("uniform", "gm"):
            raise ConfigError("latent.kind must be 'uniform' or 'gm'")
        if self.latent.dim < 1 or self.latent.components < 1 or not self.latent.sigma > 0:
            raise ConfigError("latent.dim and latent.components must be >= 1, latent.sigma > 0")
        if any(h < 1 for h in self.network.hidden):
            raise ConfigError("network.hidden widths must be >= 1")
        if self.network.output_activation not in mlp.OUTPUT_ACTIVATIONS:
            raise ConfigError(f"network.output_activation must be one of {mlp.OUTPUT_ACTIVATIONS}")
        if self.network.output_bias not in ("zero", "data-mean"):
            raise ConfigError("network.output_bias must be 'zero' or 'data-mean'")
        if self.train.grad_norm not in GRAD_NORMS:
            raise ConfigError(f"train.grad_norm must be one of {GRAD_NORMS}")
        if self.train.latent_refresh not in LATENT_REFRESH:
            raise ConfigError(f"train.latent_refresh must be one of {LATENT_REFRESH}")
        if not self.data.train:
            raise ConfigError("data.train is required")
        if not (0 < self.eval.sigma_min <= self.eval.sigma_max) or self.eval.sigma_count < 1:
            raise ConfigError("eval sigma grid is empty or invalid")
        try:
            self.train_config().validate()
        except ValueError as e:
            raise ConfigError(str(e)) from e


def _build(cls, raw, path: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(fields)
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or 'config'}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, value in raw.items():
        default = getattr(cls(), name)
        where = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, where)
        else:
            kwargs[name] = _coerce(default, value, where)
    return cls(**kwargs)


def _coerce(default, value, where):
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                if value.lower() not in ("true", "false"):
                    raise ValueError(value)
                return value.lower() == "true"
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(float(value)) if isinstance(value, str) else int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            if isinstance(value, str):
                value = yaml.safe_load(value)
            return [int(v) for v in value]
        return str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: cannot use {value!r}") from e


def from_dict(raw: dict | None) -> RunConfig:
    return _build(RunConfig, raw or {}, "")


def load(path, overrides=()) -> RunConfig:
    with open(path) as f:
        raw = yaml.safe_load(f) or {}
    return apply_overrides(raw, overrides)


def apply_overrides(raw: dict, overrides) -> RunConfig:
    """``overrides`` are ``section.key=value`` strings; they win over the file."""
    raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    for item in overrides:
        key, sep, value = item.partition("=")
        parts = key.strip().split(".")
        if not sep or len(parts) != 2:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        section = raw.setdefault(parts[0], {})
        if not isinstance(section, dict):
            raise ConfigError(f"{parts[0]} is not a section")
        section[parts[1]] = yaml.safe_load(value)
    return from_dict(raw)
