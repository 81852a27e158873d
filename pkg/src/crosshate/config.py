"""Run configuration: defaults, YAML loading, and flag/file/default resolution."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import yaml


class ConfigError(ValueError):
    """Invalid configuration value or unknown key."""


class DataError(ValueError):
    """Malformed or unusable input data."""


POOLING_MODES = ("first", "mean")
BACKENDS = ("toy", "pretrained")
HATE_INPUTS = ("causal", "pooled")
WEAK_SOURCES = ("lexicon", "external-llm", "gold-passthrough")


@dataclass
class TrainConfig:
    """All knobs for one training run. Defaults are the published operating point."""

    # optimization
    lr: float = 1e-4
    dropout: float = 0.2
    word_dropout: float = 0.0
    alpha_t: float = 0.05
    alpha_c: float = 0.05
    delta_cont: float = 0.001
    delta_conf: float = 0.001
    eta: float = 0.95
    beta: float = 2.0
    batch_size: int = 64
    max_steps: int = 2000
    patience: int = 5
    seed: int = 0
    eval_every: int = 200
    val_fraction: float = 0.1

    # model
    backend: str = "toy"
    pooling: str = "first"
    h_causal: int = 64
    h_disc: int = 32
    hate_input: str = "causal"
    max_seq_len: int = 32
    embed_dim: int = 64
    encoder_layers: int = 2
    encoder_heads: int = 4
    decoder_layers: int = 1
    head_depth: int = 1
    embed_init_std: float = 0.5
    pretrained_encoder: str = "roberta-base"
    pretrained_decoder: str = "facebook/bart-base"

    # weak supervision
    weak_source: str = "lexicon"
    lexicon_path: str = ""
    llm_replay_path: str = ""
    refresh_period: int = 100
    label_noise_rate: float = 0.0
    label_noise_seed: int = 0

    def validate(self) -> "TrainConfig":
        for name in ("alpha_t", "alpha_c", "delta_cont", "delta_conf", "lr"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must be in [0, 1], got {self.eta}")
        if self.beta <= 0:
            raise ConfigError(f"beta must be > 0, got {self.beta}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 <= self.word_dropout < 1.0:
            raise ConfigError(f"word_dropout must be in [0, 1), got {self.word_dropout}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must be in (0, 1), got {self.val_fraction}")
        if self.pooling not in POOLING_MODES:
            raise ConfigError(f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.hate_input not in HATE_INPUTS:
            raise ConfigError(f"hate_input must be one of {HATE_INPUTS}, got {self.hate_input!r}")
        if self.weak_source not in WEAK_SOURCES:
            raise ConfigError(f"weak_source must be one of {WEAK_SOURCES}, got {self.weak_source!r}")
        for name in ("batch_size", "eval_every", "refresh_period", "patience", "h_causal", "h_disc",
                     "max_seq_len", "embed_dim", "encoder_layers", "encoder_heads",
                     "decoder_layers", "head_depth"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.max_steps < 0:
            raise ConfigError(f"max_steps must be >= 0, got {self.max_steps}")
        if not 0.0 <= self.label_noise_rate <= 1.0:
            raise ConfigError(f"label_noise_rate must be in [0, 1], got {self.label_noise_rate}")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Stable hash of the fully resolved configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(TrainConfig)}


def load_config_file(path: str) -> dict:
    with open(path) as fh:
        values = yaml.safe_load(fh) or {}
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a mapping, got {type(values).__name__}")
    return values


def resolve_config(file_values: dict | None = None, overrides: dict | None = None) -> TrainConfig:
    """Merge defaults < config file < explicit overrides into a validated TrainConfig.

    Unknown keys are rejected by name so typos do not silently fall back to defaults.
    """
    merged: dict = {}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key: {key!r}")
            merged[key] = value
    return TrainConfig(**merged).validate()
