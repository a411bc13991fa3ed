"""
src/config.py

Centralized configuration management using Pydantic for experiments, including tensor precision,
model widths, Sinkhorn settings, domain registry, pretraining, training and evaluation options.

Top-level declarations:
- ConfigError: Exception raised for unreadable config files or unknown keys
- Method: Enum of training arms for the leave-one-domain-out harness
- TensorConfig: Numeric precision for the tensor core
- ModelConfig: Architecture widths for the generator, classifier and critic
- OTConfig: Sinkhorn solver settings
- DomainsConfig: Domain registry (procedural presets or IDX-backed base)
- DataConfig: Glyph corpus and split settings
- PretrainConfig: Epochs, batch sizes and learning rates for the Y-hat and critic passes
- TrainConfig: Alternating G/F loop settings (K_s, K_n, T, optimizers, loss weights)
- EvalConfig: Leave-one-domain-out grid, seeds, sweep and output settings
- LogConfig: Logging level
- AppConfig: Main configuration aggregating all sections
- load_config: Build an AppConfig from a flat key=value file plus overrides
- config_digest: Stable hash of a configuration
- config: Global default instance of AppConfig
"""

from __future__ import annotations

import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Sequence

from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, NoDecode, SettingsConfigDict


class ConfigError(Exception):
    # Raised when a config file cannot be read or names an unknown section/key
    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(message)


class Method(str, Enum):
    # Training arms accepted by leave_one_domain_out
    VANILLA = "vanilla"
    L2A_OT = "l2a_ot"
    NO_DIVERSITY = "l2a_ot_no_diversity"
    NO_SEMANTIC = "l2a_ot_no_semantic"
    SEMANTIC_ONLY = "semantic_only"


def _split_csv(value: Any) -> Any:
    # Accept "a,b,c" strings for list fields coming from files, env or --set
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class TensorConfig(BaseSettings):
    # Numeric precision of the tensor core; float64 is the verification precision
    dtype: str = "float64"

    model_config = SettingsConfigDict(env_prefix="TENSOR__", extra="ignore")

    @field_validator("dtype")
    @classmethod
    def check_dtype(cls, v: str) -> str:
        if v not in ("float64", "float32"):
            raise ValueError(f"tensor.dtype must be float64 or float32, got {v}")
        return v


class ModelConfig(BaseSettings):
    # Architecture widths; defaults are the desk-scale choices
    image_channels: int = 3
    image_size: int = 32
    num_classes: int = 10
    generator_widths: Annotated[List[int], NoDecode] = Field(default_factory=lambda: [16, 32, 64])
    classifier_width: int = 32
    critic_widths: Annotated[List[int], NoDecode] = Field(default_factory=lambda: [16, 32, 64])
    embedding_dim: int = 64

    model_config = SettingsConfigDict(env_prefix="MODEL__", extra="ignore")

    @field_validator("generator_widths", "critic_widths", mode="before")
    @classmethod
    def split_widths(cls, v: Any) -> Any:
        return _split_csv(v)

    @model_validator(mode="after")
    def check_geometry(self) -> "ModelConfig":
        if self.image_size % 16 != 0:
            raise ValueError("model.image_size must be divisible by 16 (four 2x2 pools)")
        if len(self.generator_widths) != 3 or len(self.critic_widths) != 3:
            raise ValueError("generator_widths and critic_widths need exactly three entries")
        return self


class OTConfig(BaseSettings):
    # Sinkhorn settings; epsilon is relative to the mean cost
    epsilon: float = 0.1
    max_iterations: int = 200
    tolerance: float = 1e-6

    model_config = SettingsConfigDict(env_prefix="OT__", extra="ignore")

    @field_validator("epsilon", "tolerance")
    @classmethod
    def check_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("ot.epsilon and ot.tolerance must be > 0")
        return v


class DomainsConfig(BaseSettings):
    # Domain registry: ordered preset names; IDX files replace the glyph base when set
    names: Annotated[List[str], NoDecode] = Field(
        default_factory=lambda: ["plain", "ember", "inverse", "static"]
    )
    base: str = "procedural"  # 'procedural' or 'idx'
    idx_images: Optional[str] = None
    idx_labels: Optional[str] = None
    idx_limit: int = 0  # 0 keeps every IDX record

    model_config = SettingsConfigDict(env_prefix="DOMAINS__", extra="ignore")

    @field_validator("names", mode="before")
    @classmethod
    def split_names(cls, v: Any) -> Any:
        return _split_csv(v)

    @model_validator(mode="after")
    def check_base(self) -> "DomainsConfig":
        if self.base not in ("procedural", "idx"):
            raise ValueError(f"domains.base must be procedural or idx, got {self.base}")
        if self.base == "idx" and not (self.idx_images and self.idx_labels):
            raise ValueError("domains.base=idx requires domains.idx_images and domains.idx_labels")
        return self


class DataConfig(BaseSettings):
    # Glyph corpus and split settings
    n_per_class: int = 50
    geometry_seed: int = 7
    train_fraction: float = 0.9
    val_fraction: float = 0.1
    split_seed: int = 11
    cache_dir: str = "runs/data"

    model_config = SettingsConfigDict(env_prefix="DATA__", extra="ignore")


class PretrainConfig(BaseSettings):
    # Y-hat (vanilla) and critic pretraining passes
    classifier_epochs: int = 30
    critic_epochs: int = 10
    batch_size: int = 32
    lr: float = 0.02
    momentum: float = 0.9
    weight_decay: float = 5e-4
    seed: int = 3

    model_config = SettingsConfigDict(env_prefix="PRETRAIN__", extra="ignore")


class TrainConfig(BaseSettings):
    # Alternating G/F loop; K_s is derived from the sources handed to the trainer
    num_novel: int = 0  # 0 means K_n = K_s
    iterations: int = 3000
    batch_size: int = 8  # per source
    g_lr: float = 3e-4
    g_betas: Annotated[List[float], NoDecode] = Field(default_factory=lambda: [0.5, 0.999])
    g_eps: float = 1e-8
    f_lr: float = 0.02
    f_momentum: float = 0.9
    f_weight_decay: float = 5e-4
    f_lr_decay_at: float = 0.6
    f_lr_decay: float = 0.1
    lambda_domain: float = 1.0
    lambda_cycle: float = 10.0
    lambda_ce: float = 1.0
    alpha: float = 0.5
    use_diversity: bool = True
    seed: int = 0
    checkpoint_every: int = 0  # 0 disables checkpoints
    log_every: int = 50
    record_wall_time: bool = False

    model_config = SettingsConfigDict(env_prefix="TRAIN__", extra="ignore")

    @field_validator("g_betas", mode="before")
    @classmethod
    def split_betas(cls, v: Any) -> Any:
        return _split_csv(v)

    @model_validator(mode="after")
    def check_invariants(self) -> "TrainConfig":
        if self.num_novel < 0:
            raise ValueError("train.num_novel must be >= 1 (or 0 for K_n = K_s)")
        if self.batch_size < 2 or self.batch_size % 2:
            raise ValueError("train.batch_size must be even and >= 2")
        if self.g_lr <= 0 or self.f_lr <= 0:
            raise ValueError("learning rates must be > 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("train.alpha must lie in [0, 1]")
        if min(self.lambda_domain, self.lambda_cycle, self.lambda_ce) < 0:
            raise ValueError("loss weights must be >= 0")
        if len(self.g_betas) != 2:
            raise ValueError("train.g_betas needs two entries")
        return self


class EvalConfig(BaseSettings):
    # Leave-one-domain-out grid and output settings
    method: Method = Method.L2A_OT
    seeds: Annotated[List[int], NoDecode] = Field(default_factory=lambda: [0, 1, 2])
    targets: Annotated[List[str], NoDecode] = Field(default_factory=list)  # empty: every domain
    num_sources: int = 0  # 0: all remaining domains
    kn_values: Annotated[List[int], NoDecode] = Field(default_factory=list)  # empty: 1, K_s, 2K_s
    workers: int = 1
    out_dir: str = "runs"
    embedding_samples: int = 64

    model_config = SettingsConfigDict(env_prefix="EVAL__", extra="ignore")

    @field_validator("seeds", "targets", "kn_values", mode="before")
    @classmethod
    def split_lists(cls, v: Any) -> Any:
        return _split_csv(v)


class LogConfig(BaseSettings):
    # Pydantic settings for logging configuration
    log_level: str = "INFO"

    model_config = SettingsConfigDict(env_prefix="LOG__", extra="ignore")


class AppConfig(BaseSettings):
    # Main aggregated configuration class loading sub-configs from environment variables and .env file
    dev_mode: bool = False
    tensor: TensorConfig = Field(default_factory=TensorConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    ot: OTConfig = Field(default_factory=OTConfig)
    domains: DomainsConfig = Field(default_factory=DomainsConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    pretrain: PretrainConfig = Field(default_factory=PretrainConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    log: LogConfig = Field(default_factory=LogConfig)

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
    )


_SECTIONS = ("tensor", "model", "ot", "domains", "data", "pretrain", "train", "eval", "log")

# Bare keys accepted as shorthand on the command line
_ALIASES = {"method": "eval.method", "seeds": "eval.seeds"}


def _parse_lines(lines: Sequence[str], source: str) -> Dict[str, str]:
    # Parse flat "key = value" lines, skipping blanks and '#' comments
    pairs: Dict[str, str] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key=value, got '{raw.strip()}'")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def _nest(pairs: Dict[str, str]) -> Dict[str, Dict[str, str]]:
    # Turn section.key pairs into the nested dict AppConfig expects
    nested: Dict[str, Dict[str, str]] = {}
    for raw_key, value in pairs.items():
        key = _ALIASES.get(raw_key, raw_key)
        section, _, field = key.partition(".")
        if section not in _SECTIONS or not field:
            raise ConfigError(f"Unknown config key: {key}", key=key)
        section_model = AppConfig.model_fields[section].annotation
        known = getattr(section_model, "model_fields", {})
        if field not in known:
            raise ConfigError(f"Unknown config key: {key}", key=key)
        nested.setdefault(section, {})[field] = value
    return nested


def load_config(path: Optional[str | Path] = None, overrides: Sequence[str] = ()) -> AppConfig:
    # Build an AppConfig from an optional key=value file, then apply --set overrides
    pairs: Dict[str, str] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"Config file not found: {config_path}")
        with open(config_path, "r", encoding="utf-8") as f:
            pairs.update(_parse_lines(f.read().splitlines(), str(config_path)))
    pairs.update(_parse_lines(list(overrides), "--set"))

    nested = _nest(pairs)
    try:
        sections = {
            name: AppConfig.model_fields[name].annotation(**values)  # type: ignore[misc]
            for name, values in nested.items()
        }
        return AppConfig(**sections)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}")


def config_digest(cfg: AppConfig) -> str:
    # Stable SHA-256 over the canonical JSON dump of the configuration
    payload = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


config = AppConfig()
