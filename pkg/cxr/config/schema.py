"""Strict configuration schema and validation."""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from cxr.errors import SettingsValidationError


class EdgeMode(str, Enum):
    NONE = "none"
    SHARED = "shared"
    POSITIONAL = "positional"


class AttentionScale(str, Enum):
    PER_HEAD = "per_head"
    FULL = "full"


class Mode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


class LossKind(str, Enum):
    CE = "ce"
    BALCE = "balce"


class EnsembleMethod(str, Enum):
    MAX_VOTE = "maxvote"
    AVERAGE = "average"
    WEIGHTED = "weighted"


_VALID_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


class RuntimeSettings(BaseSettings):
    """Process-level settings read from GTP_* environment variables or a .env file."""

    model_config = SettingsConfigDict(env_prefix="GTP_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    log_json: bool = False
    log_file: Optional[Path] = None
    prefetch_batches: int = Field(default=2, ge=1)

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.strip().upper()
        if level not in _VALID_LOG_LEVELS:
            raise ValueError(f"log_level must be one of {sorted(_VALID_LOG_LEVELS)}; got '{v}'")
        return level


class ModelConfig(BaseModel):
    """Network hyperparameters; stored verbatim in checkpoints."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    encoder_channels: tuple[int, int, int] = (8, 16, 32)
    feature_dim: int = Field(default=32, ge=1)
    hidden_dim: int = Field(default=64, ge=1)
    heads: int = Field(default=4, ge=1)
    num_blocks: int = Field(default=4, ge=1)
    edge_mode: EdgeMode = EdgeMode.SHARED
    edge_dim: int = Field(default=8, ge=1)
    max_batch: int = Field(default=32, ge=1)
    use_gtp: bool = True
    attention_scale: AttentionScale = AttentionScale.PER_HEAD
    freeze_encoder: bool = False
    bn_momentum: float = Field(default=0.1, gt=0.0, le=1.0)
    bn_epsilon: float = Field(default=1e-5, gt=0.0)

    @field_validator("encoder_channels")
    @classmethod
    def validate_channels(cls, v: tuple[int, int, int]) -> tuple[int, int, int]:
        if any(c < 1 for c in v):
            raise ValueError("encoder_channels must all be >= 1")
        return v

    @model_validator(mode="after")
    def validate_heads(self) -> ModelConfig:
        if self.hidden_dim % self.heads != 0:
            raise ValueError(
                f"hidden_dim ({self.hidden_dim}) must be divisible by heads ({self.heads})"
            )
        return self

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.heads


class TrainConfig(BaseModel):
    """One training run. Defaults are the full-scale setup except the image size."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    data_dir: Optional[Path] = None
    epochs: int = Field(default=50, ge=1)
    batch_size: int = Field(default=32, ge=2)
    eval_batch_size: int = Field(default=32, ge=1)
    loss: LossKind = LossKind.CE
    image_size: int = Field(default=32, ge=8)
    learning_rate: float = Field(default=1e-5, gt=0.0)
    flip_p: float = Field(default=0.5, ge=0.0, le=1.0)
    rotation_degrees: float = Field(default=15.0, ge=0.0, le=180.0)
    seed: int = Field(default=0, ge=0)
    checkpoint_path: Path = Path("model.ckpt")
    best_checkpoint_path: Optional[Path] = None
    log_path: Optional[Path] = None
    model: ModelConfig = Field(default_factory=ModelConfig)

    @model_validator(mode="after")
    def validate_batch_graph(self) -> TrainConfig:
        if self.model.edge_mode is EdgeMode.POSITIONAL:
            largest = max(self.batch_size, self.eval_batch_size)
            if largest > self.model.max_batch:
                raise ValueError(
                    f"positional edges support batches up to max_batch={self.model.max_batch}; "
                    f"got batch size {largest}"
                )
        return self

    @property
    def resolved_log_path(self) -> Path:
        return self.log_path or self.checkpoint_path.with_suffix(".log.csv")

    @property
    def resolved_best_path(self) -> Path:
        return self.best_checkpoint_path or self.checkpoint_path.with_suffix(".best.ckpt")


class SynthConfig(BaseModel):
    """Synthetic imbalanced dataset: per-class totals before the 4:1 split."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    counts: tuple[int, int, int, int] = (107, 311, 555, 299)
    image_size: int = Field(default=32, ge=16)
    noise: float = Field(default=0.05, ge=0.0)
    seed: int = Field(default=0, ge=0)
    nodule_count: tuple[int, int] = (12, 24)
    streak_frequency: float = Field(default=0.22, gt=0.0)
    blob_scale: float = Field(default=0.22, gt=0.0)

    @field_validator("counts")
    @classmethod
    def validate_counts(cls, v: tuple[int, int, int, int]) -> tuple[int, int, int, int]:
        if any(n < 1 for n in v):
            raise ValueError("every class count must be >= 1")
        return v

    @field_validator("nodule_count")
    @classmethod
    def validate_nodules(cls, v: tuple[int, int]) -> tuple[int, int]:
        if v[0] < 1 or v[1] < v[0]:
            raise ValueError("nodule_count must be an ascending pair of positive integers")
        return v


ModelT = TypeVar("ModelT", bound=BaseModel)


def validate_document(model: type[ModelT], payload: Mapping[str, Any]) -> ModelT:
    """Validate a config payload, reporting every problem at once."""
    try:
        return model.model_validate(dict(payload))
    except ValidationError as exc:
        raise SettingsValidationError(_render_errors(exc)) from exc


def load_runtime_settings(**overrides: Any) -> RuntimeSettings:
    try:
        return RuntimeSettings(**{k: v for k, v in overrides.items() if v is not None})
    except ValidationError as exc:
        raise SettingsValidationError(_render_errors(exc)) from exc


def _render_errors(exc: ValidationError) -> list[str]:
    rendered: list[str] = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error["loc"]) or "<root>"
        rendered.append(f"{location}: {error['msg']}")
    return rendered
