"""
Pydantic Schemas for radiocnn

This module defines the Pydantic models that describe a run: the model architecture,
the optimization settings, the input pipeline and the fully resolved run configuration
that the CLI reads from `--config` and echoes to `run.json`.

Key features:
- `ArchitectureSpec`: declarative description of a CCNN or baseline CNN; missing fields
  are filled from the architecture's defaults.
- `TrainConfig`: epochs, batch size, learning-rate schedule, early stopping, seed,
  single-threaded determinism and BatchNorm re-estimation before validation.
- `PipelineConfig`: image size, channels, validation split, augmentation limits, prefetch.
- `ModelConfig`: user-facing architecture choice plus optional overrides.
- `RunConfig`: everything above plus paths and the expected class names; unknown keys
  are rejected.

@dependencies
- `pydantic.BaseModel`, `Field`, `field_validator`, `model_validator`.
- `radiocnn.settings` for default values.

@notes
- `train.batch_size`/`pipeline.batch_size` and `train.seed`/`pipeline.seed` describe the
  same knob. Setting one propagates it to the other; setting both to different values
  is a validation error.
"""

from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from radiocnn import settings

ArchId = Literal["ccnn", "cnn"]

ARCH_DEFAULTS: dict[str, dict[str, Any]] = {
    "ccnn": {
        "filters": (32, 64, 128, 256),
        "block_dropout": 0.3,
        "head_dropout": 0.5,
        "l2": settings.L2_DEFAULT,
        "dense_width": 256,
    },
    "cnn": {
        "filters": (32, 64, 128),
        "block_dropout": 0.25,
        "head_dropout": 0.5,
        "l2": 0.0,
        "dense_width": 256,
    },
}


class ArchitectureSpec(BaseModel):
    """Declarative description of a model, from which `radiocnn.models.build_model` builds layers."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    arch: ArchId = "ccnn"
    input_shape: tuple[int, int, int] = (
        settings.DEFAULT_IMAGE_SIZE,
        settings.DEFAULT_IMAGE_SIZE,
        settings.DEFAULT_CHANNELS,
    )
    num_classes: int = Field(3, ge=2)
    filters: tuple[int, ...]
    block_dropout: float = Field(..., ge=0.0, lt=1.0)
    head_dropout: float = Field(..., ge=0.0, lt=1.0)
    l2: float = Field(..., ge=0.0)
    dense_width: int = Field(..., ge=1)

    @model_validator(mode="before")
    @classmethod
    def fill_arch_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        arch = data.get("arch", "ccnn")
        defaults = ARCH_DEFAULTS.get(arch, {})
        filled = dict(data)
        for key, value in defaults.items():
            if filled.get(key) is None:
                filled[key] = value
        return filled

    @field_validator("input_shape")
    @classmethod
    def positive_input_shape(cls, v: tuple[int, int, int]) -> tuple[int, int, int]:
        if min(v) < 1:
            raise ValueError(f"input_shape entries must be >= 1, got {v}.")
        return v

    @field_validator("filters")
    @classmethod
    def positive_filters(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if not v or min(v) < 1:
            raise ValueError(f"filters must be a non-empty list of positive counts, got {v}.")
        return v


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    max_epochs: int = Field(settings.DEFAULT_MAX_EPOCHS, ge=1)
    batch_size: int = Field(settings.DEFAULT_BATCH_SIZE, ge=1)
    base_lr: float = Field(settings.DEFAULT_LEARNING_RATE, ge=0.0)
    lr_decay_factor: float = Field(settings.DEFAULT_LR_DECAY_FACTOR, gt=0.0, le=1.0)
    lr_decay_every: int = Field(settings.DEFAULT_LR_DECAY_EVERY, ge=1)
    patience: int = Field(settings.DEFAULT_PATIENCE, ge=1)
    min_delta: float = Field(0.0, ge=0.0)
    restore_best: bool = True
    seed: int = Field(settings.DEFAULT_SEED, ge=0)
    deterministic: bool = True
    recalibrate_batchnorm: bool = True


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    image_size: tuple[int, int] = (settings.DEFAULT_IMAGE_SIZE, settings.DEFAULT_IMAGE_SIZE)
    channels: Literal[1, 3] = settings.DEFAULT_CHANNELS
    batch_size: int = Field(settings.DEFAULT_BATCH_SIZE, ge=1)
    val_fraction: float = Field(settings.DEFAULT_VAL_FRACTION, gt=0.0, lt=1.0)
    augment: bool = True
    rotation_limit_deg: float = Field(settings.ROTATION_LIMIT_DEG, ge=0.0, le=180.0)
    zoom_limit: float = Field(settings.ZOOM_LIMIT, ge=0.0, lt=1.0)
    flip_probability: float = Field(settings.FLIP_PROBABILITY, ge=0.0, le=1.0)
    prefetch_depth: int = Field(settings.DEFAULT_PREFETCH_DEPTH, ge=0)
    workers: int = Field(settings.DEFAULT_WORKERS, ge=1)
    seed: int = Field(settings.DEFAULT_SEED, ge=0)
    strict: bool = True
    allow_jpeg: bool = settings.ENABLE_JPEG

    @field_validator("image_size")
    @classmethod
    def positive_image_size(cls, v: tuple[int, int]) -> tuple[int, int]:
        if min(v) < 1:
            raise ValueError(f"image_size entries must be >= 1, got {v}.")
        return v


class ModelConfig(BaseModel):
    """Architecture choice plus optional overrides of the architecture's defaults."""

    model_config = ConfigDict(extra="forbid")

    arch: ArchId = "ccnn"
    filters: tuple[int, ...] | None = None
    block_dropout: float | None = Field(None, ge=0.0, lt=1.0)
    head_dropout: float | None = Field(None, ge=0.0, lt=1.0)
    l2: float | None = Field(None, ge=0.0)
    dense_width: int | None = Field(None, ge=1)

    def to_spec(self, input_shape: tuple[int, int, int], num_classes: int) -> ArchitectureSpec:
        return ArchitectureSpec.model_validate(
            {**self.model_dump(), "input_shape": input_shape, "num_classes": num_classes}
        )


class PathsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    data: Path | None = None
    out: Path | None = None
    checkpoint: Path | None = None


class RunConfig(BaseModel):
    """The complete, validated configuration of a training run."""

    model_config = ConfigDict(extra="forbid")

    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    eval_test: bool = False
    class_names: list[str] | None = None
    rng_generator: str = settings.RNG_GENERATOR_ID

    @field_validator("rng_generator")
    @classmethod
    def supported_generator(cls, v: str) -> str:
        if v != settings.RNG_GENERATOR_ID:
            raise ValueError(
                f"Unsupported random generator '{v}'; this build uses '{settings.RNG_GENERATOR_ID}'."
            )
        return v

    @model_validator(mode="after")
    def sync_shared_knobs(self) -> "RunConfig":
        for knob in ("batch_size", "seed"):
            train_set = knob in self.train.model_fields_set
            pipeline_set = knob in self.pipeline.model_fields_set
            train_value = getattr(self.train, knob)
            pipeline_value = getattr(self.pipeline, knob)
            if train_set and pipeline_set and train_value != pipeline_value:
                raise ValueError(
                    f"train.{knob}={train_value} and pipeline.{knob}={pipeline_value} disagree."
                )
            if train_set and not pipeline_set:
                setattr(self.pipeline, knob, train_value)
            elif pipeline_set and not train_set:
                setattr(self.train, knob, pipeline_value)
        return self

    def data_pipeline(self) -> PipelineConfig:
        """The pipeline actually run: deterministic runs prepare samples on a single thread."""
        if self.train.deterministic and self.pipeline.workers > 1:
            return self.pipeline.model_copy(update={"workers": 1})
        return self.pipeline
