"""
radiocnn SDK Implementation

This module contains the run-level operations behind the CLI: resolving a `RunConfig`,
training a model end to end, evaluating and applying checkpoints, running the gradient
checks, rendering preprocessing previews and comparing finished runs.

Key features:
- `load_run_config`: settings defaults < JSON config file < explicit overrides.
- `run_training`: scan -> split -> build -> fit, then write `history.csv`, `curves.svg`,
  `best.micf` and `run.json` into the output directory.
- `run_evaluation` / `run_prediction`: inference with a saved checkpoint.
- `render_preview`: 3x3 image grids before and after augmentation.
- `compare_runs`: one summary row per run directory.

@dependencies
- `pydantic` for config validation.
- Every `radiocnn` subpackage.

@notes
- All errors raised here derive from `RadiocnnError`, except pydantic's
  `ValidationError` for invalid configuration values.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from radiocnn import settings
from radiocnn.data import (
    DatasetError,
    DatasetScan,
    RecordSource,
    encode_png,
    gen_synthetic,
    read_image,
    rescale,
    resize_bilinear,
    scan_dataset_dir,
    split_train_val,
)
from radiocnn.errors import RadiocnnError
from radiocnn.metrics import (
    TrainingHistory,
    read_history_csv,
    render_curves_svg,
    write_history_csv,
)
from radiocnn.models import LoadedCheckpoint, build_model, load_checkpoint, save_checkpoint
from radiocnn.nn import LayerMode
from radiocnn.nn.gradcheck import GradcheckResult, run_gradchecks
from radiocnn.schemas import ModelConfig, PipelineConfig, RunConfig
from radiocnn.train import EvaluationResult, evaluate, fit

logger = logging.getLogger(__name__)

PREVIEW_GRID = 3
PREVIEW_GAP = 2


class ConfigError(RadiocnnError, ValueError):
    """Raised for unreadable config files or missing required settings."""

    pass


def deep_merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_run_config(
    config_file: Path | None = None, overrides: dict[str, Any] | None = None
) -> RunConfig:
    """
    Resolves a `RunConfig` from an optional JSON file and explicit overrides.

    Raises:
        ConfigError: If the file cannot be read or is not a JSON object.
        pydantic.ValidationError: If the merged values are invalid.
    """
    document: dict[str, Any] = {}
    if config_file is not None:
        try:
            document = json.loads(Path(config_file).read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"Cannot read config file {config_file}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {config_file} is not valid JSON: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError(f"Config file {config_file} must hold a JSON object.")
    return RunConfig.model_validate(deep_merge(document, overrides or {}))


@dataclass
class TrainingOutcome:
    config: RunConfig
    history: TrainingHistory
    scan: DatasetScan
    out_dir: Path
    artifacts: dict[str, Path]
    split_sizes: dict[str, int]
    test_result: EvaluationResult | None = None


def run_training(config: RunConfig, progress: bool = False) -> TrainingOutcome:
    """
    Trains the configured model and writes its artifacts.

    Raises:
        ConfigError: If no dataset path is configured.
        RadiocnnError: From scanning, building or training.
    """
    if config.paths.data is None:
        raise ConfigError("No dataset given; pass --data or set paths.data in the config.")
    out_dir = config.paths.out or settings.DEFAULT_OUT_DIR
    pipeline = config.data_pipeline()

    scan = scan_dataset_dir(config.paths.data, allow_jpeg=pipeline.allow_jpeg)
    if config.class_names is not None and config.class_names != scan.class_names:
        raise DatasetError(
            f"Config expects classes {config.class_names}, dataset has {scan.class_names}."
        )
    train_records, val_records = split_train_val(
        scan.records("train"), pipeline.val_fraction, pipeline.seed
    )

    height, width = pipeline.image_size
    spec = config.model.to_spec((height, width, pipeline.channels), len(scan.class_names))
    model = build_model(spec, seed=config.train.seed)
    logger.info(
        f"Training {spec.arch} on {len(train_records)} images, validating on {len(val_records)}."
    )

    history = fit(
        model,
        RecordSource(train_records, pipeline, LayerMode.TRAINING),
        RecordSource(val_records, pipeline, LayerMode.INFERENCE),
        config.train,
        progress=progress,
    )

    resolved = config.model_copy(
        update={
            "model": ModelConfig.model_validate(spec.model_dump(exclude={"input_shape", "num_classes"})),
            "class_names": scan.class_names,
            "paths": config.paths.model_copy(update={"out": out_dir}),
        }
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = {
        "history": write_history_csv(history, out_dir / settings.HISTORY_FILENAME),
        "curves": out_dir / settings.CURVES_FILENAME,
        "checkpoint": save_checkpoint(
            model,
            out_dir / settings.CHECKPOINT_FILENAME,
            include_optimizer=True,
            epoch=history.best_epoch,
            seed=config.train.seed,
            optimizer_step=history.optimizer_step,
            metadata={
                "class_names": scan.class_names,
                "image_size": list(pipeline.image_size),
                "channels": pipeline.channels,
            },
        ),
        "run_config": out_dir / settings.RUN_CONFIG_FILENAME,
    }
    render_curves_svg(history, artifacts["curves"])
    artifacts["run_config"].write_text(resolved.model_dump_json(indent=2) + "\n", encoding="utf-8")

    test_result = None
    if config.eval_test:
        if "test" in scan.splits:
            test_result = evaluate(model, RecordSource(scan.records("test"), pipeline))
            logger.info(f"Test accuracy {test_result.accuracy:.4f}, loss {test_result.loss:.4f}.")
        else:
            logger.warning(f"--eval-test given but {scan.root / 'test'} does not exist.")

    return TrainingOutcome(
        config=resolved,
        history=history,
        scan=scan,
        out_dir=out_dir,
        artifacts=artifacts,
        split_sizes={"train": len(train_records), "val": len(val_records)},
        test_result=test_result,
    )


def _inference_pipeline(checkpoint: LoadedCheckpoint, batch_size: int) -> PipelineConfig:
    height, width, channels = checkpoint.model.spec.input_shape
    return PipelineConfig(
        image_size=(height, width),
        channels=channels,
        batch_size=batch_size,
        augment=False,
        allow_jpeg=settings.ENABLE_JPEG,
    )


@dataclass
class EvaluationReport:
    split: str
    class_names: list[str]
    result: EvaluationResult

    def to_dict(self) -> dict[str, Any]:
        return {
            "split": self.split,
            "samples": self.result.samples,
            "loss": self.result.loss,
            "accuracy": self.result.accuracy,
            "confusion": self.result.confusion.to_list(),
            "class_names": self.class_names,
        }


def run_evaluation(
    checkpoint_path: Path,
    data: Path,
    split: str = "train",
    batch_size: int = settings.DEFAULT_BATCH_SIZE,
) -> EvaluationReport:
    """Evaluates a checkpoint on every image of one dataset split (no validation hold-out)."""
    checkpoint = load_checkpoint(checkpoint_path)
    scan = scan_dataset_dir(data, allow_jpeg=settings.ENABLE_JPEG)
    if checkpoint.metadata.get("class_names") and scan.class_names != checkpoint.class_names:
        raise DatasetError(
            f"Checkpoint was trained on classes {checkpoint.class_names}; dataset has {scan.class_names}."
        )
    source = RecordSource(scan.records(split), _inference_pipeline(checkpoint, batch_size))
    return EvaluationReport(split, scan.class_names, evaluate(checkpoint.model, source))


@dataclass
class Prediction:
    class_name: str
    label: int
    probabilities: list[float]
    class_names: list[str] = field(default_factory=list)


def run_prediction(checkpoint_path: Path, image: Path) -> Prediction:
    checkpoint = load_checkpoint(checkpoint_path)
    height, width, channels = checkpoint.model.spec.input_shape
    pixels = read_image(image, channels, allow_jpeg=settings.ENABLE_JPEG)
    batch = rescale(resize_bilinear(pixels, height, width))[None]
    probs = checkpoint.model.predict(batch)[0].astype(np.float64)
    if probs.shape[0] == 1:
        probs = np.array([1.0 - probs[0], probs[0]])
    label = int(np.argmax(probs))
    names = checkpoint.class_names
    return Prediction(names[label], label, probs.tolist(), names)


def run_gradcheck_suite(
    layers: list[str] | None = None, e2e: bool = False, seed: int = 0
) -> list[GradcheckResult]:
    return run_gradchecks(layers, e2e=e2e, seed=seed)


def _grid(images: list[np.ndarray]) -> np.ndarray:
    height, width, channels = images[0].shape
    cell_h, cell_w = height + PREVIEW_GAP, width + PREVIEW_GAP
    canvas = np.full(
        (PREVIEW_GRID * cell_h - PREVIEW_GAP, PREVIEW_GRID * cell_w - PREVIEW_GAP, channels),
        255,
        dtype=np.uint8,
    )
    for i, image in enumerate(images):
        r, c = divmod(i, PREVIEW_GRID)
        tile = np.rint(np.clip(image, 0.0, 1.0) * settings.PIXEL_MAX).astype(np.uint8)
        canvas[r * cell_h : r * cell_h + height, c * cell_w : c * cell_w + width] = tile
    return canvas


def render_preview(data: Path, out_dir: Path, pipeline: PipelineConfig, epoch: int = 1) -> list[Path]:
    """
    Writes `preview_resized.png` and `preview_augmented.png`: the first nine training
    images after resize/rescale, and the same images after augmentation.
    """
    scan = scan_dataset_dir(data, allow_jpeg=pipeline.allow_jpeg)
    train_records, _ = split_train_val(scan.records("train"), pipeline.val_fraction, pipeline.seed)
    source = RecordSource(train_records, pipeline.model_copy(update={"augment": True}), LayerMode.TRAINING)
    indices = source.order(epoch)[: PREVIEW_GRID * PREVIEW_GRID].tolist()

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    grids = {
        "preview_resized.png": [source.base_image(i) for i in indices],
        "preview_augmented.png": [source.load(i, epoch) for i in indices],
    }
    for name, images in grids.items():
        path = out_dir / name
        path.write_bytes(encode_png(_grid([img for img in images if img is not None])))
        written.append(path)
    logger.info(f"Wrote preview grids of {len(indices)} images to {out_dir}.")
    return written


@dataclass
class RunSummary:
    run: str
    arch: str
    epochs: int
    best_epoch: int
    best_val_acc: float
    best_val_loss: float

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def compare_runs(run_dirs: list[Path]) -> list[RunSummary]:
    """Summarizes finished runs from their `run.json` and `history.csv`."""
    summaries = []
    for run_dir in run_dirs:
        config_path = run_dir / settings.RUN_CONFIG_FILENAME
        history_path = run_dir / settings.HISTORY_FILENAME
        if not config_path.is_file() or not history_path.is_file():
            raise ConfigError(
                f"{run_dir} is not a run directory; expected {settings.RUN_CONFIG_FILENAME}"
                f" and {settings.HISTORY_FILENAME}."
            )
        config = load_run_config(config_path)
        history = read_history_csv(history_path)
        best = history.best_row()
        summaries.append(
            RunSummary(
                run=run_dir.name,
                arch=config.model.arch,
                epochs=len(history),
                best_epoch=best.epoch,
                best_val_acc=best.val_acc,
                best_val_loss=best.val_loss,
            )
        )
    return summaries


__all__ = [
    "RadiocnnError",
    "ConfigError",
    "load_run_config",
    "run_training",
    "TrainingOutcome",
    "run_evaluation",
    "EvaluationReport",
    "run_prediction",
    "Prediction",
    "run_gradcheck_suite",
    "render_preview",
    "compare_runs",
    "RunSummary",
    "gen_synthetic",
]
