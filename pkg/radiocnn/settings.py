"""
radiocnn Settings

This module contains global constants and configuration settings for the radiocnn
training engine. These settings control the preprocessing pipeline, the layer
numerics, the optimizer, the checkpoint format and the runtime behaviour of the CLI.

Key features:
- Centralized configuration for easy management.
- Records the preprocessing recipe (180x180 images, 32-image batches, 20% validation).
- Pins the layer and optimizer constants that would otherwise be framework defaults.
- Sets operational knobs (logging, prefetch depth, output directory) from the environment.

@dependencies
- `pathlib.Path` for defining file system paths.
- `python-dotenv` to pick up a local `.env` file.

@notes
- Structured per-run configuration lives in `radiocnn.schemas`; the values here are the
  defaults those models fall back to.
- Environment variables are prefixed with `RADIOCNN_`.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Preprocessing
DEFAULT_IMAGE_SIZE: int = 180  # Images are resized to 180x180
DEFAULT_CHANNELS: int = 3
DEFAULT_BATCH_SIZE: int = 32
DEFAULT_VAL_FRACTION: float = 0.2
ROTATION_LIMIT_DEG: float = 0.05 * 360.0  # 5% of a full turn
ZOOM_LIMIT: float = 0.10
FLIP_PROBABILITY: float = 0.5
PIXEL_MAX: float = 255.0
IMAGE_EXTENSIONS: tuple[str, ...] = (".png", ".pgm")
JPEG_EXTENSIONS: tuple[str, ...] = (".jpg", ".jpeg")
ENABLE_JPEG: bool = os.getenv("RADIOCNN_ENABLE_JPEG", "0").lower() in ("1", "true", "yes")

# Layer numerics
BATCHNORM_EPSILON: float = 1e-3
BATCHNORM_MOMENTUM: float = 0.99
L2_DEFAULT: float = 0.01

# Optimization
DEFAULT_MAX_EPOCHS: int = 50
DEFAULT_LEARNING_RATE: float = 1e-3
DEFAULT_LR_DECAY_FACTOR: float = 0.5
DEFAULT_LR_DECAY_EVERY: int = 10
DEFAULT_PATIENCE: int = 5
ADAM_BETA1: float = 0.9
ADAM_BETA2: float = 0.999
ADAM_EPSILON: float = 1e-7
PROBABILITY_CLAMP: float = 1e-7  # Floor for log() in the cross-entropy losses

# Gradient checking
GRADCHECK_STEP: float = 1e-5
GRADCHECK_TOLERANCE: float = 1e-4

# Randomness
DEFAULT_SEED: int = int(os.getenv("RADIOCNN_SEED", "0"))
RNG_GENERATOR_ID: str = "numpy-philox4x64-10"

# Data loading
DEFAULT_PREFETCH_DEPTH: int = int(os.getenv("RADIOCNN_PREFETCH", "2"))
DEFAULT_WORKERS: int = 1

# Checkpoint format
CHECKPOINT_MAGIC: bytes = b"MICF"
CHECKPOINT_VERSION: int = 1
CHECKPOINT_SUFFIX: str = ".micf"

# Training history
HISTORY_HEADER: str = "epoch,lr,train_loss,train_acc,val_loss,val_acc"
HISTORY_DECIMALS: int = 6

# File System Settings
DEFAULT_OUT_DIR: Path = Path(os.getenv("RADIOCNN_OUT_DIR", "./runs")).absolute()
HISTORY_FILENAME: str = "history.csv"
CURVES_FILENAME: str = "curves.svg"
CHECKPOINT_FILENAME: str = "best.micf"
RUN_CONFIG_FILENAME: str = "run.json"
SYNTHETIC_MANIFEST: str = "manifest.json"

# Logging
LOG_LEVEL: str = os.getenv("RADIOCNN_LOG_LEVEL", "INFO").upper()
LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_DATE_FORMAT: str = "%Y-%m-%d %H:%M:%S"

# UI/UX
USE_ANSI_COLORS: bool = os.getenv("NO_COLOR") is None and os.getenv("TERM") != "dumb"
