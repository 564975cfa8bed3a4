"""
radiocnn Models Subpackage

Builders for the CCNN and baseline CNN architectures, whole-model forward/backward and
the `.micf` checkpoint format.
"""

from .checkpoint import (
    CheckpointError,
    CheckpointHeaderError,
    CheckpointMagicError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    LoadedCheckpoint,
    load_checkpoint,
    save_checkpoint,
)
from .zoo import (
    ArchitectureError,
    Model,
    ModelSnapshot,
    build_ccnn,
    build_cnn_baseline,
    build_model,
    param_count,
)

__all__ = [
    "ArchitectureError",
    "Model",
    "ModelSnapshot",
    "build_ccnn",
    "build_cnn_baseline",
    "build_model",
    "param_count",
    "CheckpointError",
    "CheckpointMagicError",
    "CheckpointVersionError",
    "CheckpointHeaderError",
    "CheckpointTruncatedError",
    "CheckpointShapeError",
    "LoadedCheckpoint",
    "save_checkpoint",
    "load_checkpoint",
]
