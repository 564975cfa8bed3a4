"""
radiocnn Core Subpackage

Dense-tensor helpers and deterministic random streams underpinning every other
subpackage.
"""

from .rng import (
    RngStream,
    StreamPurpose,
    derive_stream_id,
    rng_normal,
    rng_uniform,
    stream_for,
)
from .tensor import (
    CHECK_DTYPE,
    TRAIN_DTYPE,
    ShapeError,
    Tensor,
    as_tensor,
    center_crop2d,
    matmul,
    pad2d,
    reduce_mean,
)

__all__ = [
    "Tensor",
    "ShapeError",
    "TRAIN_DTYPE",
    "CHECK_DTYPE",
    "as_tensor",
    "matmul",
    "pad2d",
    "center_crop2d",
    "reduce_mean",
    "RngStream",
    "StreamPurpose",
    "derive_stream_id",
    "stream_for",
    "rng_uniform",
    "rng_normal",
]
