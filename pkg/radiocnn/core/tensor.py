"""
Dense Tensor Helpers

This module provides the small set of validated array operations the rest of radiocnn
is built on. A "tensor" here is a plain NumPy ndarray in NHWC layout (batch, height,
width, channel), row-major, with `float32` as the training dtype and `float64` reserved
for gradient checks.

Key features:
- `as_tensor` to coerce inputs into a contiguous array of a supported dtype.
- `matmul` for the dense-layer and im2col cores, with shape errors naming both operands.
- `pad2d` / `center_crop2d` for zero padding ("same" convolution) and its inverse.
- `reduce_mean` over a set of axes, as used by global average pooling.

@dependencies
- `numpy` for all arithmetic.

@notes
- Every function is pure: inputs are never mutated.
"""

from collections.abc import Iterable, Sequence

import numpy as np
import numpy.typing as npt

from radiocnn.errors import RadiocnnError

Tensor = npt.NDArray[np.floating]

TRAIN_DTYPE = np.float32
CHECK_DTYPE = np.float64
SUPPORTED_DTYPES = (np.dtype(TRAIN_DTYPE), np.dtype(CHECK_DTYPE))


class ShapeError(RadiocnnError, ValueError):
    """Raised when tensor shapes or axes are inconsistent with an operation."""

    pass


def as_tensor(data: npt.ArrayLike, dtype: npt.DTypeLike = TRAIN_DTYPE) -> Tensor:
    """
    Converts `data` into a contiguous tensor of a supported dtype.

    Raises:
        ShapeError: For rank-0 input, zero-sized dimensions or an unsupported dtype.
    """
    if np.dtype(dtype) not in SUPPORTED_DTYPES:
        raise ShapeError(f"Unsupported tensor dtype {np.dtype(dtype)}; use float32 or float64.")
    array = np.ascontiguousarray(data, dtype=dtype)
    if array.ndim == 0:
        raise ShapeError("Tensors must have rank >= 1.")
    if any(dim < 1 for dim in array.shape):
        raise ShapeError(f"All tensor dimensions must be >= 1, got shape {array.shape}.")
    return array


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Multiplies two rank-2 tensors: c[i, j] = sum_t a[i, t] * b[t, j].

    Raises:
        ShapeError: If either operand is not rank 2 or the inner dimensions differ.
    """
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got shapes {a.shape} and {b.shape}.")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions differ: {a.shape} x {b.shape} "
            f"({a.shape[1]} != {b.shape[0]})."
        )
    return np.matmul(a, b)


def pad2d(x: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    """Zero-pads the spatial axes of an NHWC tensor."""
    if x.ndim != 4:
        raise ShapeError(f"pad2d expects an NHWC tensor, got shape {x.shape}.")
    counts = (top, bottom, left, right)
    if any(count < 0 for count in counts):
        raise ShapeError(f"Padding counts must be non-negative, got {counts}.")
    return np.pad(x, ((0, 0), (top, bottom), (left, right), (0, 0)), mode="constant")


def center_crop2d(x: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    """Removes the given border from the spatial axes of an NHWC tensor (inverse of `pad2d`)."""
    if x.ndim != 4:
        raise ShapeError(f"center_crop2d expects an NHWC tensor, got shape {x.shape}.")
    _, h, w, _ = x.shape
    if min(top, bottom, left, right) < 0 or top + bottom >= h or left + right >= w:
        raise ShapeError(f"Cannot crop {(top, bottom, left, right)} from spatial shape {(h, w)}.")
    return x[:, top : h - bottom, left : w - right, :].copy()


def normalize_axes(axes: Iterable[int], ndim: int) -> tuple[int, ...]:
    """Resolves negative axes and rejects duplicates or out-of-range entries."""
    resolved: list[int] = []
    for axis in axes:
        if not -ndim <= axis < ndim:
            raise ShapeError(f"Axis {axis} is out of range for rank {ndim}.")
        axis = axis % ndim
        if axis in resolved:
            raise ShapeError(f"Duplicate axis {axis} in reduction.")
        resolved.append(axis)
    return tuple(sorted(resolved))


def reduce_mean(x: Tensor, axes: Sequence[int]) -> Tensor:
    """
    Arithmetic mean over the named axes; those axes are dropped from the output shape.

    Reducing over every axis yields a shape-(1,) tensor so the result stays rank >= 1.
    """
    resolved = normalize_axes(axes, x.ndim)
    if not resolved:
        return x.copy()
    result = np.mean(x, axis=resolved, dtype=x.dtype)
    return np.atleast_1d(np.asarray(result, dtype=x.dtype))
