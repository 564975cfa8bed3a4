"""
Layer Building Blocks

This module defines the pieces every layer in `radiocnn.nn.layers` shares: the trainable
`Parameter`, the `LayerMode` switch, the `LayerContext` that carries forward
intermediates to the backward pass, and the abstract `Layer` interface.

Key features:
- `Parameter`: value, gradient accumulator, L2 coefficient and Adam moments, all of one shape.
- `LayerContext`: single-use cache; a second `backward` on the same context is an error.
- `Layer.forward(x, mode, rng) -> (y, ctx)` and `Layer.backward(ctx, dy) -> dx`, with
  parameter gradients accumulated into `Parameter.grad`.
- `glorot_uniform`: weight initialization with limit sqrt(6 / (fan_in + fan_out)).

@dependencies
- `numpy` for arrays.
- `radiocnn.core` for tensors and random streams.

@notes
- Layers hold no global state. A model is single-writer during training; concurrent
  inference on a frozen model only reads parameters and running statistics.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, ClassVar

import numpy as np
import numpy.typing as npt

from radiocnn.core import RngStream, Tensor, rng_uniform
from radiocnn.errors import RadiocnnError


class LayerError(RadiocnnError):
    """Raised for invalid layer configuration, input shapes or call order."""

    pass


class LayerMode(str, Enum):
    TRAINING = "training"
    INFERENCE = "inference"


@dataclass
class Parameter:
    """A trainable tensor bundled with its gradient, L2 coefficient and Adam moments."""

    name: str
    value: Tensor
    l2_coeff: float = 0.0
    grad: Tensor = field(init=False)
    adam_m: Tensor = field(init=False)
    adam_v: Tensor = field(init=False)

    def __post_init__(self):
        if self.l2_coeff < 0:
            raise LayerError(f"Parameter '{self.name}' has negative l2_coeff {self.l2_coeff}.")
        self.value = np.ascontiguousarray(self.value)
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return int(self.value.size)

    def zero_grad(self) -> None:
        self.grad.fill(0)


@dataclass
class LayerContext:
    """Forward intermediates needed by backward. Consumed by the first backward call."""

    mode: LayerMode
    cache: dict[str, Any] = field(default_factory=dict)
    consumed: bool = False

    def consume(self) -> dict[str, Any]:
        if self.consumed:
            raise LayerError("backward called more than once for the same forward pass.")
        self.consumed = True
        cache, self.cache = self.cache, {}
        return cache


class Layer(ABC):
    """Abstract layer with an explicit forward/backward pair."""

    kind: ClassVar[str] = "layer"

    def __init__(self, name: str | None = None):
        self.name = name or self.kind

    def parameters(self) -> list[Parameter]:
        return []

    def buffers(self) -> list[tuple[str, npt.NDArray[np.floating]]]:
        """Non-trainable state (BatchNorm running statistics), in serialization order."""
        return []

    @abstractmethod
    def forward(
        self, x: Tensor, mode: LayerMode, rng: RngStream | None = None
    ) -> tuple[Tensor, LayerContext]:
        """Computes the layer output and the context needed by `backward`."""

    @abstractmethod
    def backward(self, ctx: LayerContext, dy: Tensor) -> Tensor:
        """Returns dL/dx and accumulates dL/dparam into each `Parameter.grad`."""

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        """Per-sample output shape (batch axis excluded)."""
        return input_shape

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r})"


def glorot_uniform(
    stream: RngStream,
    shape: tuple[int, ...],
    fan_in: int,
    fan_out: int,
    dtype: npt.DTypeLike,
) -> Tensor:
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng_uniform(stream, -limit, limit, shape, dtype=dtype)


def require_rank(layer: Layer, x: Tensor, rank: int) -> None:
    if x.ndim != rank:
        raise LayerError(f"{layer.name}: expected a rank-{rank} input, got shape {x.shape}.")
