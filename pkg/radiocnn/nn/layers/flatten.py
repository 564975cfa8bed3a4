import numpy as np

from radiocnn.core import RngStream, Tensor
from radiocnn.nn.base import Layer, LayerContext, LayerMode


class Flatten(Layer):
    """Row-major reshape to (n, prod(rest)), keeping the batch axis."""

    kind = "flatten"

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        return (int(np.prod(input_shape)),)

    def forward(
        self, x: Tensor, mode: LayerMode, rng: RngStream | None = None
    ) -> tuple[Tensor, LayerContext]:
        return x.reshape(x.shape[0], -1), LayerContext(mode, {"input_shape": x.shape})

    def backward(self, ctx: LayerContext, dy: Tensor) -> Tensor:
        return dy.reshape(ctx.consume()["input_shape"])
