import numpy as np

from radiocnn.core import RngStream, Tensor
from radiocnn.nn.base import Layer, LayerContext, LayerMode


class ReLU(Layer):
    """y = max(x, 0); the subgradient at exactly 0 is 0."""

    kind = "relu"

    def forward(
        self, x: Tensor, mode: LayerMode, rng: RngStream | None = None
    ) -> tuple[Tensor, LayerContext]:
        active = x > 0
        return np.where(active, x, 0).astype(x.dtype, copy=False), LayerContext(
            mode, {"active": active}
        )

    def backward(self, ctx: LayerContext, dy: Tensor) -> Tensor:
        active = ctx.consume()["active"]
        return np.where(active, dy, 0).astype(dy.dtype, copy=False)
