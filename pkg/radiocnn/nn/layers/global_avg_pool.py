import numpy as np

from radiocnn.core import RngStream, Tensor, reduce_mean
from radiocnn.nn.base import Layer, LayerContext, LayerMode, require_rank


class GlobalAvgPool(Layer):
    """Per-sample, per-channel spatial mean: (n, h, w, c) -> (n, c)."""

    kind = "global_avg_pool"

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        return (input_shape[-1],)

    def forward(
        self, x: Tensor, mode: LayerMode, rng: RngStream | None = None
    ) -> tuple[Tensor, LayerContext]:
        require_rank(self, x, 4)
        return reduce_mean(x, (1, 2)), LayerContext(mode, {"input_shape": x.shape})

    def backward(self, ctx: LayerContext, dy: Tensor) -> Tensor:
        n, h, w, c = ctx.consume()["input_shape"]
        spread = dy[:, None, None, :] / dy.dtype.type(h * w)
        return np.broadcast_to(spread, (n, h, w, c)).copy()
