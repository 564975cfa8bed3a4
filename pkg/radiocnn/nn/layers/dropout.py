import numpy as np

from radiocnn.core import RngStream, Tensor, rng_uniform
from radiocnn.nn.base import Layer, LayerContext, LayerError, LayerMode


class Dropout(Layer):
    """
    Inverted dropout: in training each element survives with probability 1 - rate and
    survivors are scaled by 1 / (1 - rate). Inference is the identity.
    """

    kind = "dropout"

    def __init__(self, rate: float, name: str | None = None):
        super().__init__(name)
        if not 0.0 <= rate < 1.0:
            raise LayerError(f"{self.name}: dropout rate must lie in [0, 1), got {rate}.")
        self.rate = rate

    def forward(
        self, x: Tensor, mode: LayerMode, rng: RngStream | None = None
    ) -> tuple[Tensor, LayerContext]:
        if mode is LayerMode.INFERENCE or self.rate == 0.0:
            return x, LayerContext(mode, {"mask": None})
        if rng is None:
            raise LayerError(f"{self.name}: training-mode dropout needs a random stream.")
        draws = rng_uniform(rng, 0.0, 1.0, x.shape, dtype=np.float64)
        mask = (draws >= self.rate).astype(x.dtype) / x.dtype.type(1.0 - self.rate)
        return x * mask, LayerContext(mode, {"mask": mask})

    def backward(self, ctx: LayerContext, dy: Tensor) -> Tensor:
        mask = ctx.consume()["mask"]
        return dy if mask is None else dy * mask
