import numpy as np

from radiocnn.core import RngStream, Tensor
from radiocnn.nn.base import Layer, LayerContext, LayerMode, require_rank


class Softmax(Layer):
    """Row-wise softmax with max subtraction. Training fuses its gradient into the loss."""

    kind = "softmax"

    def forward(
        self, z: Tensor, mode: LayerMode, rng: RngStream | None = None
    ) -> tuple[Tensor, LayerContext]:
        require_rank(self, z, 2)
        shifted = z - z.max(axis=1, keepdims=True)
        exp = np.exp(shifted)
        probs = exp / exp.sum(axis=1, keepdims=True)
        return probs, LayerContext(mode, {"probs": probs})

    def backward(self, ctx: LayerContext, dy: Tensor) -> Tensor:
        probs = ctx.consume()["probs"]
        return probs * (dy - (dy * probs).sum(axis=1, keepdims=True))


class Sigmoid(Layer):
    """Elementwise logistic 1 / (1 + e^-z), evaluated without overflow for large |z|."""

    kind = "sigmoid"

    def forward(
        self, z: Tensor, mode: LayerMode, rng: RngStream | None = None
    ) -> tuple[Tensor, LayerContext]:
        decay = np.exp(-np.abs(z))
        probs = np.where(z >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay)).astype(
            z.dtype, copy=False
        )
        return probs, LayerContext(mode, {"probs": probs})

    def backward(self, ctx: LayerContext, dy: Tensor) -> Tensor:
        probs = ctx.consume()["probs"]
        return dy * probs * (1.0 - probs)
