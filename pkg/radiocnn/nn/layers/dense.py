import numpy as np
import numpy.typing as npt

from radiocnn.core import RngStream, Tensor, matmul
from radiocnn.nn.base import (
    Layer,
    LayerContext,
    LayerError,
    LayerMode,
    Parameter,
    glorot_uniform,
    require_rank,
)


class Dense(Layer):
    """
    Affine map y = x W + b. Activations are separate layers.

    Backward: dW = x^T dy, db = column sums of dy, dx = dy W^T.
    """

    kind = "dense"

    def __init__(
        self,
        in_features: int,
        out_features: int,
        init_stream: RngStream,
        l2_coeff: float = 0.0,
        dtype: npt.DTypeLike = np.float32,
        name: str | None = None,
    ):
        super().__init__(name)
        if in_features < 1 or out_features < 1:
            raise LayerError(f"{self.name}: feature counts must be positive.")
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(
            f"{self.name}/kernel",
            glorot_uniform(
                init_stream, (in_features, out_features), in_features, out_features, dtype
            ),
            l2_coeff=l2_coeff,
        )
        self.bias = Parameter(f"{self.name}/bias", np.zeros(out_features, dtype=dtype))

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        if input_shape != (self.in_features,):
            raise LayerError(
                f"{self.name}: expected {self.in_features} input features, got {input_shape}."
            )
        return (self.out_features,)

    def forward(
        self, x: Tensor, mode: LayerMode, rng: RngStream | None = None
    ) -> tuple[Tensor, LayerContext]:
        require_rank(self, x, 2)
        if x.shape[1] != self.in_features:
            raise LayerError(
                f"{self.name}: expected {self.in_features} input features, got {x.shape[1]}."
            )
        y = matmul(x, self.weight.value) + self.bias.value
        return y, LayerContext(mode, {"x": x})

    def backward(self, ctx: LayerContext, dy: Tensor) -> Tensor:
        x = ctx.consume()["x"]
        self.weight.grad += matmul(x.T, dy)
        self.bias.grad += dy.sum(axis=0)
        return matmul(dy, self.weight.value.T)
