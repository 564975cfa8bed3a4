import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view

from radiocnn.core import RngStream, Tensor, matmul, pad2d
from radiocnn.nn.base import (
    Layer,
    LayerContext,
    LayerError,
    LayerMode,
    Parameter,
    glorot_uniform,
    require_rank,
)

KERNEL_SIZE = 3


class Conv2D(Layer):
    """
    3x3, stride-1, same-padded convolution over NHWC input, computed as im2col + matmul.

    y[n, i, j, o] = sum_{di, dj, c} xpad[n, i + di, j + dj, c] * k[di, dj, c, o] + b[o]
    where xpad is x zero-padded by one pixel on every side.
    """

    kind = "conv2d"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        init_stream: RngStream,
        l2_coeff: float = 0.0,
        dtype: npt.DTypeLike = np.float32,
        name: str | None = None,
    ):
        super().__init__(name)
        if in_channels < 1 or out_channels < 1:
            raise LayerError(f"{self.name}: channel counts must be positive.")
        self.in_channels = in_channels
        self.out_channels = out_channels
        shape = (KERNEL_SIZE, KERNEL_SIZE, in_channels, out_channels)
        fan_in = KERNEL_SIZE * KERNEL_SIZE * in_channels
        fan_out = KERNEL_SIZE * KERNEL_SIZE * out_channels
        self.kernel = Parameter(
            f"{self.name}/kernel",
            glorot_uniform(init_stream, shape, fan_in, fan_out, dtype),
            l2_coeff=l2_coeff,
        )
        self.bias = Parameter(f"{self.name}/bias", np.zeros(out_channels, dtype=dtype))

    def parameters(self) -> list[Parameter]:
        return [self.kernel, self.bias]

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        h, w, _ = input_shape
        return (h, w, self.out_channels)

    def _columns(self, x: Tensor) -> Tensor:
        n, h, w, c = x.shape
        padded = pad2d(x, 1, 1, 1, 1)
        # (n, h, w, c, 3, 3) -> (n, h, w, 3, 3, c) so rows match the kernel's (di, dj, c) order
        windows = sliding_window_view(padded, (KERNEL_SIZE, KERNEL_SIZE), axis=(1, 2))
        windows = windows.transpose(0, 1, 2, 4, 5, 3)
        return windows.reshape(n * h * w, KERNEL_SIZE * KERNEL_SIZE * c)

    def forward(
        self, x: Tensor, mode: LayerMode, rng: RngStream | None = None
    ) -> tuple[Tensor, LayerContext]:
        require_rank(self, x, 4)
        n, h, w, c = x.shape
        if c != self.in_channels:
            raise LayerError(
                f"{self.name}: expected {self.in_channels} input channels, got {c}."
            )
        cols = self._columns(x)
        weights = self.kernel.value.reshape(-1, self.out_channels)
        y = matmul(cols, weights) + self.bias.value
        ctx = LayerContext(mode, {"cols": cols, "input_shape": x.shape})
        return y.reshape(n, h, w, self.out_channels), ctx

    def backward(self, ctx: LayerContext, dy: Tensor) -> Tensor:
        cache = ctx.consume()
        cols = cache["cols"]
        n, h, w, c = cache["input_shape"]
        dy2 = dy.reshape(-1, self.out_channels)
        weights = self.kernel.value.reshape(-1, self.out_channels)

        self.kernel.grad += matmul(cols.T, dy2).reshape(self.kernel.shape)
        self.bias.grad += dy2.sum(axis=0)

        dcols = matmul(dy2, weights.T).reshape(n, h, w, KERNEL_SIZE, KERNEL_SIZE, c)
        dpadded = np.zeros((n, h + 2, w + 2, c), dtype=dy.dtype)
        for di in range(KERNEL_SIZE):
            for dj in range(KERNEL_SIZE):
                dpadded[:, di : di + h, dj : dj + w, :] += dcols[:, :, :, di, dj, :]
        return dpadded[:, 1 : h + 1, 1 : w + 1, :]
