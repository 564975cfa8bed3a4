import numpy as np

from radiocnn.core import RngStream, Tensor
from radiocnn.nn.base import Layer, LayerContext, LayerError, LayerMode, require_rank

WINDOW = 2


class MaxPool2D(Layer):
    """
    2x2 max pooling with stride 2 and no padding; an odd trailing row or column is dropped.

    Ties route the gradient to the first maximal element in row-major window order.
    """

    kind = "maxpool"

    def output_shape(self, input_shape: tuple[int, ...]) -> tuple[int, ...]:
        h, w, c = input_shape
        if h < WINDOW or w < WINDOW:
            raise LayerError(f"{self.name}: spatial size {h}x{w} is too small to pool.")
        return (h // WINDOW, w // WINDOW, c)

    def forward(
        self, x: Tensor, mode: LayerMode, rng: RngStream | None = None
    ) -> tuple[Tensor, LayerContext]:
        require_rank(self, x, 4)
        n, h, w, c = x.shape
        h2, w2, _ = self.output_shape((h, w, c))
        cropped = x[:, : h2 * WINDOW, : w2 * WINDOW, :]
        windows = (
            cropped.reshape(n, h2, WINDOW, w2, WINDOW, c)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(n, h2, w2, c, WINDOW * WINDOW)
        )
        argmax = windows.argmax(axis=-1)
        y = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
        return y, LayerContext(mode, {"argmax": argmax, "input_shape": x.shape})

    def backward(self, ctx: LayerContext, dy: Tensor) -> Tensor:
        cache = ctx.consume()
        argmax = cache["argmax"]
        n, h, w, c = cache["input_shape"]
        _, h2, w2, _ = dy.shape
        dwindows = np.zeros((n, h2, w2, c, WINDOW * WINDOW), dtype=dy.dtype)
        np.put_along_axis(dwindows, argmax[..., None], dy[..., None], axis=-1)
        routed = (
            dwindows.reshape(n, h2, w2, c, WINDOW, WINDOW)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(n, h2 * WINDOW, w2 * WINDOW, c)
        )
        dx = np.zeros((n, h, w, c), dtype=dy.dtype)
        dx[:, : h2 * WINDOW, : w2 * WINDOW, :] = routed
        return dx
