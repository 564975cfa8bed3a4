import numpy as np
import numpy.typing as npt

from radiocnn import settings
from radiocnn.core import RngStream, Tensor
from radiocnn.nn.base import Layer, LayerContext, LayerError, LayerMode, Parameter


class _Calibration:
    def __init__(self, channels: int):
        self.count = 0
        self.mean_sum = np.zeros(channels, dtype=np.float64)
        self.var_sum = np.zeros(channels, dtype=np.float64)


class BatchNorm(Layer):
    """
    Per-channel batch normalization over every axis but the last.

    Training uses batch statistics and updates the running estimates as
    running = momentum * running + (1 - momentum) * batch. Inference uses the running
    estimates and leaves them untouched, except between `start_calibration` and
    `finish_calibration`, where inference passes normalize with batch statistics and the
    running estimates are then replaced by the count-weighted average of those statistics.
    """

    kind = "batchnorm"

    def __init__(
        self,
        channels: int,
        epsilon: float = settings.BATCHNORM_EPSILON,
        momentum: float = settings.BATCHNORM_MOMENTUM,
        dtype: npt.DTypeLike = np.float32,
        name: str | None = None,
    ):
        super().__init__(name)
        if channels < 1:
            raise LayerError(f"{self.name}: channel count must be positive.")
        if not 0.0 <= momentum <= 1.0:
            raise LayerError(f"{self.name}: momentum must lie in [0, 1], got {momentum}.")
        self.channels = channels
        self.epsilon = epsilon
        self.momentum = momentum
        self.gamma = Parameter(f"{self.name}/gamma", np.ones(channels, dtype=dtype))
        self.beta = Parameter(f"{self.name}/beta", np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._calibration: _Calibration | None = None

    def parameters(self) -> list[Parameter]:
        return [self.gamma, self.beta]

    def buffers(self) -> list[tuple[str, npt.NDArray[np.floating]]]:
        return [
            (f"{self.name}/running_mean", self.running_mean),
            (f"{self.name}/running_var", self.running_var),
        ]

    @property
    def calibrating(self) -> bool:
        return self._calibration is not None

    def start_calibration(self) -> None:
        self._calibration = _Calibration(self.channels)

    def finish_calibration(self) -> bool:
        """Installs the collected statistics; returns False (estimates untouched) if none were seen."""
        if self._calibration is None:
            raise LayerError(f"{self.name}: finish_calibration called without start_calibration.")
        calibration, self._calibration = self._calibration, None
        if calibration.count == 0:
            return False
        self.running_mean[...] = calibration.mean_sum / calibration.count
        self.running_var[...] = calibration.var_sum / calibration.count
        return True

    def abort_calibration(self) -> None:
        self._calibration = None

    def _batch_statistics(self, x: Tensor, axes: tuple[int, ...]) -> tuple[Tensor, Tensor, int]:
        count = x.size // self.channels
        if count < 2:
            raise LayerError(
                f"{self.name}: batch statistics need at least 2 values per channel, got {count}."
            )
        return x.mean(axis=axes), x.var(axis=axes), count

    def forward(
        self, x: Tensor, mode: LayerMode, rng: RngStream | None = None
    ) -> tuple[Tensor, LayerContext]:
        if x.ndim < 2 or x.shape[-1] != self.channels:
            raise LayerError(
                f"{self.name}: expected {self.channels} channels on the last axis, got shape {x.shape}."
            )
        axes = tuple(range(x.ndim - 1))
        if mode is LayerMode.TRAINING:
            mean, var, count = self._batch_statistics(x, axes)
            self.running_mean *= self.momentum
            self.running_mean += (1.0 - self.momentum) * mean
            self.running_var *= self.momentum
            self.running_var += (1.0 - self.momentum) * var
        elif self._calibration is not None:
            mean, var, count = self._batch_statistics(x, axes)
            self._calibration.count += count
            self._calibration.mean_sum += count * mean.astype(np.float64)
            self._calibration.var_sum += count * var.astype(np.float64)
        else:
            mean, var = self.running_mean, self.running_var
            count = x.size // self.channels

        inv_std = 1.0 / np.sqrt(var + self.epsilon)
        x_hat = (x - mean) * inv_std
        y = self.gamma.value * x_hat + self.beta.value
        ctx = LayerContext(mode, {"x_hat": x_hat, "inv_std": inv_std, "count": count})
        return y.astype(x.dtype, copy=False), ctx

    def backward(self, ctx: LayerContext, dy: Tensor) -> Tensor:
        cache = ctx.consume()
        x_hat, inv_std, count = cache["x_hat"], cache["inv_std"], cache["count"]
        axes = tuple(range(dy.ndim - 1))

        self.gamma.grad += (dy * x_hat).sum(axis=axes)
        self.beta.grad += dy.sum(axis=axes)

        dx_hat = dy * self.gamma.value
        if ctx.mode is LayerMode.INFERENCE:
            return (dx_hat * inv_std).astype(dy.dtype, copy=False)
        # mean and variance both depend on x in training mode
        dx = (inv_std / count) * (
            count * dx_hat
            - dx_hat.sum(axis=axes)
            - x_hat * (dx_hat * x_hat).sum(axis=axes)
        )
        return dx.astype(dy.dtype, copy=False)
