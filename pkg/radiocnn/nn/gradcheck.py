"""
Gradient Checking

Compares analytic backward passes against central finite differences in float64.

Key features:
- `gradcheck_layer`: one layer, scalar objective sum(R * layer(x)) with a fixed random
  projection R; checks dL/dx and every parameter gradient.
- `gradcheck_loss_head`: cross-entropy over softmax (or sigmoid) over a dense layer, using
  the fused loss gradient.
- `gradcheck_model`: the full loss (data term plus L2 penalty) of a small CCNN
  (8x8 input, filters [2, 3], dense width 4) against every parameter.
- `run_gradchecks`: the named checks behind `radiocnn gradcheck`.

The relative error of one tensor is max|a - n| / max(1e-8, max(|a| + |n|)); a check
reports the maximum over its tensors.

@notes
- Dropout masks are frozen by replaying the same random stream on every forward pass.
- BatchNorm is checked in training mode on a fixed batch; running statistics are restored
  after the check.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from radiocnn import settings
from radiocnn.core import CHECK_DTYPE, RngStream, StreamPurpose, Tensor, rng_normal, rng_uniform, stream_for
from radiocnn.errors import RadiocnnError
from radiocnn.nn.base import Layer, LayerMode, Parameter
from radiocnn.nn.layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    GlobalAvgPool,
    MaxPool2D,
    ReLU,
    Sigmoid,
    Softmax,
)

logger = logging.getLogger(__name__)

MIN_DENOMINATOR = 1e-8


class GradientCheckError(RadiocnnError):
    pass


@dataclass(frozen=True)
class GradcheckResult:
    name: str
    error: float
    tolerance: float = settings.GRADCHECK_TOLERANCE

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance


def relative_error(analytic: Tensor, numeric: Tensor) -> float:
    if not (np.isfinite(analytic).all() and np.isfinite(numeric).all()):
        raise GradientCheckError("Gradient contains non-finite values.")
    diff = float(np.max(np.abs(analytic - numeric)))
    scale = float(np.max(np.abs(analytic) + np.abs(numeric)))
    return diff / max(MIN_DENOMINATOR, scale)


def numeric_gradient(objective: Callable[[], float], array: Tensor, step: float) -> Tensor:
    """Central differences of `objective` w.r.t. each element of `array`, perturbed in place."""
    grad = np.zeros_like(array)
    for index in np.ndindex(array.shape):
        original = array[index]
        array[index] = original + step
        plus = objective()
        array[index] = original - step
        minus = objective()
        array[index] = original
        grad[index] = (plus - minus) / (2.0 * step)
    if not np.isfinite(grad).all():
        raise GradientCheckError("Objective became non-finite under perturbation.")
    return grad


def _require_float64(params: list[Parameter]) -> None:
    for param in params:
        if param.value.dtype != CHECK_DTYPE:
            raise GradientCheckError(
                f"Parameter '{param.name}' is {param.value.dtype}; gradient checks need float64."
            )


def _save_buffers(layers: list[Layer]) -> list[npt.NDArray[np.floating]]:
    return [buf.copy() for layer in layers for _, buf in layer.buffers()]


def _restore_buffers(layers: list[Layer], saved: list[npt.NDArray[np.floating]]) -> None:
    buffers = [buf for layer in layers for _, buf in layer.buffers()]
    for buf, value in zip(buffers, saved):
        buf[...] = value


def gradcheck_layer(
    layer: Layer,
    input_shape: tuple[int, ...],
    mode: LayerMode = LayerMode.TRAINING,
    seed: int = 0,
    step: float = settings.GRADCHECK_STEP,
    inputs: Tensor | None = None,
) -> float:
    """
    Max relative error between the analytic and numeric gradients of one layer.

    Raises:
        GradientCheckError: If a parameter is not float64 or any value is non-finite.
    """
    params = layer.parameters()
    _require_float64(params)
    if inputs is None:
        x = rng_uniform(stream_for(seed, StreamPurpose.GRADCHECK, 0), -1.0, 1.0, input_shape, CHECK_DTYPE)
    else:
        x = np.array(inputs, dtype=CHECK_DTYPE)
    mask_stream = stream_for(seed, StreamPurpose.GRADCHECK, 2)
    saved = _save_buffers([layer])

    def run(values: Tensor):
        return layer.forward(values, mode, mask_stream.replay())

    try:
        y, ctx = run(x)
        projection = rng_normal(stream_for(seed, StreamPurpose.GRADCHECK, 1), 0.0, 1.0, y.shape, CHECK_DTYPE)

        for param in params:
            param.zero_grad()
        dx = layer.backward(ctx, projection)
        analytic = [(f"{layer.name}/input", dx, x)]
        analytic += [(p.name, p.grad.copy(), p.value) for p in params]

        def objective() -> float:
            out, _ = run(x)
            return float(np.sum(projection * out))

        errors = {}
        for name, grad, array in analytic:
            errors[name] = relative_error(grad, numeric_gradient(objective, array, step))
    finally:
        _restore_buffers([layer], saved)

    worst = max(errors.values())
    logger.debug(f"gradcheck {layer.name}: {errors}")
    return worst


def _distinct_inputs(seed: int, shape: tuple[int, ...]) -> Tensor:
    count = int(np.prod(shape))
    order = stream_for(seed, StreamPurpose.GRADCHECK, 3).permutation(count)
    return (order.reshape(shape) / count - 0.5).astype(CHECK_DTYPE)


def _off_kink_inputs(seed: int, shape: tuple[int, ...]) -> Tensor:
    magnitude = rng_uniform(stream_for(seed, StreamPurpose.GRADCHECK, 3), 0.1, 1.0, shape, CHECK_DTYPE)
    signs = rng_uniform(stream_for(seed, StreamPurpose.GRADCHECK, 4), 0.0, 1.0, shape, CHECK_DTYPE)
    return np.where(signs < 0.5, -magnitude, magnitude)


def _init(seed: int, index: int) -> RngStream:
    return stream_for(seed, StreamPurpose.INIT, index)


def _batchnorm(seed: int) -> BatchNorm:
    layer = BatchNorm(2, dtype=CHECK_DTYPE)
    layer.gamma.value[...] = rng_uniform(_init(seed, 1), 0.5, 1.5, 2, CHECK_DTYPE)
    layer.beta.value[...] = rng_uniform(_init(seed, 2), -0.5, 0.5, 2, CHECK_DTYPE)
    return layer


def _check_spec(name: str, seed: int) -> tuple[Layer, tuple[int, ...], Tensor | None]:
    if name == "conv2d":
        return Conv2D(2, 3, _init(seed, 1), dtype=CHECK_DTYPE), (1, 6, 6, 2), None
    if name == "batchnorm":
        return _batchnorm(seed), (4, 3, 3, 2), None
    if name == "relu":
        shape = (2, 4, 4, 3)
        return ReLU(), shape, _off_kink_inputs(seed, shape)
    if name == "maxpool":
        shape = (2, 4, 4, 3)
        return MaxPool2D(), shape, _distinct_inputs(seed, shape)
    if name == "dropout":
        return Dropout(0.3), (2, 4, 4, 3), None
    if name == "global_avg_pool":
        return GlobalAvgPool(), (2, 3, 3, 4), None
    if name == "flatten":
        return Flatten(), (2, 3, 3, 2), None
    if name == "dense":
        return Dense(5, 4, _init(seed, 1), dtype=CHECK_DTYPE), (3, 5), None
    if name == "softmax":
        return Softmax(), (3, 4), None
    if name == "sigmoid":
        return Sigmoid(), (3, 1), None
    raise KeyError(name)


LAYER_CHECKS = (
    "conv2d",
    "batchnorm",
    "relu",
    "maxpool",
    "dropout",
    "global_avg_pool",
    "flatten",
    "dense",
    "softmax",
    "sigmoid",
)
LOSS_CHECKS = ("softmax_ce", "sigmoid_bce")


def gradcheck_loss_head(
    head: str = "softmax_ce", seed: int = 0, step: float = settings.GRADCHECK_STEP
) -> float:
    """Checks the fused cross-entropy gradient through its activation and a dense layer."""
    # imported here: the loss module depends on this package
    from radiocnn.train.losses import head_loss

    units = 3 if head == "softmax_ce" else 1
    dense = Dense(4, units, _init(seed, 1), dtype=CHECK_DTYPE)
    activation: Layer = Softmax() if units > 1 else Sigmoid()
    x = rng_uniform(stream_for(seed, StreamPurpose.GRADCHECK, 0), -1.0, 1.0, (5, 4), CHECK_DTYPE)
    labels = np.array([0, 1, 2, 1, 0]) if units > 1 else np.array([0, 1, 1, 0, 1])

    def objective() -> float:
        logits, _ = dense.forward(x, LayerMode.TRAINING)
        probs, _ = activation.forward(logits, LayerMode.TRAINING)
        return head_loss(probs, labels)[0]

    dense.weight.zero_grad()
    dense.bias.zero_grad()
    logits, ctx = dense.forward(x, LayerMode.TRAINING)
    probs, _ = activation.forward(logits, LayerMode.TRAINING)
    _, dlogits = head_loss(probs, labels)
    dx = dense.backward(ctx, dlogits)

    checks = [(dx, x), (dense.weight.grad.copy(), dense.weight.value), (dense.bias.grad.copy(), dense.bias.value)]
    return max(relative_error(grad, numeric_gradient(objective, array, step)) for grad, array in checks)


def gradcheck_model(seed: int = 0, step: float = settings.GRADCHECK_STEP, batch_size: int = 4) -> float:
    """End-to-end check of the mini-CCNN loss (including L2) against every parameter."""
    from radiocnn.models import build_ccnn
    from radiocnn.schemas import ArchitectureSpec
    from radiocnn.train.losses import head_loss
    from radiocnn.train.optim import l2_penalty

    spec = ArchitectureSpec(arch="ccnn", input_shape=(8, 8, 3), num_classes=3, filters=(2, 3), dense_width=4)
    model = build_ccnn(spec, seed=seed, dtype=CHECK_DTYPE)
    params = model.parameters()
    _require_float64(params)
    x = rng_uniform(stream_for(seed, StreamPurpose.GRADCHECK, 0), 0.1, 0.9, (batch_size, 8, 8, 3), CHECK_DTYPE)
    labels = np.arange(batch_size) % spec.num_classes
    mask_stream = stream_for(seed, StreamPurpose.GRADCHECK, 2)
    saved = _save_buffers(model.layers)

    def objective() -> float:
        probs = model.forward(x, LayerMode.TRAINING, mask_stream.replay())
        return head_loss(probs, labels)[0] + l2_penalty(params, accumulate_grad=False)

    try:
        model.zero_grad()
        probs = model.forward(x, LayerMode.TRAINING, mask_stream.replay())
        _, dlogits = head_loss(probs, labels)
        l2_penalty(params)
        model.backward(dlogits)
        analytic = [(p.name, p.grad.copy(), p.value) for p in params]
        errors = {name: relative_error(grad, numeric_gradient(objective, array, step)) for name, grad, array in analytic}
    finally:
        _restore_buffers(model.layers, saved)
    worst_name = max(errors, key=errors.get)
    logger.debug(f"gradcheck e2e: worst tensor {worst_name} at {errors[worst_name]:.3e}")
    return errors[worst_name]


def run_gradchecks(
    names: list[str] | None = None, e2e: bool = False, seed: int = 0
) -> list[GradcheckResult]:
    """
    Runs the named checks (layers and loss heads; all of them when `names` is None) and,
    with `e2e`, the whole-model check.

    Raises:
        KeyError: For an unknown check name.
    """
    selected = list(LAYER_CHECKS + LOSS_CHECKS) if names is None else names
    unknown = [n for n in selected if n not in LAYER_CHECKS + LOSS_CHECKS]
    if unknown:
        raise KeyError(f"Unknown gradient check(s): {', '.join(unknown)}.")

    results = []
    for name in selected:
        if name in LOSS_CHECKS:
            error = gradcheck_loss_head(name, seed)
        else:
            layer, shape, inputs = _check_spec(name, seed)
            error = gradcheck_layer(layer, shape, LayerMode.TRAINING, seed, inputs=inputs)
        results.append(GradcheckResult(name, error))
        logger.info(f"gradcheck {name}: {error:.3e}")
    if e2e:
        error = gradcheck_model(seed)
        results.append(GradcheckResult("e2e", error))
        logger.info(f"gradcheck e2e: {error:.3e}")
    return results
