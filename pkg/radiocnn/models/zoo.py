"""
Model Zoo

This module builds the two supported architectures from an `ArchitectureSpec` and runs
whole-model forward and backward passes.

Key features:
- `build_ccnn`: four [Conv2D -> BatchNorm -> ReLU -> MaxPool -> Dropout] blocks, then
  GlobalAvgPool -> Dense -> ReLU -> Dropout -> output head.
- `build_cnn_baseline`: three [Conv2D -> ReLU -> MaxPool -> Dropout] blocks, then
  Flatten -> Dense -> ReLU -> Dropout -> output head.
- Output head: a single sigmoid unit when `num_classes == 2`, otherwise a softmax over
  `num_classes` units.
- `Model.forward` validates the batch (shape, finiteness, [0, 1] range) and keeps the
  layer contexts in training mode; `Model.backward` consumes them.
- `param_count`: trainable element count, optionally including BatchNorm running statistics.
- `Model.recalibrate_batchnorm`: replaces BatchNorm running statistics with averages of
  batch statistics measured under the current weights.

@dependencies
- `numpy` for arrays.
- `radiocnn.nn` layers, `radiocnn.core` random streams.
- `radiocnn.schemas.ArchitectureSpec`.

@notes
- The model consumes inputs already rescaled to [0, 1]; rescaling and augmentation belong
  to `radiocnn.data`.
- The head activation's backward is fused into the loss, so `Model.backward` takes the
  gradient with respect to the head logits.
"""

import logging
from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from radiocnn.core import RngStream, StreamPurpose, Tensor, stream_for
from radiocnn.errors import RadiocnnError
from radiocnn.nn import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    GlobalAvgPool,
    Layer,
    LayerContext,
    LayerError,
    LayerMode,
    MaxPool2D,
    Parameter,
    ReLU,
    Sigmoid,
    Softmax,
)
from radiocnn.schemas import ArchitectureSpec

logger = logging.getLogger(__name__)


class ArchitectureError(RadiocnnError):
    """Raised when a spec cannot be built, or a batch does not fit the built model."""

    pass


@dataclass
class ModelSnapshot:
    """Copies of every parameter value, running statistic and Adam moment."""

    values: list[Tensor]
    buffers: list[Tensor]
    adam_m: list[Tensor]
    adam_v: list[Tensor]


class Model:
    """An ordered layer stack built from an `ArchitectureSpec`."""

    def __init__(self, spec: ArchitectureSpec, layers: list[Layer], dtype: npt.DTypeLike):
        self.spec = spec
        self.layers = layers
        self.dtype = np.dtype(dtype)
        self._contexts: list[LayerContext] | None = None

    @property
    def head(self) -> Layer:
        return self.layers[-1]

    @property
    def num_outputs(self) -> int:
        return 1 if self.spec.num_classes == 2 else self.spec.num_classes

    def parameters(self) -> list[Parameter]:
        """The parameter registry: layer order, kernel before bias, gamma before beta."""
        return [p for layer in self.layers for p in layer.parameters()]

    def buffers(self) -> list[tuple[str, npt.NDArray[np.floating]]]:
        return [b for layer in self.layers for b in layer.buffers()]

    def layer_counts(self) -> Counter[str]:
        return Counter(layer.kind for layer in self.layers)

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def check_inputs(self, x: Tensor) -> None:
        expected = tuple(self.spec.input_shape)
        if x.ndim != 4 or tuple(x.shape[1:]) != expected:
            raise ArchitectureError(
                f"Expected a batch of shape (n, {', '.join(map(str, expected))}), got {x.shape}."
            )
        if x.shape[0] < 1:
            raise ArchitectureError("Cannot run the model on an empty batch.")
        if not np.isfinite(x).all():
            raise ArchitectureError("Input batch contains non-finite values.")
        if x.min() < 0.0 or x.max() > 1.0:
            raise ArchitectureError(
                f"Input values must lie in [0, 1], got [{x.min():.4g}, {x.max():.4g}]."
                " Rescale images before calling the model."
            )

    def forward(
        self, x: Tensor, mode: LayerMode = LayerMode.INFERENCE, rng: RngStream | None = None
    ) -> Tensor:
        """
        Runs the full stack and returns class probabilities of shape (n, k) or (n, 1).

        In training mode the layer contexts are retained for a single `backward` call;
        `rng` then supplies the dropout masks, drawn in layer order.
        """
        self.check_inputs(x)
        y = x.astype(self.dtype, copy=False)
        contexts = []
        for layer in self.layers:
            y, ctx = layer.forward(y, mode, rng)
            contexts.append(ctx)
        self._contexts = contexts if mode is LayerMode.TRAINING else None
        return y

    def predict(self, x: Tensor) -> Tensor:
        return self.forward(x, LayerMode.INFERENCE)

    def backward(self, dlogits: Tensor) -> Tensor:
        """Backpropagates the gradient w.r.t. the head logits; returns dL/dinput."""
        if self._contexts is None:
            raise ArchitectureError("backward needs a preceding training-mode forward pass.")
        contexts, self._contexts = self._contexts, None
        dy = dlogits.astype(self.dtype, copy=False)
        # the head activation is fused into the loss gradient
        for layer, ctx in zip(reversed(self.layers[:-1]), reversed(contexts[:-1])):
            dy = layer.backward(ctx, dy)
        return dy

    def recalibrate_batchnorm(self, batches: Iterable[Tensor]) -> int:
        """
        Re-estimates every BatchNorm layer's running statistics for the current weights.

        Each batch runs in inference mode (dropout off) with every BatchNorm layer
        normalizing by its batch statistics; afterwards each layer's running mean and
        variance become the count-weighted averages of what it saw. Returns the number of
        batches used. With no BatchNorm layer or no batches the model is left unchanged.
        """
        norms = [layer for layer in self.layers if isinstance(layer, BatchNorm)]
        if not norms:
            return 0
        used = 0
        for norm in norms:
            norm.start_calibration()
        try:
            for x in batches:
                self.forward(x, LayerMode.INFERENCE)
                used += 1
        except BaseException:
            for norm in norms:
                norm.abort_calibration()
            raise
        for norm in norms:
            norm.finish_calibration()
        logger.debug(f"Re-estimated {len(norms)} BatchNorm layers from {used} batches.")
        return used

    def snapshot(self) -> ModelSnapshot:
        params = self.parameters()
        return ModelSnapshot(
            values=[p.value.copy() for p in params],
            buffers=[b.copy() for _, b in self.buffers()],
            adam_m=[p.adam_m.copy() for p in params],
            adam_v=[p.adam_v.copy() for p in params],
        )

    def restore(self, snapshot: ModelSnapshot) -> None:
        params = self.parameters()
        for param, value, m, v in zip(params, snapshot.values, snapshot.adam_m, snapshot.adam_v):
            param.value[...] = value
            param.adam_m[...] = m
            param.adam_v[...] = v
        for (_, buffer), saved in zip(self.buffers(), snapshot.buffers):
            buffer[...] = saved

    def summary(self) -> list[tuple[str, str, tuple[int, ...], int]]:
        """(name, kind, per-sample output shape, parameter count) for each layer."""
        rows = []
        shape = tuple(self.spec.input_shape)
        for layer in self.layers:
            shape = layer.output_shape(shape)
            rows.append((layer.name, layer.kind, shape, sum(p.size for p in layer.parameters())))
        return rows

    def __repr__(self) -> str:
        return f"Model(arch={self.spec.arch!r}, layers={len(self.layers)}, params={param_count(self)})"


class _StackBuilder:
    """Appends layers while tracking the per-sample shape, so failures name their stage."""

    def __init__(self, spec: ArchitectureSpec, seed: int, dtype: npt.DTypeLike):
        self.spec = spec
        self.seed = seed
        self.dtype = dtype
        self.layers: list[Layer] = []
        self.shape: tuple[int, ...] = tuple(spec.input_shape)
        self._init_index = 0

    def init_stream(self) -> RngStream:
        self._init_index += 1
        return stream_for(self.seed, StreamPurpose.INIT, self._init_index)

    def add(self, layer: Layer, stage: str) -> None:
        try:
            self.shape = layer.output_shape(self.shape)
        except LayerError as e:
            raise ArchitectureError(
                f"{self.spec.arch}: input {self.spec.input_shape} cannot pass {stage}: {e}"
            ) from e
        self.layers.append(layer)

    def conv_block(self, index: int, filters: int, batchnorm: bool, dropout: float) -> None:
        prefix = f"block{index}"
        stage = f"block {index}"
        conv = Conv2D(
            self.shape[-1],
            filters,
            self.init_stream(),
            l2_coeff=self.spec.l2,
            dtype=self.dtype,
            name=f"{prefix}/conv2d",
        )
        self.add(conv, stage)
        if batchnorm:
            self.add(BatchNorm(filters, dtype=self.dtype, name=f"{prefix}/batchnorm"), stage)
        self.add(ReLU(name=f"{prefix}/relu"), stage)
        self.add(MaxPool2D(name=f"{prefix}/maxpool"), f"{stage} max pooling")
        self.add(Dropout(dropout, name=f"{prefix}/dropout"), stage)

    def classifier(self) -> None:
        features = int(np.prod(self.shape))
        self.add(
            Dense(
                features,
                self.spec.dense_width,
                self.init_stream(),
                l2_coeff=self.spec.l2,
                dtype=self.dtype,
                name="dense",
            ),
            "dense",
        )
        self.add(ReLU(name="dense/relu"), "dense")
        self.add(Dropout(self.spec.head_dropout, name="head/dropout"), "head")
        units = 1 if self.spec.num_classes == 2 else self.spec.num_classes
        self.add(
            Dense(self.spec.dense_width, units, self.init_stream(), dtype=self.dtype, name="head/dense"),
            "head",
        )
        activation: Layer = Sigmoid(name="head/sigmoid") if units == 1 else Softmax(name="head/softmax")
        self.add(activation, "head")

    def build(self) -> Model:
        logger.debug(
            f"Built {self.spec.arch} with {len(self.layers)} layers, output shape {self.shape}."
        )
        return Model(self.spec, self.layers, self.dtype)


def build_ccnn(spec: ArchitectureSpec, seed: int = 0, dtype: npt.DTypeLike = np.float32) -> Model:
    if spec.arch != "ccnn":
        raise ArchitectureError(f"build_ccnn needs arch 'ccnn', got '{spec.arch}'.")
    builder = _StackBuilder(spec, seed, dtype)
    for index, filters in enumerate(spec.filters, start=1):
        builder.conv_block(index, filters, batchnorm=True, dropout=spec.block_dropout)
    builder.add(GlobalAvgPool(name="gap"), "global average pooling")
    builder.classifier()
    return builder.build()


def build_cnn_baseline(
    spec: ArchitectureSpec, seed: int = 0, dtype: npt.DTypeLike = np.float32
) -> Model:
    if spec.arch != "cnn":
        raise ArchitectureError(f"build_cnn_baseline needs arch 'cnn', got '{spec.arch}'.")
    builder = _StackBuilder(spec, seed, dtype)
    for index, filters in enumerate(spec.filters, start=1):
        builder.conv_block(index, filters, batchnorm=False, dropout=spec.block_dropout)
    builder.add(Flatten(name="flatten"), "flatten")
    builder.classifier()
    return builder.build()


def build_model(spec: ArchitectureSpec, seed: int = 0, dtype: npt.DTypeLike = np.float32) -> Model:
    """Builds the model named by `spec.arch` with weights drawn from `seed`."""
    if spec.arch == "ccnn":
        return build_ccnn(spec, seed, dtype)
    return build_cnn_baseline(spec, seed, dtype)


def param_count(model: Model | Layer, include_buffers: bool = False) -> int:
    """
    Number of trainable elements in the registry.

    With `include_buffers`, BatchNorm running statistics are counted too, which gives the
    total most frameworks print in their model summaries.
    """
    total = sum(p.size for p in model.parameters())
    if include_buffers:
        total += sum(int(b.size) for _, b in model.buffers())
    return total
