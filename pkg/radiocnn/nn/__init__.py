"""
radiocnn Neural-Network Subpackage

This module initializes the `radiocnn.nn` subpackage and exports the layer interface
and every layer implementation.

Key features:
- Exports `Parameter`, `LayerMode`, `LayerContext`, `Layer` and `LayerError` from `base`.
- Exports the concrete layers from `radiocnn.nn.layers`.

@notes
- The gradient-check harness lives in `radiocnn.nn.gradcheck` and is imported on demand;
  it depends on the model and loss modules, which themselves depend on this package.
"""

from .base import Layer, LayerContext, LayerError, LayerMode, Parameter, glorot_uniform
from .layers import (
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

__all__ = [
    "Parameter",
    "LayerMode",
    "LayerContext",
    "Layer",
    "LayerError",
    "glorot_uniform",
    "Conv2D",
    "BatchNorm",
    "ReLU",
    "MaxPool2D",
    "Dropout",
    "GlobalAvgPool",
    "Flatten",
    "Dense",
    "Softmax",
    "Sigmoid",
]
