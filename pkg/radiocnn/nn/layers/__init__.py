from .batchnorm import BatchNorm
from .conv2d import Conv2D
from .dense import Dense
from .dropout import Dropout
from .flatten import Flatten
from .global_avg_pool import GlobalAvgPool
from .maxpool import MaxPool2D
from .output import Sigmoid, Softmax
from .relu import ReLU

__all__ = [
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
