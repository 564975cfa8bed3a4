"""
Optimization

L2 weight penalty, the Adam update and the step-decay learning-rate schedule.

Key features:
- `l2_penalty`: lambda * sum(w^2) over regularized parameters, adding 2 * lambda * w
  to each gradient.
- `adam_step`: one Adam update (beta1=0.9, beta2=0.999, epsilon=1e-7) over a parameter
  list; gradients are zeroed afterwards.
- `Adam`: holds the step counter across calls, so training can resume at step t.
- `lr_at_epoch`: base_lr * factor ** floor((epoch - 1) / every).
"""

import logging
from collections.abc import Iterable

import numpy as np

from radiocnn import settings
from radiocnn.errors import RadiocnnError
from radiocnn.nn import Parameter
from radiocnn.schemas import TrainConfig

logger = logging.getLogger(__name__)


class NonFiniteGradientError(RadiocnnError):
    """Raised when a gradient holds NaN or infinity at update time."""

    def __init__(self, parameter: str):
        self.parameter = parameter
        super().__init__(f"Non-finite gradient in parameter '{parameter}'.")


def l2_penalty(params: Iterable[Parameter], accumulate_grad: bool = True) -> float:
    """Returns sum(lambda * sum(w^2)); with `accumulate_grad`, adds 2 * lambda * w to grads."""
    penalty = 0.0
    for param in params:
        if param.l2_coeff == 0.0:
            continue
        weights = param.value
        penalty += param.l2_coeff * float(np.sum(np.square(weights, dtype=np.float64)))
        if accumulate_grad:
            param.grad += (2.0 * param.l2_coeff) * weights
    return penalty


def adam_step(
    params: Iterable[Parameter],
    lr: float,
    t: int,
    beta1: float = settings.ADAM_BETA1,
    beta2: float = settings.ADAM_BETA2,
    epsilon: float = settings.ADAM_EPSILON,
) -> None:
    """
    Applies one Adam update at step `t` (1-based) and zeroes every gradient.

    Raises:
        ValueError: If t < 1.
        NonFiniteGradientError: If any gradient is NaN or infinite; no parameter is
            modified in that case.
    """
    if t < 1:
        raise ValueError(f"Adam step index must be >= 1, got {t}.")
    params = list(params)
    for param in params:
        if not np.isfinite(param.grad).all():
            raise NonFiniteGradientError(param.name)

    m_correction = 1.0 - beta1**t
    v_correction = 1.0 - beta2**t
    for param in params:
        g = param.grad
        param.adam_m *= beta1
        param.adam_m += (1.0 - beta1) * g
        param.adam_v *= beta2
        param.adam_v += (1.0 - beta2) * np.square(g)
        m_hat = param.adam_m / m_correction
        v_hat = param.adam_v / v_correction
        param.value -= lr * m_hat / (np.sqrt(v_hat) + epsilon)
        param.zero_grad()


class Adam:
    """Adam over a fixed parameter list; `t` counts the updates applied so far."""

    def __init__(self, params: Iterable[Parameter], t: int = 0):
        self.params = list(params)
        self.t = t

    def step(self, lr: float) -> None:
        adam_step(self.params, lr, self.t + 1)
        self.t += 1


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    if epoch < 1:
        raise ValueError(f"Epochs are 1-based, got {epoch}.")
    return cfg.base_lr * cfg.lr_decay_factor ** ((epoch - 1) // cfg.lr_decay_every)
