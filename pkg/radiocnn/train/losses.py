"""
Loss Functions

Cross-entropy losses for the two output heads. Each returns the mean loss together with
the gradient with respect to the pre-activation logits, fused with the softmax or sigmoid
stage so the head activation never needs a standalone backward pass.

Key features:
- `sparse_ce_loss`: softmax head with integer labels, gradient (probs - onehot) / n.
- `binary_ce_loss`: single sigmoid unit with 0/1 labels, gradient (p - y) / n.
- `head_loss` / `predict_labels`: dispatch on the head width (1 unit -> binary).

@notes
- log() is floored at log(PROBABILITY_CLAMP) so saturated predictions stay finite.
"""

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from radiocnn import settings
from radiocnn.core import Tensor
from radiocnn.errors import RadiocnnError


class LossError(RadiocnnError, ValueError):
    """Raised for labels that do not fit the prediction head."""

    pass


def _as_labels(labels: Sequence[int] | npt.NDArray[np.integer], n: int) -> npt.NDArray[np.int64]:
    array = np.asarray(labels, dtype=np.int64).reshape(-1)
    if array.shape[0] != n:
        raise LossError(f"Expected {n} labels, got {array.shape[0]}.")
    return array


def sparse_ce_loss(
    probs: Tensor, labels: Sequence[int] | npt.NDArray[np.integer]
) -> tuple[float, Tensor]:
    """Sparse categorical cross-entropy over softmax outputs of shape (n, k)."""
    if probs.ndim != 2 or probs.shape[1] < 2:
        raise LossError(f"sparse_ce_loss expects (n, k>=2) probabilities, got {probs.shape}.")
    n, k = probs.shape
    targets = _as_labels(labels, n)
    if targets.min() < 0 or targets.max() >= k:
        raise LossError(f"Labels must lie in [0, {k}), got range [{targets.min()}, {targets.max()}].")

    picked = probs[np.arange(n), targets].astype(np.float64)
    loss = -np.mean(np.log(np.maximum(picked, settings.PROBABILITY_CLAMP)))

    dlogits = probs.copy()
    dlogits[np.arange(n), targets] -= 1
    dlogits /= probs.dtype.type(n)
    return float(loss), dlogits


def binary_ce_loss(
    probs: Tensor, labels: Sequence[int] | npt.NDArray[np.integer]
) -> tuple[float, Tensor]:
    """Binary cross-entropy over sigmoid outputs of shape (n, 1)."""
    if probs.ndim != 2 or probs.shape[1] != 1:
        raise LossError(f"binary_ce_loss expects (n, 1) probabilities, got {probs.shape}.")
    n = probs.shape[0]
    targets = _as_labels(labels, n)
    if not np.isin(targets, (0, 1)).all():
        raise LossError("Binary labels must be 0 or 1.")

    eps = settings.PROBABILITY_CLAMP
    p = np.clip(probs[:, 0].astype(np.float64), eps, 1.0 - eps)
    y = targets.astype(np.float64)
    loss = -np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))

    dlogit = (probs - targets[:, None].astype(probs.dtype)) / probs.dtype.type(n)
    return float(loss), dlogit


def head_loss(probs: Tensor, labels: Sequence[int] | npt.NDArray[np.integer]) -> tuple[float, Tensor]:
    if probs.ndim == 2 and probs.shape[1] == 1:
        return binary_ce_loss(probs, labels)
    return sparse_ce_loss(probs, labels)


def predict_labels(probs: Tensor) -> npt.NDArray[np.int64]:
    """argmax for a softmax head, threshold 0.5 for a single sigmoid unit."""
    if probs.shape[1] == 1:
        return (probs[:, 0] > 0.5).astype(np.int64)
    return probs.argmax(axis=1).astype(np.int64)
