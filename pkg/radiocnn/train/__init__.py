"""
radiocnn Training Subpackage

Losses, the L2 penalty, Adam, the learning-rate schedule, early stopping and the
epoch loop.
"""

from .early_stop import EarlyStopState, StopDecision, early_stop_update, restore_best
from .losses import LossError, binary_ce_loss, head_loss, predict_labels, sparse_ce_loss
from .loop import EvaluationResult, TrainingAbortedError, TrainingError, evaluate, fit
from .optim import Adam, NonFiniteGradientError, adam_step, l2_penalty, lr_at_epoch

__all__ = [
    "EarlyStopState",
    "StopDecision",
    "early_stop_update",
    "restore_best",
    "LossError",
    "binary_ce_loss",
    "head_loss",
    "predict_labels",
    "sparse_ce_loss",
    "EvaluationResult",
    "TrainingAbortedError",
    "TrainingError",
    "evaluate",
    "fit",
    "Adam",
    "NonFiniteGradientError",
    "adam_step",
    "l2_penalty",
    "lr_at_epoch",
]
