"""
Training Loop

`fit` runs the epoch loop: set the learning rate, train on every batch (forward, loss plus
L2 penalty, backward, Adam), re-estimate BatchNorm statistics from the epoch's training
batches, evaluate on the validation source, record a history row and
update early stopping. The model ends holding the weights of the best validation epoch.

`evaluate` runs an inference pass and returns loss (including the L2 penalty), accuracy
and the confusion matrix.

@dependencies
- `tqdm` for per-epoch batch progress.
- `radiocnn.train.losses`, `radiocnn.train.optim`, `radiocnn.train.early_stop`.
- `radiocnn.metrics` for the confusion matrix and history rows.

@notes
- Dropout masks for batch b of epoch e come from a stream keyed on (seed, e, b).
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from tqdm import tqdm

from radiocnn.core import StreamPurpose, stream_for
from radiocnn.data import BatchSource
from radiocnn.errors import RadiocnnError
from radiocnn.metrics import ConfusionMatrix, HistoryRow, TrainingHistory, accuracy, confusion
from radiocnn.models import Model
from radiocnn.nn import LayerMode
from radiocnn.schemas import TrainConfig
from radiocnn.train.early_stop import EarlyStopState, StopDecision, early_stop_update, restore_best
from radiocnn.train.losses import head_loss, predict_labels
from radiocnn.train.optim import Adam, NonFiniteGradientError, l2_penalty, lr_at_epoch

logger = logging.getLogger(__name__)


class TrainingError(RadiocnnError):
    pass


class TrainingAbortedError(TrainingError):
    """Raised when a loss turns non-finite; carries the epoch and batch index."""

    def __init__(self, epoch: int, batch: int | None, detail: str):
        self.epoch = epoch
        self.batch = batch
        where = f"epoch {epoch}" + (f", batch {batch}" if batch is not None else " (validation)")
        super().__init__(f"Training aborted at {where}: {detail}")


@dataclass
class EvaluationResult:
    loss: float
    accuracy: float
    confusion: ConfusionMatrix

    @property
    def samples(self) -> int:
        return self.confusion.total


def evaluate(model: Model, source: BatchSource, epoch: int = 1) -> EvaluationResult:
    """
    Inference-mode pass over `source`.

    Raises:
        TrainingError: If the source yields no samples.
    """
    loss_sum = 0.0
    labels: list[np.ndarray] = []
    predictions: list[np.ndarray] = []
    for batch in source.batches(epoch):
        probs = model.forward(batch.inputs, LayerMode.INFERENCE)
        data_loss, _ = head_loss(probs, batch.labels)
        loss_sum += data_loss * len(batch)
        labels.append(batch.labels)
        predictions.append(predict_labels(probs))
    if not labels:
        raise TrainingError("Cannot evaluate on an empty source.")

    y = np.concatenate(labels)
    cm = confusion(y, np.concatenate(predictions), model.spec.num_classes)
    loss = loss_sum / len(y) + l2_penalty(model.parameters(), accumulate_grad=False)
    return EvaluationResult(loss=loss, accuracy=accuracy(cm), confusion=cm)


def fit(
    model: Model,
    train_source: BatchSource,
    val_source: BatchSource,
    cfg: TrainConfig,
    *,
    optimizer_step: int = 0,
    progress: bool = False,
    on_epoch: Callable[[HistoryRow, EarlyStopState], None] | None = None,
) -> TrainingHistory:
    """
    Trains `model` in place and returns the per-epoch history.

    Args:
        optimizer_step: Adam steps already applied, when resuming from a checkpoint.
        progress: Show a tqdm bar per epoch.
        on_epoch: Called after each recorded row.

    Raises:
        TrainingError: If the training source is empty.
        TrainingAbortedError: If a training or validation loss is not finite.
    """
    if len(train_source) == 0:
        raise TrainingError("Training source is empty.")

    adam = Adam(model.parameters(), t=optimizer_step)
    stopper = EarlyStopState(patience=cfg.patience, min_delta=cfg.min_delta)
    history = TrainingHistory()

    for epoch in range(1, cfg.max_epochs + 1):
        lr = lr_at_epoch(cfg, epoch)
        loss_sum, correct, seen = 0.0, 0, 0
        bar = tqdm(
            train_source.batches(epoch),
            desc=f"epoch {epoch}/{cfg.max_epochs}",
            unit="batch",
            leave=False,
            disable=not progress,
        )
        for batch_index, batch in enumerate(bar):
            rng = stream_for(cfg.seed, StreamPurpose.DROPOUT, epoch, batch_index)
            model.zero_grad()
            probs = model.forward(batch.inputs, LayerMode.TRAINING, rng)
            data_loss, dlogits = head_loss(probs, batch.labels)
            loss = data_loss + l2_penalty(model.parameters())
            if not math.isfinite(loss):
                raise TrainingAbortedError(epoch, batch_index, f"loss is {loss}.")
            model.backward(dlogits)
            try:
                adam.step(lr)
            except NonFiniteGradientError as e:
                raise TrainingAbortedError(epoch, batch_index, str(e)) from e

            n = len(batch)
            loss_sum += loss * n
            correct += int((predict_labels(probs) == batch.labels).sum())
            seen += n
            bar.set_postfix(loss=f"{loss:.4f}")
            logger.debug(f"epoch {epoch} batch {batch_index}: loss {loss:.6f}")
        if seen == 0:
            raise TrainingError(f"Training source yielded no batches in epoch {epoch}.")

        if cfg.recalibrate_batchnorm:
            model.recalibrate_batchnorm(batch.inputs for batch in train_source.batches(epoch))
        val = evaluate(model, val_source, epoch)
        decision = early_stop_update(stopper, epoch, val.loss, model)
        if stopper.error:
            restore_best(stopper, model)
            raise TrainingAbortedError(epoch, None, f"validation loss is {val.loss}.")
        if stopper.best_epoch == epoch:
            history.optimizer_step = adam.t

        row = HistoryRow(
            epoch=epoch,
            lr=lr,
            train_loss=loss_sum / seen,
            train_acc=correct / seen,
            val_loss=val.loss,
            val_acc=val.accuracy,
        )
        history.append(row)
        logger.info(
            f"Epoch {epoch}: lr {lr:.2e}, loss {row.train_loss:.4f}, acc {row.train_acc:.4f},"
            f" val_loss {row.val_loss:.4f}, val_acc {row.val_acc:.4f}"
            f" (no improvement for {stopper.wait} epochs)"
        )
        if on_epoch is not None:
            on_epoch(row, stopper)
        if decision is StopDecision.STOP:
            history.stopped_early = True
            break

    history.best_epoch = stopper.best_epoch
    if cfg.restore_best and restore_best(stopper, model):
        logger.info(f"Restored weights from epoch {stopper.best_epoch}.")
    else:
        history.optimizer_step = adam.t
    return history
