import logging
import math
from dataclasses import dataclass
from enum import Enum

from radiocnn.models import Model, ModelSnapshot

logger = logging.getLogger(__name__)


class StopDecision(str, Enum):
    CONTINUE = "continue"
    STOP = "stop"


@dataclass
class EarlyStopState:
    """Best validation loss so far, epochs since it improved, and the best snapshot."""

    patience: int
    min_delta: float = 0.0
    best_loss: float = math.inf
    best_epoch: int = 0
    wait: int = 0
    snapshot: ModelSnapshot | None = None
    error: bool = False


def early_stop_update(
    state: EarlyStopState, epoch: int, val_loss: float, model: Model
) -> StopDecision:
    """
    Records one epoch's validation loss.

    An epoch improves only when val_loss < best_loss - min_delta; equal losses count as
    no improvement. A non-finite loss stops training with `state.error` set.
    """
    if not math.isfinite(val_loss):
        state.error = True
        logger.error(f"Validation loss at epoch {epoch} is {val_loss}; stopping.")
        return StopDecision.STOP

    if val_loss < state.best_loss - state.min_delta:
        state.best_loss = val_loss
        state.best_epoch = epoch
        state.wait = 0
        state.snapshot = model.snapshot()
        return StopDecision.CONTINUE

    state.wait += 1
    if state.wait >= state.patience:
        logger.info(
            f"Early stopping at epoch {epoch}: no improvement for {state.wait} epochs"
            f" (best {state.best_loss:.6f} at epoch {state.best_epoch})."
        )
        return StopDecision.STOP
    return StopDecision.CONTINUE


def restore_best(state: EarlyStopState, model: Model) -> bool:
    if state.snapshot is None:
        return False
    model.restore(state.snapshot)
    return True
