"""
Training History

Per-epoch rows of (epoch, lr, train_loss, train_acc, val_loss, val_acc) and their CSV
form: the header line `epoch,lr,train_loss,train_acc,val_loss,val_acc`, then one row per
epoch with six-decimal fixed-point floats, every line newline-terminated.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from radiocnn import settings
from radiocnn.errors import RadiocnnError

logger = logging.getLogger(__name__)

_COLUMNS = tuple(settings.HISTORY_HEADER.split(","))


class HistoryFormatError(RadiocnnError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class HistoryRow:
    epoch: int
    lr: float
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float

    def values(self) -> tuple[float, ...]:
        return (self.lr, self.train_loss, self.train_acc, self.val_loss, self.val_acc)


@dataclass
class TrainingHistory:
    rows: list[HistoryRow] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False
    optimizer_step: int = 0

    def append(self, row: HistoryRow) -> None:
        expected = len(self.rows) + 1
        if row.epoch != expected:
            raise ValueError(f"History rows must be consecutive; expected epoch {expected}.")
        if not all(math.isfinite(v) for v in row.values()):
            raise ValueError(f"Epoch {row.epoch} has non-finite values: {row}.")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list[float]:
        return [getattr(row, name) for row in self.rows]

    def best_row(self) -> HistoryRow:
        """The row with the lowest validation loss (first one on ties)."""
        if not self.rows:
            raise ValueError("History is empty.")
        return min(self.rows, key=lambda row: row.val_loss)


def format_history_csv(history: TrainingHistory) -> str:
    decimals = settings.HISTORY_DECIMALS
    lines = [settings.HISTORY_HEADER]
    for row in history.rows:
        lines.append(",".join([str(row.epoch), *(f"{v:.{decimals}f}" for v in row.values())]))
    return "\n".join(lines) + "\n"


def write_history_csv(history: TrainingHistory, path: Path | str) -> Path:
    path = Path(path)
    path.write_text(format_history_csv(history), encoding="utf-8", newline="\n")
    logger.debug(f"Wrote {len(history)} history rows to {path}.")
    return path


def read_history_csv(path: Path | str) -> TrainingHistory:
    """
    Parses a history CSV.

    Raises:
        HistoryFormatError: On a wrong header, a malformed row or a non-consecutive epoch,
            naming the 1-based line.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != settings.HISTORY_HEADER:
        raise HistoryFormatError(1, f"header must be exactly '{settings.HISTORY_HEADER}'.")

    history = TrainingHistory()
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(_COLUMNS):
            raise HistoryFormatError(number, f"expected {len(_COLUMNS)} fields, got {len(fields)}.")
        try:
            epoch = int(fields[0])
            values = [float(v) for v in fields[1:]]
        except ValueError as e:
            raise HistoryFormatError(number, f"unparsable value ({e}).") from e
        try:
            history.append(HistoryRow(epoch, *values))
        except ValueError as e:
            raise HistoryFormatError(number, str(e)) from e
    return history
