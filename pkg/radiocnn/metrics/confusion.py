"""
Confusion Matrix and Accuracy

Rows are true classes, columns are predictions. For the single-unit sigmoid head the
2x2 matrix reads [[TN, FP], [FN, TP]] with class 1 as the positive class.

Accuracy is trace / total, i.e. (TP + TN) / (TP + FP + TN + FN) in the binary case.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from radiocnn.errors import RadiocnnError

ACCURACY_NOTE = "accuracy = correct / total, i.e. (TP + TN) / (TP + FP + TN + FN)"


class MetricsError(RadiocnnError, ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: npt.NDArray[np.int64]

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def binary_counts(self) -> dict[str, int]:
        if self.num_classes != 2:
            raise MetricsError("TP/FP/TN/FN are defined for two classes only.")
        (tn, fp), (fn, tp) = self.counts.tolist()
        return {"TP": tp, "FP": fp, "TN": tn, "FN": fn}

    def to_list(self) -> list[list[int]]:
        return self.counts.tolist()

    @classmethod
    def from_binary_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "ConfusionMatrix":
        return cls(np.array([[tn, fp], [fn, tp]], dtype=np.int64))


def confusion(
    labels: Sequence[int] | npt.NDArray[np.integer],
    predictions: Sequence[int] | npt.NDArray[np.integer],
    k: int,
) -> ConfusionMatrix:
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    p = np.asarray(predictions, dtype=np.int64).reshape(-1)
    if k < 1:
        raise MetricsError(f"Class count must be positive, got {k}.")
    if y.shape != p.shape:
        raise MetricsError(f"{y.size} labels but {p.size} predictions.")
    for name, values in (("label", y), ("prediction", p)):
        if values.size and (values.min() < 0 or values.max() >= k):
            raise MetricsError(f"Every {name} must lie in [0, {k}).")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y, p), 1)
    return ConfusionMatrix(counts)


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        raise MetricsError("Accuracy of an empty confusion matrix is undefined.")
    return float(np.trace(cm.counts)) / total
