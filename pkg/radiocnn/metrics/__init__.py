"""
radiocnn Metrics Subpackage

Confusion matrices, accuracy, training-history CSV files and SVG training curves.
"""

from .confusion import ACCURACY_NOTE, ConfusionMatrix, MetricsError, accuracy, confusion
from .curves import CurvesError, render_curves_svg
from .history import (
    HistoryFormatError,
    HistoryRow,
    TrainingHistory,
    format_history_csv,
    read_history_csv,
    write_history_csv,
)

__all__ = [
    "ACCURACY_NOTE",
    "ConfusionMatrix",
    "MetricsError",
    "accuracy",
    "confusion",
    "CurvesError",
    "render_curves_svg",
    "HistoryFormatError",
    "HistoryRow",
    "TrainingHistory",
    "format_history_csv",
    "read_history_csv",
    "write_history_csv",
]
