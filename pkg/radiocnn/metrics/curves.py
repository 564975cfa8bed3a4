"""
Training Curves

Renders a `TrainingHistory` as a static SVG 1.1 file with two side-by-side panels: loss
on the left, accuracy on the right. Each panel draws a training and a validation
polyline against the epoch axis.

@notes
- Output depends only on the history, with coordinates printed to two decimals, so
  equal histories give byte-identical files.
- The SVG y axis points down; larger values are drawn higher in the panel.
"""

import logging
from pathlib import Path
from xml.sax.saxutils import escape

from radiocnn.errors import RadiocnnError
from radiocnn.metrics.history import TrainingHistory

logger = logging.getLogger(__name__)

WIDTH = 960
HEIGHT = 380
PANEL_WIDTH = 380
PANEL_HEIGHT = 260
PANEL_TOP = 50
PANEL_LEFTS = (70, 540)
MAX_TICKS = 12
TRAIN_COLOR = "#1f77b4"
VAL_COLOR = "#d62728"


class CurvesError(RadiocnnError):
    pass


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _tick_epochs(epochs: int) -> list[int]:
    step = max(1, -(-epochs // MAX_TICKS))
    ticks = list(range(1, epochs + 1, step))
    if ticks[-1] != epochs:
        ticks.append(epochs)
    return ticks


class _Panel:
    def __init__(self, left: float, epochs: int, lo: float, hi: float):
        self.left = left
        self.epochs = epochs
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        self.lo, self.hi = lo, hi

    def x(self, epoch: int) -> float:
        if self.epochs == 1:
            return self.left + PANEL_WIDTH / 2
        return self.left + (epoch - 1) / (self.epochs - 1) * PANEL_WIDTH

    def y(self, value: float) -> float:
        return PANEL_TOP + (1.0 - (value - self.lo) / (self.hi - self.lo)) * PANEL_HEIGHT

    def polyline(self, values: list[float], color: str, label: str) -> str:
        points = " ".join(f"{_fmt(self.x(i + 1))},{_fmt(self.y(v))}" for i, v in enumerate(values))
        return (
            f'<polyline class="{label}" fill="none" stroke="{color}" stroke-width="2" '
            f'points="{points}"/>'
        )

    def frame(self, title: str, y_label: str) -> list[str]:
        bottom = PANEL_TOP + PANEL_HEIGHT
        parts = [
            f'<rect x="{_fmt(self.left)}" y="{PANEL_TOP}" width="{PANEL_WIDTH}" '
            f'height="{PANEL_HEIGHT}" fill="none" stroke="#444"/>',
            f'<text x="{_fmt(self.left + PANEL_WIDTH / 2)}" y="{PANEL_TOP - 18}" '
            f'text-anchor="middle" font-size="15">{escape(title)}</text>',
            f'<text x="{_fmt(self.left + PANEL_WIDTH / 2)}" y="{bottom + 40}" '
            f'text-anchor="middle" font-size="12">epoch</text>',
            f'<text x="{_fmt(self.left - 50)}" y="{_fmt(PANEL_TOP + PANEL_HEIGHT / 2)}" '
            f'text-anchor="middle" font-size="12" transform="rotate(-90 '
            f'{_fmt(self.left - 50)} {_fmt(PANEL_TOP + PANEL_HEIGHT / 2)})">{escape(y_label)}</text>',
        ]
        for epoch in _tick_epochs(self.epochs):
            x = _fmt(self.x(epoch))
            parts.append(f'<line x1="{x}" y1="{bottom}" x2="{x}" y2="{bottom + 5}" stroke="#444"/>')
            parts.append(
                f'<text x="{x}" y="{bottom + 18}" text-anchor="middle" font-size="10">{epoch}</text>'
            )
        for value in (self.lo, (self.lo + self.hi) / 2, self.hi):
            y = _fmt(self.y(value))
            parts.append(
                f'<text x="{_fmt(self.left - 6)}" y="{y}" text-anchor="end" '
                f'font-size="10">{value:.3f}</text>'
            )
        return parts


def render_curves_svg(history: TrainingHistory, path: Path | str | None = None) -> str:
    """Builds the SVG document; writes it to `path` when given. Returns the SVG text."""
    if not history.rows:
        raise CurvesError("Cannot plot an empty training history.")
    epochs = len(history.rows)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    panels = (
        ("Training and validation loss", "loss", "train_loss", "val_loss"),
        ("Training and validation accuracy", "accuracy", "train_acc", "val_acc"),
    )
    for left, (title, y_label, train_key, val_key) in zip(PANEL_LEFTS, panels):
        train = history.column(train_key)
        val = history.column(val_key)
        panel = _Panel(left, epochs, min(train + val), max(train + val))
        parts.extend(panel.frame(title, y_label))
        parts.append(panel.polyline(train, TRAIN_COLOR, train_key))
        parts.append(panel.polyline(val, VAL_COLOR, val_key))

    legend_y = HEIGHT - 14
    parts += [
        f'<line x1="{PANEL_LEFTS[0]}" y1="{legend_y - 4}" x2="{PANEL_LEFTS[0] + 24}" '
        f'y2="{legend_y - 4}" stroke="{TRAIN_COLOR}" stroke-width="2"/>',
        f'<text x="{PANEL_LEFTS[0] + 30}" y="{legend_y}" font-size="12">training</text>',
        f'<line x1="{PANEL_LEFTS[0] + 110}" y1="{legend_y - 4}" x2="{PANEL_LEFTS[0] + 134}" '
        f'y2="{legend_y - 4}" stroke="{VAL_COLOR}" stroke-width="2"/>',
        f'<text x="{PANEL_LEFTS[0] + 140}" y="{legend_y}" font-size="12">validation</text>',
        "</svg>",
    ]
    svg = "\n".join(parts) + "\n"
    if path is not None:
        Path(path).write_text(svg, encoding="utf-8", newline="\n")
        logger.debug(f"Wrote training curves to {path}.")
    return svg
