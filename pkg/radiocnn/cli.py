"""
Command-Line Interface for radiocnn

This module provides the CLI for radiocnn using Typer. It generates synthetic datasets,
trains and evaluates the CCNN and baseline CNN, applies checkpoints to single images,
runs gradient checks, previews preprocessing and compares finished runs.

Key features:
- `gen-synth`, `train`, `eval`, `predict`, `gradcheck`, `preview` and `compare` commands.
- `train` merges settings defaults < `--config` JSON < explicit flags.
- Exit codes: 0 on success, 1 on runtime failures, 2 on usage or configuration errors.

@dependencies
- `typer` for the CLI application.
- `rich` for tables and panels.
- `radiocnn.sdk` for the operations behind each command.

@notes
- Accuracy is reported as correct / total; the CLI prints this definition next to every
  accuracy it reports.
"""

import json
import logging
import sys
import traceback
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from radiocnn import __version__, settings
from radiocnn.data import gen_synthetic
from radiocnn.metrics import ACCURACY_NOTE
from radiocnn.nn.gradcheck import LAYER_CHECKS, LOSS_CHECKS
from radiocnn.schemas import PipelineConfig
from radiocnn.sdk import (
    ConfigError,
    RadiocnnError,
    compare_runs,
    load_run_config,
    render_preview,
    run_evaluation,
    run_gradcheck_suite,
    run_prediction,
    run_training,
)

app = typer.Typer(
    name="radiocnn",
    help="radiocnn: first-principles CNN training for chest-X-ray classification.",
    add_completion=False,
)

console = Console(no_color=not settings.USE_ANSI_COLORS)
error_console = Console(stderr=True, style="bold red")

logger = logging.getLogger(__name__)


def version_callback(value: bool):
    if value:
        console.print(f"radiocnn CLI Version: {__version__}", style="bold green")
        raise typer.Exit()


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    if verbose:
        log_level = logging.DEBUG
    elif quiet:
        log_level = logging.WARNING
    else:
        log_level = logging.getLevelName(settings.LOG_LEVEL)
        if not isinstance(log_level, int):
            log_level = logging.INFO

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    stream_handler = logging.StreamHandler()
    stream_handler.setLevel(log_level)
    stream_handler.setFormatter(
        logging.Formatter(fmt=settings.LOG_FORMAT, datefmt=settings.LOG_DATE_FORMAT)
    )
    root_logger.addHandler(stream_handler)
    logging.getLogger("PIL").setLevel(logging.WARNING)


@contextmanager
def handle_errors(verbose: bool = False) -> Iterator[None]:
    """Maps configuration errors to exit code 2 and runtime failures to exit code 1."""
    try:
        yield
    except typer.Exit:
        raise
    except (ValidationError, ConfigError) as e:
        error_console.print("Configuration error:")
        error_console.print(str(e), style="red", markup=False)
        raise typer.Exit(code=2)
    except (RadiocnnError, OSError) as e:
        error_console.print(f"{type(e).__name__}:")
        error_console.print(str(e), style="red", markup=False)
        raise typer.Exit(code=1)
    except Exception as e:
        error_console.print("Unexpected error:")
        error_console.print(str(e), style="red", markup=False)
        if verbose:
            error_console.print(traceback.format_exc(), style="red", markup=False)
        raise typer.Exit(code=1)


def _parse_filters(value: Optional[str]) -> Optional[list[int]]:
    if value is None:
        return None
    try:
        filters = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise typer.BadParameter(f"expected comma-separated integers, got '{value}'.")
    if not filters:
        raise typer.BadParameter("at least one filter count is required.")
    return filters


def _set(overrides: dict[str, Any], dotted: str, value: Any) -> None:
    if value is None:
        return
    *parents, leaf = dotted.split(".")
    node = overrides
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


VerboseOption = typer.Option(False, "--verbose", "-v", help="Enable verbose logging output.", is_flag=True)


@app.command("gen-synth", help="Generate the synthetic three-class dataset.")
def gen_synth(
    out: Path = typer.Option(..., "--out", help="Output dataset root."),
    per_class: int = typer.Option(100, "--per-class", min=1, help="Training images per class."),
    size: int = typer.Option(64, "--size", min=2, help="Image side length in pixels."),
    seed: int = typer.Option(settings.DEFAULT_SEED, "--seed", min=0, help="Random seed."),
    test_per_class: int = typer.Option(
        0, "--test-per-class", min=0, help="Also write a test/ split with this many images per class."
    ),
    verbose: bool = VerboseOption,
):
    configure_logging(verbose)
    with handle_errors(verbose):
        summary = gen_synthetic(out, per_class, size, seed, test_per_class=test_per_class)

    table = Table(title=f"Synthetic dataset: {summary.root}")
    table.add_column("Split", style="dim")
    for name in next(iter(summary.counts.values())):
        table.add_column(name, justify="right")
    for split, counts in summary.counts.items():
        table.add_row(split, *(str(c) for c in counts.values()))
    console.print(table)
    console.print(
        f"Wrote [bold]{summary.total}[/bold] images and {summary.manifest.name}.", style="green"
    )


@app.command(help="Train the CCNN or baseline CNN on a dataset directory.")
def train(
    data: Optional[Path] = typer.Option(None, "--data", help="Dataset root with train/<CLASS>/ folders."),
    arch: Optional[str] = typer.Option(None, "--arch", help="Architecture: ccnn or cnn."),
    config: Optional[Path] = typer.Option(None, "--config", help="JSON run configuration."),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory for run artifacts."),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Maximum number of epochs."),
    batch_size: Optional[int] = typer.Option(None, "--batch-size", help="Images per batch."),
    lr: Optional[float] = typer.Option(None, "--lr", help="Base learning rate."),
    lr_decay: Optional[float] = typer.Option(None, "--lr-decay", help="Step-decay factor."),
    lr_decay_every: Optional[int] = typer.Option(None, "--lr-decay-every", help="Epochs per decay step."),
    patience: Optional[int] = typer.Option(None, "--patience", help="Early-stopping patience."),
    min_delta: Optional[float] = typer.Option(None, "--min-delta", help="Early-stopping min_delta."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed."),
    size: Optional[int] = typer.Option(None, "--size", help="Resize images to SIZE x SIZE."),
    channels: Optional[int] = typer.Option(None, "--channels", help="Input channels: 1 or 3."),
    filters: Optional[str] = typer.Option(None, "--filters", help="Comma-separated filter counts."),
    block_dropout: Optional[float] = typer.Option(None, "--block-dropout", help="Dropout after each block."),
    head_dropout: Optional[float] = typer.Option(None, "--head-dropout", help="Dropout before the head."),
    l2: Optional[float] = typer.Option(None, "--l2", help="L2 coefficient for kernels."),
    dense_width: Optional[int] = typer.Option(None, "--dense-width", help="Hidden dense width."),
    val_fraction: Optional[float] = typer.Option(None, "--val-fraction", help="Validation fraction."),
    augment: Optional[bool] = typer.Option(None, "--augment/--no-augment", help="Training augmentation."),
    prefetch: Optional[int] = typer.Option(None, "--prefetch", help="Batches prepared ahead."),
    workers: Optional[int] = typer.Option(None, "--workers", help="Sample-preparation threads."),
    deterministic: Optional[bool] = typer.Option(
        None, "--deterministic/--no-deterministic", help="Prepare samples on a single thread."
    ),
    bn_recalibrate: Optional[bool] = typer.Option(
        None,
        "--bn-recalibrate/--no-bn-recalibrate",
        help="Re-estimate BatchNorm statistics from the training set before each validation pass.",
    ),
    lenient: bool = typer.Option(False, "--lenient", help="Skip undecodable images instead of aborting."),
    eval_test: bool = typer.Option(False, "--eval-test", help="Evaluate on test/ after training."),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Hide progress bars and INFO logs."),
    verbose: bool = VerboseOption,
):
    configure_logging(verbose, quiet)
    overrides: dict[str, Any] = {}
    _set(overrides, "paths.data", None if data is None else str(data))
    _set(overrides, "paths.out", None if out is None else str(out))
    _set(overrides, "model.arch", arch)
    _set(overrides, "model.filters", _parse_filters(filters))
    _set(overrides, "model.block_dropout", block_dropout)
    _set(overrides, "model.head_dropout", head_dropout)
    _set(overrides, "model.l2", l2)
    _set(overrides, "model.dense_width", dense_width)
    _set(overrides, "train.max_epochs", epochs)
    # batch size and seed live in both sections
    for section in ("train", "pipeline"):
        _set(overrides, f"{section}.batch_size", batch_size)
        _set(overrides, f"{section}.seed", seed)
    _set(overrides, "train.base_lr", lr)
    _set(overrides, "train.lr_decay_factor", lr_decay)
    _set(overrides, "train.lr_decay_every", lr_decay_every)
    _set(overrides, "train.patience", patience)
    _set(overrides, "train.min_delta", min_delta)
    _set(overrides, "pipeline.image_size", None if size is None else [size, size])
    _set(overrides, "pipeline.channels", channels)
    _set(overrides, "pipeline.val_fraction", val_fraction)
    _set(overrides, "pipeline.augment", augment)
    _set(overrides, "pipeline.prefetch_depth", prefetch)
    _set(overrides, "pipeline.workers", workers)
    _set(overrides, "train.deterministic", deterministic)
    _set(overrides, "train.recalibrate_batchnorm", bn_recalibrate)
    if lenient:
        _set(overrides, "pipeline.strict", False)
    if eval_test:
        _set(overrides, "eval_test", True)

    with handle_errors(verbose):
        run_config = load_run_config(config, overrides)
        console.print(
            Panel(Text(f"radiocnn v{__version__}: training {run_config.model.arch}", justify="center", style="bold green"))
        )
        outcome = run_training(run_config, progress=not quiet and sys.stderr.isatty())

    counts = outcome.scan.counts()
    table = Table(title=f"Dataset: {outcome.scan.root}")
    table.add_column("Split", style="dim")
    for name in outcome.scan.class_names:
        table.add_column(name, justify="right")
    for split, per_class in counts.items():
        table.add_row(split, *(str(per_class[name]) for name in outcome.scan.class_names))
    console.print(table)
    console.print(
        f"Split: {outcome.split_sizes['train']} training / {outcome.split_sizes['val']} validation images."
    )

    history = outcome.history
    best = history.best_row()
    summary = Table(title="Training Summary")
    summary.add_column("Metric", style="dim")
    summary.add_column("Value")
    summary.add_row("Epochs run", str(len(history)))
    summary.add_row("Stopped early", "yes" if history.stopped_early else "no")
    summary.add_row("Best epoch", str(history.best_epoch))
    summary.add_row("Best val loss", f"{best.val_loss:.4f}")
    summary.add_row("Best val accuracy", f"{best.val_acc:.4f}")
    summary.add_row("Final train accuracy", f"{history.rows[-1].train_acc:.4f}")
    if outcome.test_result is not None:
        summary.add_row("Test accuracy", f"{outcome.test_result.accuracy:.4f}")
        summary.add_row("Test loss", f"{outcome.test_result.loss:.4f}")
    for name, path in outcome.artifacts.items():
        summary.add_row(name, str(path))
    console.print(summary)
    console.print(f"Note: {ACCURACY_NOTE}.", style="dim")


@app.command("eval", help="Evaluate a checkpoint on a dataset split.")
def eval_command(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="A .micf checkpoint."),
    data: Path = typer.Option(..., "--data", help="Dataset root."),
    split: str = typer.Option("train", "--split", help="Dataset split to evaluate: train or test."),
    batch_size: int = typer.Option(settings.DEFAULT_BATCH_SIZE, "--batch-size", min=1),
    as_json: bool = typer.Option(False, "--json", help="Print machine-readable JSON."),
    verbose: bool = VerboseOption,
):
    configure_logging(verbose, quiet=as_json)
    with handle_errors(verbose):
        report = run_evaluation(checkpoint, data, split, batch_size)

    if as_json:
        typer.echo(json.dumps({**report.to_dict(), "accuracy_definition": ACCURACY_NOTE}))
        return

    result = report.result
    console.print(
        f"[bold]{report.split}[/bold]: {result.samples} images, loss {result.loss:.4f},"
        f" accuracy {result.accuracy:.4f}"
    )
    table = Table(title="Confusion matrix (rows: true, columns: predicted)")
    table.add_column("", style="dim")
    for name in report.class_names:
        table.add_column(name, justify="right")
    for name, row in zip(report.class_names, result.confusion.to_list()):
        table.add_row(name, *(str(v) for v in row))
    console.print(table)
    console.print(f"Note: {ACCURACY_NOTE}.", style="dim")


@app.command(help="Classify one image with a checkpoint.")
def predict(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="A .micf checkpoint."),
    image: Path = typer.Option(..., "--image", help="PNG or PGM image."),
    as_json: bool = typer.Option(False, "--json", help="Print machine-readable JSON."),
    verbose: bool = VerboseOption,
):
    configure_logging(verbose, quiet=as_json)
    with handle_errors(verbose):
        prediction = run_prediction(checkpoint, image)

    if as_json:
        typer.echo(
            json.dumps(
                {
                    "class_name": prediction.class_name,
                    "label": prediction.label,
                    "probabilities": dict(zip(prediction.class_names, prediction.probabilities)),
                }
            )
        )
        return
    console.print(f"Predicted class: [bold green]{prediction.class_name}[/bold green]")
    table = Table()
    table.add_column("Class")
    table.add_column("Probability", justify="right")
    for name, p in zip(prediction.class_names, prediction.probabilities):
        table.add_row(name, f"{p:.6f}")
    console.print(table)


@app.command(help="Compare analytic gradients against finite differences.")
def gradcheck(
    layer: Optional[list[str]] = typer.Option(
        None, "--layer", help=f"Check to run (repeatable): {', '.join(LAYER_CHECKS + LOSS_CHECKS)}."
    ),
    all_checks: bool = typer.Option(False, "--all", help="Run every layer and loss check."),
    e2e: bool = typer.Option(False, "--e2e", help="Also check the full mini-CCNN loss gradient."),
    seed: int = typer.Option(0, "--seed", min=0),
    verbose: bool = VerboseOption,
):
    configure_logging(verbose)
    if layer:
        unknown = [n for n in layer if n not in LAYER_CHECKS + LOSS_CHECKS]
        if unknown:
            raise typer.BadParameter(f"unknown check(s): {', '.join(unknown)}.", param_hint="--layer")
        names: Optional[list[str]] = list(layer)
    elif all_checks or not e2e:
        names = None
    else:
        names = []

    with handle_errors(verbose):
        results = run_gradcheck_suite(names, e2e=e2e, seed=seed)

    table = Table(title="Gradient checks (max relative error)")
    table.add_column("Check")
    table.add_column("Error", justify="right")
    table.add_column("Status")
    for result in results:
        status = "[green]ok[/green]" if result.passed else "[red]FAIL[/red]"
        table.add_row(result.name, f"{result.error:.3e}", status)
    console.print(table)

    failed = [r.name for r in results if not r.passed]
    if failed:
        error_console.print(
            f"{len(failed)} check(s) above {settings.GRADCHECK_TOLERANCE:g}: {', '.join(failed)}"
        )
        raise typer.Exit(code=1)


@app.command(help="Write 3x3 grids of training images before and after augmentation.")
def preview(
    data: Path = typer.Option(..., "--data", help="Dataset root."),
    out: Path = typer.Option(..., "--out", help="Directory for the preview PNGs."),
    size: int = typer.Option(settings.DEFAULT_IMAGE_SIZE, "--size", min=1),
    channels: int = typer.Option(settings.DEFAULT_CHANNELS, "--channels"),
    seed: int = typer.Option(settings.DEFAULT_SEED, "--seed", min=0),
    epoch: int = typer.Option(1, "--epoch", min=1, help="Epoch whose augmentation draws to show."),
    verbose: bool = VerboseOption,
):
    configure_logging(verbose)
    with handle_errors(verbose):
        pipeline = PipelineConfig(image_size=(size, size), channels=channels, seed=seed)
        paths = render_preview(data, out, pipeline, epoch)
    for path in paths:
        console.print(f"Wrote [green]{path}[/green]")


@app.command(help="Compare finished runs side by side.")
def compare(
    runs: list[Path] = typer.Argument(..., help="Run directories holding run.json and history.csv."),
    as_json: bool = typer.Option(False, "--json", help="Print machine-readable JSON."),
    verbose: bool = VerboseOption,
):
    configure_logging(verbose, quiet=as_json)
    with handle_errors(verbose):
        summaries = compare_runs(runs)

    if as_json:
        typer.echo(json.dumps([s.to_dict() for s in summaries]))
        return
    table = Table(title="Run comparison")
    for column in ("Run", "Arch", "Epochs", "Best epoch", "Val accuracy", "Val loss"):
        table.add_column(column)
    for s in summaries:
        table.add_row(
            s.run, s.arch, str(s.epochs), str(s.best_epoch), f"{s.best_val_acc:.4f}", f"{s.best_val_loss:.4f}"
        )
    console.print(table)
    console.print(f"Note: {ACCURACY_NOTE}.", style="dim")


@app.callback()
def main_callback(
    version: Optional[bool] = typer.Option(
        None,
        "--version",
        callback=version_callback,
        is_eager=True,
        help="Show CLI version and exit.",
    ),
):
    """
    radiocnn CLI main callback.
    """
    pass


if __name__ == "__main__":
    app()
