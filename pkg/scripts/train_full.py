"""
Full-size CCNN training run

Trains the default 180x180x3 CCNN on a dataset laid out as `<root>/train/<CLASS>/*.png`
(optionally with a sibling `test/`), writes the usual run artifacts and reports whether the
best validation accuracy reached the target. This takes hours on a CPU and is not part of
the test suite.

Exits 0 when the target is reached and 1 when training fails or the target is missed.

To use:
    python scripts/train_full.py /data/chest-xray ./runs/ccnn-full
    python scripts/train_full.py /data/chest-xray ./runs/cnn-full --arch cnn
"""

import logging
import sys
from pathlib import Path

import typer
from rich.console import Console
from rich.table import Table

project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from radiocnn import settings  # noqa: E402
from radiocnn.cli import configure_logging, handle_errors  # noqa: E402
from radiocnn.sdk import load_run_config, run_training  # noqa: E402

TARGET_VAL_ACC = 0.90

app = typer.Typer(add_completion=False)
console = Console(no_color=not settings.USE_ANSI_COLORS)
logger = logging.getLogger("train_full")


@app.command()
def main(
    data: Path = typer.Argument(..., help="Dataset root holding train/ (and test/)."),
    out: Path = typer.Argument(..., help="Run output directory."),
    arch: str = typer.Option("ccnn", "--arch", help="Architecture: ccnn or cnn."),
    seed: int = typer.Option(0, "--seed", help="Seed for weights, split, augmentation and dropout."),
    jpeg: bool = typer.Option(False, "--jpeg", help="Accept .jpg/.jpeg images."),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable debug logging."),
):
    """Train the full-size model and check the validation accuracy target."""
    configure_logging(verbose=verbose)
    with handle_errors(verbose):
        config = load_run_config(
            overrides={
                "model": {"arch": arch},
                "train": {"seed": seed},
                "pipeline": {"seed": seed, "allow_jpeg": jpeg},
                "paths": {"data": str(data), "out": str(out)},
                "eval_test": True,
            }
        )
        outcome = run_training(config, progress=True)

    best = outcome.history.best_row()
    table = Table(title=f"{arch} full run", show_header=False)
    table.add_row("Best epoch", str(best.epoch))
    table.add_row("Epochs run", str(len(outcome.history)))
    table.add_row("Validation accuracy", f"{best.val_acc:.4f}")
    table.add_row("Validation loss", f"{best.val_loss:.4f}")
    if outcome.test_result is not None:
        table.add_row("Test accuracy", f"{outcome.test_result.accuracy:.4f}")
    table.add_row("Artifacts", str(outcome.out_dir))
    console.print(table)

    if best.val_acc < TARGET_VAL_ACC:
        logger.warning(f"Validation accuracy {best.val_acc:.4f} stayed below {TARGET_VAL_ACC:.2f}.")
        raise typer.Exit(code=1)
    console.print(f"Target of {TARGET_VAL_ACC:.2f} reached.", style="bold green")


if __name__ == "__main__":
    app()
