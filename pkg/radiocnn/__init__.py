"""
radiocnn Package Initializer

This module initializes the radiocnn package and exports the run-level operations from
`radiocnn.sdk`.

Key features:
- Marks the 'radiocnn' directory as a Python package.
- Re-exports `run_training`, `run_evaluation`, `run_prediction` and friends.
"""

__version__ = "0.1.0"

# sdk imports every subpackage; __version__ must exist before the CLI imports it
from .sdk import (
    ConfigError,
    RadiocnnError,
    compare_runs,
    gen_synthetic,
    load_run_config,
    render_preview,
    run_evaluation,
    run_gradcheck_suite,
    run_prediction,
    run_training,
)

__all__ = [
    "run_training",
    "run_evaluation",
    "run_prediction",
    "run_gradcheck_suite",
    "render_preview",
    "compare_runs",
    "gen_synthetic",
    "load_run_config",
    "ConfigError",
    "RadiocnnError",
    "__version__",
]
