"""Config-driven experiment runner and command-line interface."""

from .config import ConfigError, ExperimentConfig, apply_override, expand_sweep, load_config
from .io import RESULT_COLUMNS, RunRecord, read_pgm, read_results_csv, write_pgm, write_results_csv
from .runner import SummaryRow, render_summary, run_experiment, run_single, summarize, write_summary_csv

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RESULT_COLUMNS",
    "RunRecord",
    "SummaryRow",
    "apply_override",
    "expand_sweep",
    "load_config",
    "read_pgm",
    "read_results_csv",
    "render_summary",
    "run_experiment",
    "run_single",
    "summarize",
    "write_pgm",
    "write_results_csv",
    "write_summary_csv",
]
