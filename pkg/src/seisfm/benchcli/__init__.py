"""Config-driven experiment runner: model grid x task grid x strategy grid."""

from .config import ENCODER_PRESETS, ExperimentConfig, parse_config_text
from .report import emit_panels, emit_report, emit_scatter
from .runner import ReportRow, evaluate_model, run_experiment, split_dataset, subseed

__all__ = [
    "ENCODER_PRESETS",
    "ExperimentConfig",
    "ReportRow",
    "emit_panels",
    "emit_report",
    "emit_scatter",
    "evaluate_model",
    "parse_config_text",
    "run_experiment",
    "split_dataset",
    "subseed",
]
