"""Experiment harness: configs, reports, baselines, figures and the CLI."""

from claimbands.harness.experiment import (
    DatasetConfig,
    ExperimentConfig,
    ForestConfig,
    GlmConfig,
    Report,
    ReportRow,
    SplitConfig,
    bootstrap_baseline,
    compare,
    emit_plot_data,
    run,
    validate_coverage,
)

__all__ = [
    "DatasetConfig",
    "ExperimentConfig",
    "ForestConfig",
    "GlmConfig",
    "Report",
    "ReportRow",
    "SplitConfig",
    "bootstrap_baseline",
    "compare",
    "emit_plot_data",
    "run",
    "validate_coverage",
]
