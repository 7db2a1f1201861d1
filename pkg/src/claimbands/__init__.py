"""Distribution-free prediction intervals for insurance claim severities.

The package combines two-stage frequency-severity modeling (GLMs or bagged
regression forests) with split conformal and out-of-bag conformal
calibration, so that severity intervals carry finite-sample coverage
guarantees without distributional assumptions.
"""

from claimbands.conformal import (
    ConformalPredictor,
    TwoStageScore,
    predict_interval,
    single_stage_locally_weighted,
    single_stage_split,
    two_stage_oob,
    two_stage_split,
)
from claimbands.core import (
    ClaimsDataset,
    ColumnSpec,
    MiscoverageLevel,
    PredictionInterval,
    ScoreSet,
    SplitIndices,
    average_width,
    calibration_rank,
    conformal_quantile,
    empirical_coverage,
    random_split,
    rmse,
)
from claimbands.harness.experiment import (
    DatasetConfig,
    ExperimentConfig,
    Report,
    ReportRow,
    bootstrap_baseline,
    compare,
    emit_plot_data,
    run,
    validate_coverage,
)
from claimbands.ingest import (
    Encoding,
    SchemaColumn,
    SchemaConfig,
    bundled_schema,
    encode,
    load_csv,
    load_schema,
    write_csv,
    write_schema,
)
from claimbands.synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "ClaimsDataset",
    "ColumnSpec",
    "ConformalPredictor",
    "DatasetConfig",
    "Encoding",
    "ExperimentConfig",
    "MiscoverageLevel",
    "PredictionInterval",
    "Report",
    "ReportRow",
    "SchemaColumn",
    "SchemaConfig",
    "ScoreSet",
    "SplitIndices",
    "SynthConfig",
    "TwoStageScore",
    "average_width",
    "bootstrap_baseline",
    "bundled_schema",
    "calibration_rank",
    "compare",
    "conformal_quantile",
    "emit_plot_data",
    "empirical_coverage",
    "encode",
    "generate",
    "load_csv",
    "load_schema",
    "predict_interval",
    "random_split",
    "rmse",
    "run",
    "single_stage_locally_weighted",
    "single_stage_split",
    "two_stage_oob",
    "two_stage_split",
    "validate_coverage",
    "write_csv",
    "write_schema",
    "__version__",
]
