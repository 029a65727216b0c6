"""
Typed records: schedules, grids, sample batches, reports, experiment config.
"""

from .schedule import Schedule, TimeGrid, SCHEDULE_KINDS
from .batch import SampleBatch
from .report import (
    KlBoundReport,
    W2BoundReport,
    StepSizeCheck,
    MetricReport,
    SweepRow,
    SweepResult,
    ComparisonRow,
    SWEEP_COLUMNS,
    COMPARISON_COLUMNS,
)
from .experiment import ExperimentConfig, parse_config_text, serialize_config, load_config

__all__ = [
    "Schedule",
    "TimeGrid",
    "SCHEDULE_KINDS",
    "SampleBatch",
    "KlBoundReport",
    "W2BoundReport",
    "StepSizeCheck",
    "MetricReport",
    "SweepRow",
    "SweepResult",
    "ComparisonRow",
    "SWEEP_COLUMNS",
    "COMPARISON_COLUMNS",
    "ExperimentConfig",
    "parse_config_text",
    "serialize_config",
    "load_config",
]
