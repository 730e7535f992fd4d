"""Configuration, training runs, sweeps and plot-data export."""
from .config import (DEFAULTS, DataConfig, ExperimentConfig, OptimConfig, ScheduleConfig,
                     build_config, config_from_dict, with_overrides)
from .plots import emit_plot_data, read_metrics, read_plot_data
from .sweep import GRIDS, CellResult, mean_std, run_sweep
from .train import METRIC_FIELDS, MetricsRecord, RunResult, load_data, run_experiment

__all__ = [
    "DEFAULTS", "DataConfig", "OptimConfig", "ScheduleConfig", "ExperimentConfig",
    "build_config", "config_from_dict", "with_overrides", "METRIC_FIELDS", "MetricsRecord",
    "RunResult", "load_data", "run_experiment", "GRIDS", "CellResult", "mean_std", "run_sweep",
    "emit_plot_data", "read_metrics", "read_plot_data",
]
