"""
多步流程
合成数据生成、蒙特卡洛实验与 CLI 使用的端到端流程
"""
from sparse_btl.workflows.simulation import generate_truth, simulate_comparisons, simulate_dataset
from sparse_btl.workflows.experiments import (
    PRESETS,
    ExperimentOutput,
    ExperimentPreset,
    get_preset,
    run_coverage_experiment,
    run_normality_experiment,
    run_power_experiment,
    run_support_experiment,
)

__all__ = [
    "generate_truth",
    "simulate_comparisons",
    "simulate_dataset",
    "PRESETS",
    "ExperimentOutput",
    "ExperimentPreset",
    "get_preset",
    "run_coverage_experiment",
    "run_normality_experiment",
    "run_power_experiment",
    "run_support_experiment",
]
