"""
领域数据模型
基于 Pydantic 的不可变数据结构
"""
from sparse_btl.models.base import ArrayModel, FloatArray, IntArray, model_from_json, model_to_json
from sparse_btl.models.dataset import ComparisonDataset, ComparisonGraph, DatasetSummary
from sparse_btl.models.params import (
    IdentifiabilityVerdict,
    ModelDiagnostics,
    Params,
    SparsityBudget,
)
from sparse_btl.models.run_config import DataSource, RunConfig
from sparse_btl.models.fit import FitConfig, FitResult
from sparse_btl.models.inference import (
    BootstrapSpec,
    DebiasedScores,
    GofResult,
    InferenceReport,
    PairwiseInterval,
    RankCIResult,
    RankInterval,
    RankThresholdDecision,
    TopKSelection,
)
from sparse_btl.models.scenario import Scenario, ScenarioTruth

__all__ = [
    # Base
    "ArrayModel",
    "FloatArray",
    "IntArray",
    "model_from_json",
    "model_to_json",
    # Data
    "ComparisonDataset",
    "ComparisonGraph",
    "DatasetSummary",
    # Parameters
    "Params",
    "SparsityBudget",
    "IdentifiabilityVerdict",
    "ModelDiagnostics",
    # Solver
    "FitConfig",
    "FitResult",
    # Inference
    "BootstrapSpec",
    "DebiasedScores",
    "GofResult",
    "InferenceReport",
    "PairwiseInterval",
    "RankCIResult",
    "RankInterval",
    "RankThresholdDecision",
    "TopKSelection",
    # Simulation
    "Scenario",
    "ScenarioTruth",
    # IO
    "DataSource",
    "RunConfig",
]
