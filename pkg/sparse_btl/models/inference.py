"""
推断相关模型：去偏得分、自助法设定、秩区间与推断报告
"""
from typing import List, Literal, Optional

import numpy as np
from pydantic import ConfigDict, Field, model_validator

from sparse_btl.config import settings
from sparse_btl.models.base import ArrayModel, FloatArray

StatisticKind = Literal["gof", "two_sided_rank", "one_sided_rank"]
SamplerKind = Literal["collapsed", "per_trial"]
Stage = Literal["one_stage", "two_stage"]


class DebiasedScores(ArrayModel):
    """去偏估计 α̂^d 及标准化所需的 Hessian 信息"""

    alpha_debiased: FloatArray = Field(..., description="α̂^d_i = α̂_i − g_i/H_ii")
    hessian_diag: FloatArray = Field(..., description="(∇²ℒ(θ̂_R))_ii, i ∈ [n]")
    beta: FloatArray = Field(..., description="β̂_R（不做去偏）")
    A_inv_diag: FloatArray = Field(..., description="β 块 Hessian 逆矩阵的对角线")

    @model_validator(mode="after")
    def _check(self) -> "DebiasedScores":
        for name in ("alpha_debiased", "hessian_diag", "beta", "A_inv_diag"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} must be finite")
        if self.alpha_debiased.shape != self.hessian_diag.shape:
            raise ValueError("alpha_debiased and hessian_diag must have the same length")
        return self


class BootstrapSpec(ArrayModel):
    """高斯乘子自助法设定"""

    B: int = Field(default_factory=lambda: settings.bootstrap_replicates, ge=1, description="自助重复次数")
    seed: int = Field(default=0, ge=0, description="随机种子")
    alpha_level: float = Field(default=0.05, gt=0, lt=1, description="显著性水平 α")
    kind: StatisticKind = Field(default="gof", description="统计量类型")
    sampler: SamplerKind = Field(default="collapsed", description="乘子抽样方式")


class GofResult(ArrayModel):
    """拟合优度检验 H₀: α* = 0 的结果"""

    statistic: float = Field(..., description="𝒯₁")
    critical_value: float = Field(..., description="c_{1,1−α}")
    p_value: float
    reject: bool
    alpha_level: float
    B: int
    replicates: FloatArray


class PairwiseInterval(ArrayModel):
    """θ_k − θ_m 的同时置信区间"""

    m: int
    k: int
    lower: float
    upper: float
    sigma: float = Field(..., ge=0, description="σ̂_{m,k}")


class RankInterval(ArrayModel):
    """物品 m 的总体排名置信区间 [ℛ_L, ℛ_U]（排名 1 为最高分）"""

    item: int = Field(..., ge=0)
    lower: int = Field(..., ge=1)
    upper: int = Field(..., ge=1)
    kind: Literal["two_sided", "one_sided_lower"] = "two_sided"

    @model_validator(mode="after")
    def _check(self) -> "RankInterval":
        if self.lower > self.upper:
            raise ValueError("rank interval must satisfy lower <= upper")
        return self

    @property
    def length(self) -> int:
        return self.upper - self.lower


class RankCIResult(ArrayModel):
    """rank_ci / one_sided_rank 的完整输出"""

    intervals: List[RankInterval]
    pairwise: List[PairwiseInterval]
    critical_value: float
    replicates: FloatArray
    scores: FloatArray = Field(..., description="用于比较的 θ̂_i")
    stage: Stage = "one_stage"
    kind: StatisticKind = "two_sided_rank"


class RankThresholdDecision(ArrayModel):
    """H₀: r(m) ≤ K 的检验结果"""

    item: int
    K: int
    reject: bool
    lower_bound: int = Field(..., description="单侧秩下界 1 + #{k : θ̂_k − θ̂_m > ĉσ̂_{m,k}}")
    critical_value: float


class TopKSelection(ArrayModel):
    """前 K 筛选 Î_K"""

    K: int
    selected: List[int]
    lower_bounds: List[int]
    critical_value: float


class InferenceReport(ArrayModel):
    """写出到 JSON 的推断报告"""

    schema_version: int = Field(default_factory=lambda: settings.schema_version)
    command: str
    stage: Stage = "one_stage"
    seed: Optional[int] = None
    B: Optional[int] = None
    alpha_level: Optional[float] = None
    sampler: Optional[SamplerKind] = None
    lambda_: Optional[float] = Field(default=None, alias="lambda")
    tau: Optional[float] = None
    support: List[int] = Field(default_factory=list)
    debiased: Optional[DebiasedScores] = None
    gof: Optional[GofResult] = None
    rank_ci: Optional[RankCIResult] = None
    threshold: Optional[RankThresholdDecision] = None
    topk: Optional[TopKSelection] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, populate_by_name=True)
