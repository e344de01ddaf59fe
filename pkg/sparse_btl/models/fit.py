"""
求解器配置与拟合结果模型
"""
from typing import List, Optional

from pydantic import ConfigDict, Field, model_validator

from sparse_btl.config import settings
from sparse_btl.models.base import ArrayModel
from sparse_btl.models.params import Params
from sparse_btl.models.run_config import DataSource


class FitConfig(ArrayModel):
    """
    近端梯度求解配置

    lambda_ / tau 为 None 时由 default_tuning 按 c_lambda / c_tau 计算；
    eta 为 None 时按初值处 Hessian 的最大特征值自动选择步长；
    grad_tol 为 None 时取 grad_tol_scale·(1+‖∇ℒ(θ⁰)‖₂)。
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, populate_by_name=True)

    lambda_: Optional[float] = Field(default=None, alias="lambda", ge=0, description="ℓ1 权重 λ")
    tau: Optional[float] = Field(default=None, ge=0, description="岭权重 τ")
    c_lambda: float = Field(default=0.1, gt=0, description="λ 默认公式的常数 c_λ")
    c_tau: float = Field(default=1.0, ge=0, description="τ 默认公式的常数 c_τ")
    eta: Optional[float] = Field(default=None, gt=0, description="显式步长")
    max_iter: int = Field(default_factory=lambda: settings.max_iter, ge=1, description="最大迭代次数")
    grad_tol: Optional[float] = Field(default=None, gt=0, description="近端驻点残差阈值")
    init: Optional[Params] = Field(default=None, description="热启动参数，None 表示从 0 出发")
    backtracking: bool = Field(default=True, description="目标上升时步长减半")
    record_trace: bool = Field(default=False, description="记录目标函数轨迹")
    pilot_lambda: float = Field(default=0.1, gt=0, description="估计 κ 的试探拟合所用 λ")
    require_connected: bool = Field(default=True, description="拒绝不连通的比较图")
    sparsity_budget: Optional[int] = Field(default=None, ge=0, description="可识别性检查的 k")

    def resolved(self, lambda_: float, tau: float) -> "FitConfig":
        return self.model_copy(update={"lambda_": lambda_, "tau": tau})


class FitResult(ArrayModel):
    """拟合结果 θ̂_R 及求解信息"""

    params: Params
    support: List[int] = Field(..., description="S(α̂) = { i : α̂_i ≠ 0 }")
    iterations: int = Field(..., ge=0)
    residual: float = Field(..., description="最终近端驻点残差 ‖θ^{t+1}−θ^t‖₂/η")
    converged: bool
    step_size: float = Field(..., gt=0, description="最终使用的步长 η")
    lambda_: float = Field(..., alias="lambda", ge=0)
    tau: float = Field(..., ge=0)
    grad_tol: float = Field(..., gt=0)
    objective: float = Field(..., description="终点处的正则化目标值")
    objective_trace: Optional[List[float]] = None
    config: FitConfig
    source: Optional[DataSource] = Field(default=None, description="数据来源，供后续子命令重新加载")
    schema_version: int = Field(default_factory=lambda: settings.schema_version)

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def _check(self) -> "FitResult":
        if sorted(self.support) != self.params.support():
            raise ValueError("support must list exactly the nonzero alpha coordinates")
        return self
