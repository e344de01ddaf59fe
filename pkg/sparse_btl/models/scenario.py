"""
模拟场景模型
"""
import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import Field, model_validator

from sparse_btl.models.base import ArrayModel, FloatArray
from sparse_btl.models.params import Params


class Scenario(ArrayModel):
    """
    合成实验场景

    alpha_law:
        uniform_sign: |α*_i| ~ U[alpha_low, alpha_high]，随机符号，支撑集大小 k
        gof: α*(ρ) = (3ρ/100)·[ω₁, 0]，ω₁ 的幅值 ~ U[1, log 5]，随机符号
    """

    n: int = Field(..., ge=2)
    d: int = Field(..., ge=0)
    k: int = Field(..., ge=0)
    p: float = Field(..., gt=0, le=1, description="Erdős–Rényi 边概率")
    L: int = Field(..., ge=1, description="每条边的试验次数")
    alpha_law: Literal["uniform_sign", "gof"] = "uniform_sign"
    alpha_low: float = Field(default=0.3, ge=0)
    alpha_high: float = Field(default=0.3 * math.log(5), ge=0)
    rho: float = Field(default=0.0, ge=0, description="GOF 信号强度 ρ")
    beta_norm: Optional[float] = Field(default=None, ge=0, description="β* 的球面半径，缺省 0.5·√(n/(d+1))")
    support: Optional[List[int]] = Field(default=None, description="α* 的支撑集，缺省 {0,…,k−1}")
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "Scenario":
        if self.k > self.n:
            raise ValueError("k must not exceed n")
        if 2 * self.k + self.d + 1 > self.n:
            raise ValueError(f"scenario violates 2k + d + 1 <= n ({2 * self.k + self.d + 1} > {self.n})")
        if self.alpha_low > self.alpha_high:
            raise ValueError("alpha_low must not exceed alpha_high")
        if self.support is not None:
            if len(self.support) != self.k or len(set(self.support)) != self.k:
                raise ValueError("support override must list k distinct items")
            if any(i < 0 or i >= self.n for i in self.support):
                raise ValueError("support items must lie in [0, n)")
        return self

    @property
    def radius(self) -> float:
        if self.beta_norm is not None:
            return self.beta_norm
        return 0.5 * math.sqrt(self.n / (self.d + 1))

    @property
    def support_items(self) -> List[int]:
        return sorted(self.support) if self.support is not None else list(range(self.k))


class ScenarioTruth(ArrayModel):
    """真实参数 (α*, β*) 与缩放后的协变量 X"""

    params: Params
    covariates: FloatArray
    support: List[int]

    @property
    def scores(self) -> np.ndarray:
        return self.params.scores(self.covariates)
