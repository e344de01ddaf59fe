"""
参数与诊断模型
"""
from typing import List, Optional

import numpy as np
from pydantic import Field, model_validator

from sparse_btl.models.base import ArrayModel, FloatArray


class Params(ArrayModel):
    """θ̃ = (α, β)：内在得分与协变量系数"""

    alpha: FloatArray = Field(..., description="长度 n 的内在得分 α")
    beta: FloatArray = Field(..., description="长度 d 的协变量系数 β")

    @model_validator(mode="after")
    def _check(self) -> "Params":
        if self.alpha.ndim != 1 or self.beta.ndim != 1:
            raise ValueError("alpha and beta must be vectors")
        if not (np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.beta))):
            raise ValueError("parameters must be finite")
        return self

    @classmethod
    def zeros(cls, n: int, d: int) -> "Params":
        return cls(alpha=np.zeros(n), beta=np.zeros(d))

    @classmethod
    def from_vector(cls, theta_tilde: np.ndarray, n: int) -> "Params":
        """从拼接向量 θ̃ 拆分出 (α, β)"""
        theta_tilde = np.asarray(theta_tilde, dtype=np.float64)
        return cls(alpha=theta_tilde[:n], beta=theta_tilde[n:])

    @property
    def n(self) -> int:
        return int(self.alpha.shape[0])

    @property
    def d(self) -> int:
        return int(self.beta.shape[0])

    @property
    def theta_tilde(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta])

    def scores(self, covariates: np.ndarray) -> np.ndarray:
        """θ_i = α_i + x_iᵀβ"""
        if self.d == 0:
            return self.alpha.copy()
        return self.alpha + np.asarray(covariates) @ self.beta

    def support(self) -> List[int]:
        """{ i : α_i ≠ 0 }"""
        return [int(i) for i in np.flatnonzero(self.alpha != 0.0)]


class SparsityBudget(ArrayModel):
    """可识别性检查使用的稀疏度上限 k"""

    k: int = Field(..., ge=0)

    def fits(self, n: int, d: int) -> bool:
        return 2 * self.k + d + 1 <= n


class IdentifiabilityVerdict(ArrayModel):
    """可识别性检查结果（不抛异常）"""

    passed: bool
    budget_ok: bool = Field(..., description="2k + d + 1 ≤ n 是否成立")
    rank_ok: bool = Field(..., description="X̄ 是否列满秩")
    rank: int = Field(..., description="X̄ 的数值秩")
    required_rank: int
    reason: Optional[str] = Field(default=None, description="失败条件描述")


class ModelDiagnostics(ArrayModel):
    """条件数、不相干性与 Σ 的约束特征值（仅供参考，不做强制）"""

    kappa1: float = Field(..., ge=1.0, description="exp(max_{i,j}(θ_i − θ_j))")
    kappa2: float = Field(..., ge=0.0, description="‖α‖_∞")
    kappa3: float = Field(..., ge=0.0, description="‖θ̃‖₂/√n")
    incoherence: float = Field(..., ge=0.0, description="‖X̄(X̄ᵀX̄)⁻¹X̄ᵀ‖_{2,∞}·√(n/(d+1))")
    sigma_min_perp: float = Field(..., description="Σ 在约束子空间上的最小特征值")
    sigma_max: float = Field(..., description="Σ 在约束子空间上的最大特征值")
