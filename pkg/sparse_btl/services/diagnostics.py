"""
可识别性与假设诊断

诊断结果只作参考：失败的假设以 warning 记录，不抛异常。
"""
import itertools
import logging
import math
from typing import Optional

import numpy as np
from scipy.linalg import eigvalsh, null_space, orth, svdvals

from sparse_btl.config import settings
from sparse_btl.errors import InvalidInputError
from sparse_btl.models.dataset import ComparisonDataset
from sparse_btl.models.params import IdentifiabilityVerdict, ModelDiagnostics, Params, SparsityBudget

logger = logging.getLogger(__name__)


def _design_bar(covariates: np.ndarray) -> np.ndarray:
    covariates = np.asarray(covariates, dtype=np.float64)
    return np.hstack([np.ones((covariates.shape[0], 1)), covariates])


def numerical_rank(matrix: np.ndarray, rtol: Optional[float] = None) -> int:
    """以 rtol·σ_max 为阈值的数值秩"""
    if matrix.size == 0:
        return 0
    rtol = settings.rank_rtol if rtol is None else rtol
    s = svdvals(matrix)
    return int(np.sum(s > rtol * s[0])) if s[0] > 0 else 0


def check_identifiability(n: int, d: int, budget: SparsityBudget, covariates: np.ndarray) -> IdentifiabilityVerdict:
    """
    检查 Θ(k) 的可识别性条件

    Args:
        n: 物品数
        d: 协变量维度
        budget: 稀疏度上限 k
        covariates: n×d 协变量矩阵

    Returns:
        IdentifiabilityVerdict，失败时 reason 说明不满足的条件
    """
    covariates = np.asarray(covariates, dtype=np.float64).reshape(n, d)
    budget_ok = budget.fits(n, d)
    rank = numerical_rank(_design_bar(covariates))
    rank_ok = rank == d + 1
    reasons = []
    if not budget_ok:
        reasons.append(f"2k + d + 1 = {2 * budget.k + d + 1} exceeds n = {n}")
    if not rank_ok:
        reasons.append(f"[1 | X] has rank {rank}, expected {d + 1}")
    return IdentifiabilityVerdict(
        passed=budget_ok and rank_ok,
        budget_ok=budget_ok,
        rank_ok=rank_ok,
        rank=rank,
        required_rank=d + 1,
        reason="; ".join(reasons) or None,
    )


def complete_graph_sigma(covariates: np.ndarray) -> np.ndarray:
    """Σ = Σ_{i>j}(x̃_i − x̃_j)(x̃_i − x̃_j)ᵀ = [I; Xᵀ](nI − 11ᵀ)[I, X]"""
    n = covariates.shape[0]
    lap = n * np.eye(n) - np.ones((n, n))
    embed = np.hstack([np.eye(n), covariates])
    return embed.T @ lap @ embed


def constrained_basis(covariates: np.ndarray) -> np.ndarray:
    """{ v ∈ ℝ^{n+d} : X̄ᵀ v_{1:n} = 0 } 的正交基"""
    n, d = covariates.shape
    constraint = np.hstack([_design_bar(covariates).T, np.zeros((d + 1, d))])
    return null_space(constraint, rcond=settings.rank_rtol)


def compute_diagnostics(params: Params, dataset: ComparisonDataset) -> ModelDiagnostics:
    """
    计算条件数 κ₁、κ₂、κ₃，不相干性以及 Σ 在约束子空间上的极端特征值

    Args:
        params: 参数（通常为拟合值或真值）
        dataset: 数据集

    Returns:
        ModelDiagnostics
    """
    n, d = dataset.n, dataset.d
    theta = params.scores(dataset.covariates)
    gap = float(np.max(theta) - np.min(theta))
    kappa1 = math.exp(gap) if gap < 709.0 else math.inf
    kappa2 = float(np.max(np.abs(params.alpha))) if n else 0.0
    kappa3 = float(np.linalg.norm(params.theta_tilde)) / math.sqrt(n)

    q = orth(_design_bar(dataset.covariates), rcond=settings.rank_rtol)
    incoherence = float(np.max(np.linalg.norm(q, axis=1))) * math.sqrt(n / (d + 1))

    basis = constrained_basis(dataset.covariates)
    if basis.shape[1] == 0:
        sigma_min_perp = sigma_max = 0.0
    else:
        evals = eigvalsh(basis.T @ complete_graph_sigma(dataset.covariates) @ basis)
        sigma_min_perp, sigma_max = float(evals[0]), float(evals[-1])

    if basis.shape[1] and sigma_min_perp <= settings.rank_rtol * max(sigma_max, 1.0):
        logger.warning("Sigma is singular on the constrained subspace (min eigenvalue %.3g)", sigma_min_perp)
    return ModelDiagnostics(
        kappa1=kappa1,
        kappa2=kappa2,
        kappa3=kappa3,
        incoherence=incoherence,
        sigma_min_perp=sigma_min_perp,
        sigma_max=sigma_max,
    )


def find_sparse_null_direction(covariates: np.ndarray, k: int) -> Optional[np.ndarray]:
    """
    搜索稀疏零方向

    寻找非零 v = (v_α, v_β)，‖v_α‖₀ ≤ 2k，且对所有点对 (x̃_i − x̃_j)ᵀv = 0，
    即 v_α + X v_β 为常数向量。等价地 v_α = X̄c、v_β = −c_{1:d}，
    且 X̄c 在支撑集之外为零。逐个枚举大小为 min(2k, n) 的支撑集。

    Args:
        covariates: n×d 协变量
        k: 稀疏度

    Returns:
        找到时返回长度 n+d 的方向；Θ(k) 可识别时返回 None
    """
    covariates = np.asarray(covariates, dtype=np.float64)
    if covariates.ndim != 2:
        raise InvalidInputError("covariates must be a 2-D matrix")
    if k < 0:
        raise InvalidInputError("k must be non-negative")
    n, d = covariates.shape
    x_bar = _design_bar(covariates)
    size = min(2 * k, n)
    for support in itertools.combinations(range(n), size):
        outside = np.setdiff1d(np.arange(n), support)
        kernel = null_space(x_bar[outside]) if outside.size else np.eye(d + 1)
        if kernel.shape[1] == 0:
            continue
        c = kernel[:, 0]
        v = np.concatenate([x_bar @ c, -c[1:]])
        v[:n][outside] = 0.0
        logger.debug("null direction found on support %s", support)
        return v
    return None
