"""
似然服务模块

实现带协变量 BTL 模型的负对数似然、梯度与 Hessian。
所有边求和都按规范边序通过 numpy.bincount 完成，结果与调用顺序无关。

记号：θ_i = α_i + x_iᵀβ，边 (i, j) 上 Δ_ij = θ_i − θ_j，φ 为 logistic 函数。
"""
import logging
from typing import Tuple

import numpy as np
from scipy.special import expit

from sparse_btl.errors import InvalidInputError
from sparse_btl.models.dataset import ComparisonDataset
from sparse_btl.models.params import Params

logger = logging.getLogger(__name__)


def rescale_covariates(raw: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    缩放协变量使 max_i ‖x_i‖₂ ≤ √((d+1)/n)

    Args:
        raw: n×d 原始协变量矩阵

    Returns:
        (缩放后的矩阵, 缩放系数 K)；无需缩放时 K = 1
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise InvalidInputError(f"covariates must be a 2-D matrix, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise InvalidInputError("covariates contain non-finite entries")
    n, d = raw.shape
    if n == 0 or d == 0:
        return raw.copy(), 1.0
    bound = np.sqrt((d + 1) / n)
    max_norm = float(np.max(np.linalg.norm(raw, axis=1)))
    # 容差内视为已缩放，保证重复缩放是恒等变换
    if max_norm <= bound * (1.0 + 1e-12):
        return raw.copy(), 1.0
    scale = max_norm / bound
    return raw / scale, float(scale)


class BTLLikelihood:
    """
    绑定到一个数据集的似然计算器

    方法接受拼接向量 θ̃ = (α, β)，供求解器在内层循环中直接调用。
    """

    def __init__(self, dataset: ComparisonDataset):
        """
        Args:
            dataset: 比较数据集
        """
        self.dataset = dataset
        self.n = dataset.n
        self.d = dataset.d
        self.X = dataset.covariates
        self.i = dataset.i_idx
        self.j = dataset.j_idx
        self.w = dataset.weights
        self.y = dataset.y

    @property
    def dim(self) -> int:
        return self.n + self.d

    def scores(self, theta_tilde: np.ndarray) -> np.ndarray:
        alpha, beta = theta_tilde[: self.n], theta_tilde[self.n:]
        if self.d == 0:
            return alpha
        return alpha + self.X @ beta

    def delta(self, theta_tilde: np.ndarray) -> np.ndarray:
        """每条边的 Δ_ij = θ_i − θ_j"""
        theta = self.scores(theta_tilde)
        return theta[self.i] - theta[self.j]

    def _edge_sum(self, r: np.ndarray) -> np.ndarray:
        """Σ_e r_e (x̃_i − x̃_j)，返回长度 n+d 的向量"""
        g_alpha = np.bincount(self.i, weights=r, minlength=self.n) - np.bincount(
            self.j, weights=r, minlength=self.n
        )
        if self.d == 0:
            return g_alpha
        return np.concatenate([g_alpha, self.X.T @ g_alpha])

    def loss(self, theta_tilde: np.ndarray) -> float:
        delta = self.delta(theta_tilde)
        # logaddexp(0, Δ) = log(1 + e^Δ)，对两侧大幅值都稳定
        return float(np.sum(self.w * (np.logaddexp(0.0, delta) - self.y * delta)))

    def gradient(self, theta_tilde: np.ndarray) -> np.ndarray:
        delta = self.delta(theta_tilde)
        return self._edge_sum(self.w * (expit(delta) - self.y))

    def curvature(self, theta_tilde: np.ndarray) -> np.ndarray:
        """每条边的 h_e = w_e φ′(Δ_e)"""
        phi = expit(self.delta(theta_tilde))
        return self.w * phi * (1.0 - phi)

    def laplacian(self, h: np.ndarray) -> np.ndarray:
        """以 h 为边权的 n×n 图拉普拉斯矩阵"""
        lap = np.zeros((self.n, self.n))
        lap[self.i, self.j] = -h
        lap[self.j, self.i] = -h
        lap[np.diag_indices(self.n)] = np.bincount(self.i, weights=h, minlength=self.n) + np.bincount(
            self.j, weights=h, minlength=self.n
        )
        return lap

    def hessian(self, theta_tilde: np.ndarray) -> np.ndarray:
        """∇²ℒ = [I; Xᵀ] Lap(h) [I, X]"""
        lap = self.laplacian(self.curvature(theta_tilde))
        if self.d == 0:
            return lap
        lap_x = lap @ self.X
        top = np.hstack([lap, lap_x])
        bottom = np.hstack([lap_x.T, self.X.T @ lap_x])
        hess = np.vstack([top, bottom])
        return 0.5 * (hess + hess.T)

    def hessian_diag(self, theta_tilde: np.ndarray) -> np.ndarray:
        """α 块的对角线 (∇²ℒ)_ii"""
        h = self.curvature(theta_tilde)
        return np.bincount(self.i, weights=h, minlength=self.n) + np.bincount(
            self.j, weights=h, minlength=self.n
        )

    def hessian_vector_product(self, theta_tilde: np.ndarray, v: np.ndarray, h=None) -> np.ndarray:
        if h is None:
            h = self.curvature(theta_tilde)
        u = self.scores(v)
        return self._edge_sum(h * (u[self.i] - u[self.j]))

    def max_eigenvalue(self, theta_tilde: np.ndarray, tol: float, max_iter: int) -> float:
        """
        幂迭代估计 λ_max(∇²ℒ(θ̃))

        Args:
            theta_tilde: 计算 Hessian 的位置
            tol: 相邻两次估计的相对差阈值
            max_iter: 最大迭代步数

        Returns:
            最大特征值估计
        """
        from sparse_btl.services.graph import STREAM_POWER, make_rng

        h = self.curvature(theta_tilde)
        v = make_rng(0, STREAM_POWER).standard_normal(self.dim)
        v /= np.linalg.norm(v)
        estimate = 0.0
        for step in range(max_iter):
            hv = self.hessian_vector_product(theta_tilde, v, h=h)
            norm = float(np.linalg.norm(hv))
            if norm == 0.0:
                return 0.0
            v = hv / norm
            if abs(norm - estimate) <= tol * norm:
                logger.debug("power iteration converged after %d steps: %.6g", step + 1, norm)
                return norm
            estimate = norm
        logger.debug("power iteration hit max_iter=%d: %.6g", max_iter, estimate)
        return estimate


def _require_edges(dataset: ComparisonDataset) -> None:
    if dataset.num_edges == 0:
        raise InvalidInputError("dataset has no comparisons")


def _check_params(params: Params, dataset: ComparisonDataset) -> np.ndarray:
    if params.n != dataset.n or params.d != dataset.d:
        raise InvalidInputError(
            f"params have shape (n={params.n}, d={params.d}), dataset has (n={dataset.n}, d={dataset.d})"
        )
    return params.theta_tilde


def btl_prob(params: Params, dataset: ComparisonDataset, i: int, j: int) -> float:
    """
    物品 j 战胜物品 i 的概率 φ(x̃_jᵀθ̃ − x̃_iᵀθ̃)

    Args:
        params: 模型参数
        dataset: 提供协变量的数据集
        i, j: 物品编号

    Returns:
        (0, 1) 内的概率
    """
    if i == j:
        raise InvalidInputError("btl_prob requires two distinct items")
    if not (0 <= i < dataset.n and 0 <= j < dataset.n):
        raise InvalidInputError(f"items must lie in [0, {dataset.n})")
    theta = params.scores(dataset.covariates)
    return float(expit(theta[j] - theta[i]))


def loss(params: Params, dataset: ComparisonDataset) -> float:
    """负对数似然 ℒ(θ̃)"""
    _require_edges(dataset)
    return BTLLikelihood(dataset).loss(_check_params(params, dataset))


def regularized_loss(params: Params, dataset: ComparisonDataset, lambda_: float, tau: float) -> float:
    """ℒ(θ̃) + λ‖α‖₁ + (τ/2)‖θ̃‖₂²"""
    if lambda_ < 0 or tau < 0:
        raise InvalidInputError("lambda and tau must be non-negative")
    theta_tilde = _check_params(params, dataset)
    return (
        loss(params, dataset)
        + lambda_ * float(np.sum(np.abs(params.alpha)))
        + 0.5 * tau * float(theta_tilde @ theta_tilde)
    )


def gradient(params: Params, dataset: ComparisonDataset) -> np.ndarray:
    """∇ℒ = Σ w(φ(Δ) − y)(x̃_i − x̃_j)"""
    _require_edges(dataset)
    return BTLLikelihood(dataset).gradient(_check_params(params, dataset))


def hessian(params: Params, dataset: ComparisonDataset) -> np.ndarray:
    """∇²ℒ = Σ w φ′(Δ)(x̃_i − x̃_j)(x̃_i − x̃_j)ᵀ"""
    _require_edges(dataset)
    return BTLLikelihood(dataset).hessian(_check_params(params, dataset))
