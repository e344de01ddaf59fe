"""去偏估计 α̂^d_i = α̂_i − (∇ℒ(θ̂))_i / (∇²ℒ(θ̂))_ii"""
import logging

import numpy as np
from scipy.linalg import inv

from sparse_btl.errors import InferenceError
from sparse_btl.models.dataset import ComparisonDataset
from sparse_btl.models.fit import FitResult
from sparse_btl.models.inference import DebiasedScores
from sparse_btl.models.params import Params
from sparse_btl.services.diagnostics import numerical_rank
from sparse_btl.services.likelihood import BTLLikelihood

logger = logging.getLogger(__name__)


def beta_block_inverse(params: Params, dataset: ComparisonDataset) -> np.ndarray:
    """A⁻¹，A = Σ w φ′(Δ)(x_i − x_j)(x_i − x_j)ᵀ 为 ∇²ℒ(θ̂) 的 β 块"""
    d = dataset.d
    if d == 0:
        return np.zeros((0, 0))
    h = BTLLikelihood(dataset).curvature(params.theta_tilde)
    dx = dataset.covariates[dataset.i_idx] - dataset.covariates[dataset.j_idx]
    block = dx.T @ (h[:, None] * dx)
    if numerical_rank(block) < d:
        raise InferenceError("Hessian beta-block is singular")
    a_inv = inv(block)
    return 0.5 * (a_inv + a_inv.T)


def debias_alpha(fit: FitResult, dataset: ComparisonDataset) -> DebiasedScores:
    """
    对 α̂_R 做一步牛顿去偏，β̂_R 原样返回

    Args:
        fit: 正则化拟合结果
        dataset: 拟合所用数据集

    Returns:
        DebiasedScores

    Raises:
        InferenceError: 存在孤立物品（Hessian 对角为 0）或 β 块奇异
    """
    if not fit.converged:
        logger.warning("debiasing a fit that did not converge (residual %.3g)", fit.residual)
    model = BTLLikelihood(dataset)
    theta = fit.params.theta_tilde
    diag = model.hessian_diag(theta)
    isolated = np.flatnonzero(diag <= 0.0)
    if isolated.size:
        raise InferenceError(f"zero Hessian diagonal for items {isolated.tolist()[:20]}")
    grad = model.gradient(theta)
    alpha_d = fit.params.alpha - grad[: dataset.n] / diag
    a_inv = beta_block_inverse(fit.params, dataset)
    return DebiasedScores(
        alpha_debiased=alpha_d,
        hessian_diag=diag,
        beta=fit.params.beta,
        A_inv_diag=np.diag(a_inv).copy(),
    )
