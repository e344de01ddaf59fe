"""
高斯乘子自助法与拟合优度检验

每条边 (i, j) 上的逐次试验残差为 φ(Δ) − y^{(l)}，其中 y^{(l)} = 1 表示 i 获胜。
对 s 次 i 获胜、L 次试验的边，Σ_l (φ − y^{(l)})ω^{(l)} 精确服从
N(0, (1−φ)²·s + φ²·(L−s))，collapsed 抽样器每条边只抽一个正态数；
per_trial 抽样器显式生成每次试验的乘子，用于验证前者。

第 b 次重复使用由 (seed, b) 派生的独立随机流，结果与调度顺序无关。
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from sparse_btl.errors import InferenceError, InvalidInputError
from sparse_btl.models.dataset import ComparisonDataset
from sparse_btl.models.fit import FitResult
from sparse_btl.models.inference import BootstrapSpec, DebiasedScores, GofResult, SamplerKind
from sparse_btl.models.params import Params
from sparse_btl.services.debias import debias_alpha
from sparse_btl.services.graph import STREAM_BOOTSTRAP, make_rng
from sparse_btl.services.likelihood import BTLLikelihood

logger = logging.getLogger(__name__)


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    return make_rng(seed, STREAM_BOOTSTRAP, replicate)


def collapsed_scale(phi: np.ndarray, successes: np.ndarray, trials: np.ndarray) -> np.ndarray:
    """√((1−φ)²·s + φ²·(L−s))"""
    return np.sqrt((1.0 - phi) ** 2 * successes + phi ** 2 * (trials - successes))


def draw_edge_multipliers(
    rng: np.random.Generator,
    phi: np.ndarray,
    successes: np.ndarray,
    trials: np.ndarray,
    sampler: SamplerKind = "collapsed",
) -> np.ndarray:
    """
    每条边的乘子和 ξ_e = Σ_l (φ_e − y_e^{(l)})ω^{(l)}

    Args:
        rng: 随机数生成器
        phi: 每条边的拟合概率 φ(Δ)（i 获胜）
        successes: 每条边上 i 获胜的次数
        trials: 每条边的试验次数
        sampler: collapsed 或 per_trial

    Returns:
        长度 |ℰ| 的数组
    """
    if sampler == "collapsed":
        return rng.standard_normal(phi.shape[0]) * collapsed_scale(phi, successes, trials)
    if sampler != "per_trial":
        raise InvalidInputError(f"unknown sampler {sampler!r}")
    m = phi.shape[0]
    # 每条边先排 s 次 i 获胜（系数 φ−1），再排 L−s 次 j 获胜（系数 φ）
    coeff_values = np.column_stack([phi - 1.0, phi]).ravel()
    coeff_counts = np.column_stack([successes, trials - successes]).ravel()
    coeffs = np.repeat(coeff_values, coeff_counts)
    edge_of_trial = np.repeat(np.arange(m), trials)
    omega = rng.standard_normal(coeffs.shape[0])
    return np.bincount(edge_of_trial, weights=coeffs * omega, minlength=m)


def fitted_probabilities(params: Params, dataset: ComparisonDataset) -> np.ndarray:
    """每条边上 i 获胜的拟合概率 φ(θ̂_i − θ̂_j)"""
    return expit(BTLLikelihood(dataset).delta(params.theta_tilde))


def bootstrap_alpha_gradients(params: Params, dataset: ComparisonDataset, spec: BootstrapSpec) -> np.ndarray:
    """
    自助梯度的 α 块

    第 b 行为 Σ_e ξ_e^{(b)}(e_i − e_j) / L_ref；β 块等于 Xᵀ 乘以该行。

    Returns:
        B×n 数组
    """
    phi = fitted_probabilities(params, dataset)
    successes = dataset.trials - dataset.wins
    i, j, n = dataset.i_idx, dataset.j_idx, dataset.n
    out = np.empty((spec.B, n))
    for b in range(spec.B):
        xi = draw_edge_multipliers(replicate_rng(spec.seed, b), phi, successes, dataset.trials, spec.sampler)
        out[b] = (np.bincount(i, weights=xi, minlength=n) - np.bincount(j, weights=xi, minlength=n)) / dataset.L_ref
    return out


def bootstrap_quantile(replicates: np.ndarray, alpha_level: float) -> float:
    """c_{1−α} = inf{z : F̂_B(z) ≥ 1−α}"""
    if replicates.size == 0:
        raise InvalidInputError("bootstrap needs at least one replicate")
    return float(np.quantile(replicates, 1.0 - alpha_level, method="inverted_cdf"))


def bootstrap_p_value(replicates: np.ndarray, statistic: float) -> float:
    """(1 + #{G ≥ T}) / (B + 1)"""
    return float((1 + np.count_nonzero(replicates >= statistic)) / (replicates.size + 1))


def gof_statistic(debiased: DebiasedScores, dataset: ComparisonDataset) -> float:
    """𝒯₁ = max_i |√(H_ii·L_i)·α̂^d_i|，L_i 为 i 的关联边平均试验次数"""
    scale = np.sqrt(debiased.hessian_diag * dataset.incident_mean_trials())
    return float(np.max(np.abs(scale * debiased.alpha_debiased)))


def gof_bootstrap(fit: FitResult, dataset: ComparisonDataset, spec: BootstrapSpec) -> Tuple[float, np.ndarray]:
    """
    𝒢₁ 的自助分布

    Args:
        fit: 全模型拟合结果
        dataset: 数据集
        spec: 自助法设定

    Returns:
        (c_{1,1−α}, 长度 B 的重复值)
    """
    if spec.B < 1:
        raise InvalidInputError("bootstrap needs B >= 1")
    hdiag = BTLLikelihood(dataset).hessian_diag(fit.params.theta_tilde)
    if np.any(hdiag <= 0):
        raise InferenceError("zero Hessian diagonal; the comparison graph has isolated items")
    factor = np.sqrt(dataset.incident_mean_trials() / hdiag)
    grads = bootstrap_alpha_gradients(fit.params, dataset, spec)
    replicates = np.max(np.abs(grads * factor), axis=1)
    return bootstrap_quantile(replicates, spec.alpha_level), replicates


def gof_test(
    fit: FitResult,
    dataset: ComparisonDataset,
    spec: BootstrapSpec,
    debiased: Optional[DebiasedScores] = None,
) -> GofResult:
    """
    检验 H₀: α* = 0（协变量完全解释偏好）

    拒绝当且仅当 𝒯₁ > c_{1,1−α}。
    """
    if spec.B < 100:
        logger.warning("B=%d bootstrap replicates is small; at least 100 are recommended", spec.B)
    debiased = debiased or debias_alpha(fit, dataset)
    statistic = gof_statistic(debiased, dataset)
    critical, replicates = gof_bootstrap(fit, dataset, spec)
    p_value = bootstrap_p_value(replicates, statistic)
    reject = statistic > critical
    logger.info("GOF: T1=%.4f c=%.4f p=%.4f reject=%s", statistic, critical, p_value, reject)
    return GofResult(
        statistic=statistic,
        critical_value=critical,
        p_value=p_value,
        reject=reject,
        alpha_level=spec.alpha_level,
        B=spec.B,
        replicates=replicates,
    )
