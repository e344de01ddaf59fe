"""
样本外排名推断

对新物品 t（协变量 z_t，可借用训练物品 donor[t] 的内在得分）构造
θ̂_t 的同时置信区间以及排名置信区间。

记 z̃_t = (e_{donor[t]}, z_t)，u_t = M^⋄ z̃_t，其中 M^⋄ 在 α 块取 Hessian 对角的倒数、
在 β 块取 A⁻¹。则 σ̂²_{m,k} = (u_m − u_k)ᵀ ∇²ℒ (u_m − u_k) / L_ref，
第 b 次自助重复的标准化差为 (s_m − s_k)/σ̂_{m,k}，s = Uᵀ q^{(b)}。
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from sparse_btl.errors import InferenceError, InvalidInputError
from sparse_btl.models.dataset import ComparisonDataset
from sparse_btl.models.fit import FitResult
from sparse_btl.models.inference import (
    BootstrapSpec,
    DebiasedScores,
    PairwiseInterval,
    RankCIResult,
    RankInterval,
    RankThresholdDecision,
    TopKSelection,
)
from sparse_btl.models.params import Params
from sparse_btl.services.bootstrap import bootstrap_alpha_gradients, bootstrap_quantile
from sparse_btl.services.debias import beta_block_inverse, debias_alpha
from sparse_btl.services.likelihood import BTLLikelihood
from sparse_btl.services.refit import two_stage_refit

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RankingProblem:
    """一次排名推断所需的全部数组"""

    scores: np.ndarray  # θ̂_t, 长度 n'
    sigma: np.ndarray  # σ̂_{m,k}, n'×n'
    loadings: np.ndarray  # V = U_α + X U_β, n×n'
    hessian_params: Params
    two_stage: bool

    @property
    def size(self) -> int:
        return int(self.scores.shape[0])


def block_map_loadings(
    hdiag: np.ndarray,
    beta_inverse: np.ndarray,
    new_covariates: np.ndarray,
    donor: np.ndarray,
    in_support: np.ndarray,
) -> np.ndarray:
    """
    U = M^⋄ [e_donor; Z]ᵀ，(n+d)×n'

    α 块取 Hessian 对角的倒数（支撑集外的 donor 列为零），β 块取 A⁻¹ Zᵀ。
    """
    n = hdiag.shape[0]
    size = donor.shape[0]
    picked = donor[in_support]
    if np.any(hdiag[picked] <= 0.0):
        raise InferenceError("zero Hessian diagonal for a donor item")
    u_alpha = np.zeros((n, size))
    u_alpha[picked, np.flatnonzero(in_support)] = 1.0 / hdiag[picked]
    u_beta = beta_inverse @ new_covariates.T if new_covariates.shape[1] else np.zeros((0, size))
    return np.vstack([u_alpha, u_beta])


def pairwise_sigma(gram: np.ndarray, L_ref: float) -> np.ndarray:
    """由 G = Uᵀ∇²ℒU 得 σ̂_{m,k} = √((G_mm + G_kk − 2G_mk)/L_ref)，对角为零"""
    diag = np.diag(gram)
    var = (diag[:, None] + diag[None, :] - 2.0 * gram) / L_ref
    sigma = np.sqrt(np.maximum(var, 0.0))
    np.fill_diagonal(sigma, 0.0)
    return sigma


def build_ranking_problem(
    fit: FitResult,
    dataset: ComparisonDataset,
    debiased: Optional[DebiasedScores] = None,
    new_covariates: Optional[np.ndarray] = None,
    donors: Optional[Sequence[int]] = None,
    two_stage: bool = False,
    refit: Optional[Params] = None,
) -> RankingProblem:
    """
    组装 θ̂、σ̂ 与自助载荷

    Args:
        fit: 正则化拟合结果
        dataset: 数据集
        debiased: 去偏得分（一阶段使用，缺省时现算）
        new_covariates: n'×d 新协变量 Z，缺省为训练协变量 X
        donors: 每个新物品借用的训练物品编号，缺省为恒等映射（此时 n' = n）
        two_stage: 使用两阶段重拟合 γ̂ 而非去偏估计
        refit: 已计算的 γ̂，缺省时在 fit.support 上重拟合

    Returns:
        RankingProblem
    """
    n, d = dataset.n, dataset.d
    Z = dataset.covariates if new_covariates is None else np.asarray(new_covariates, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] != d:
        raise InvalidInputError(f"new covariates must have {d} columns")
    if donors is None:
        if Z.shape[0] != n:
            raise InvalidInputError("new covariates need one row per item unless donors are given")
        donor = np.arange(n)
    else:
        donor = np.asarray(donors, dtype=np.int64)
        if donor.shape != (Z.shape[0],):
            raise InvalidInputError("donors must list one training item per new item")
        if np.any(donor < 0) or np.any(donor >= n):
            raise InvalidInputError(f"donor items must lie in [0, {n})")
    if Z.shape[0] < 2:
        raise InvalidInputError("rank inference needs at least two items")

    if two_stage:
        params = refit if refit is not None else two_stage_refit(dataset, fit.support)
        # 支撑集成员取自第一阶段选择，重拟合后恰为零的坐标仍算在内
        selected = np.zeros(n, dtype=bool)
        selected[np.asarray(fit.support, dtype=np.int64)] = True
        in_support = selected[donor]
        intrinsic = params.alpha[donor]
        beta = params.beta
    else:
        params = fit.params
        debiased = debiased or debias_alpha(fit, dataset)
        in_support = np.ones(donor.size, dtype=bool)
        intrinsic = debiased.alpha_debiased[donor]
        beta = debiased.beta
    scores = intrinsic + (Z @ beta if d else 0.0)

    model = BTLLikelihood(dataset)
    theta = params.theta_tilde
    beta_inverse = beta_block_inverse(params, dataset) if d else np.zeros((0, 0))
    U = block_map_loadings(model.hessian_diag(theta), beta_inverse, Z, donor, in_support)
    loadings = U[:n] + dataset.covariates @ U[n:] if d else U[:n]

    # uᵀ∇²ℒ u = Σ_e h_e (V_i − V_j)²
    h = model.curvature(theta)
    edge_loadings = loadings[dataset.i_idx] - loadings[dataset.j_idx]
    gram = edge_loadings.T @ (h[:, None] * edge_loadings)
    sigma = pairwise_sigma(gram, dataset.L_ref)
    return RankingProblem(
        scores=scores, sigma=sigma, loadings=loadings, hessian_params=params, two_stage=two_stage
    )


def sigma_hat(
    fit: FitResult,
    dataset: ComparisonDataset,
    m: int,
    k: int,
    new_covariates: Optional[np.ndarray] = None,
    donors: Optional[Sequence[int]] = None,
    two_stage: bool = False,
    refit: Optional[Params] = None,
) -> float:
    """σ̂_{m,k}，m ≠ k"""
    if m == k:
        raise InvalidInputError("sigma_hat requires m != k")
    problem = build_ranking_problem(
        fit, dataset, new_covariates=new_covariates, donors=donors, two_stage=two_stage, refit=refit
    )
    if not (0 <= m < problem.size and 0 <= k < problem.size):
        raise InvalidInputError(f"items must lie in [0, {problem.size})")
    return float(problem.sigma[m, k])


def _check_items(items: Optional[Sequence[int]], size: int) -> List[int]:
    if items is None:
        return list(range(size))
    items = [int(m) for m in items]
    if not items:
        raise InvalidInputError("item set must be nonempty")
    if any(m < 0 or m >= size for m in items):
        raise InvalidInputError(f"items must lie in [0, {size})")
    return items


def bootstrap_max_statistic(
    problem: RankingProblem,
    dataset: ComparisonDataset,
    items: Sequence[int],
    spec: BootstrapSpec,
    one_sided: bool,
) -> np.ndarray:
    """
    𝒢₂（双侧）或 𝒢₃（单侧）的自助重复值

    Returns:
        长度 B 的数组
    """
    grads = bootstrap_alpha_gradients(problem.hessian_params, dataset, spec)
    s = grads @ problem.loadings
    out = np.full(spec.B, -np.inf)
    for m in items:
        sig = problem.sigma[m]
        valid = sig > 0.0
        std = np.zeros((spec.B, problem.size))
        std[:, valid] = (s[:, [m]] - s[:, valid]) / sig[valid]
        if one_sided:
            std[:, ~valid] = -np.inf
            out = np.maximum(out, np.max(std, axis=1))
        else:
            out = np.maximum(out, np.max(np.abs(std), axis=1))
    return out


def _pairwise_bounds(problem: RankingProblem, m: int, critical: float):
    diff = problem.scores - problem.scores[m]
    half = critical * problem.sigma[m]
    others = np.arange(problem.size) != m
    return diff, half, others


def _lower_rank(problem: RankingProblem, m: int, critical: float) -> int:
    diff, half, others = _pairwise_bounds(problem, m, critical)
    return 1 + int(np.count_nonzero((diff - half > 0) & others))


def rank_ci(
    fit: FitResult,
    debiased: Optional[DebiasedScores],
    dataset: ComparisonDataset,
    new_covariates: Optional[np.ndarray] = None,
    items: Optional[Sequence[int]] = None,
    spec: Optional[BootstrapSpec] = None,
    donors: Optional[Sequence[int]] = None,
    two_stage: bool = False,
    refit: Optional[Params] = None,
    include_pairwise: bool = True,
) -> RankCIResult:
    """
    双侧同时置信区间与排名区间

    对每个 m ∈ ℳ、k ≠ m：𝒞 = [θ̂_k − θ̂_m ± ĉσ̂_{m,k}]，
    ℛ_L = 1 + #{k : 𝒞_L > 0}，ℛ_U = n' − #{k : 𝒞_U < 0}。

    Args:
        fit: 正则化拟合结果
        debiased: 去偏得分
        dataset: 数据集
        new_covariates: 新协变量 Z
        items: 目标物品集合 ℳ，缺省为全部
        spec: 自助法设定
        donors: 新物品借用的训练物品
        two_stage: 使用两阶段估计
        refit: 已算好的两阶段估计
        include_pairwise: 是否输出逐对区间

    Returns:
        RankCIResult
    """
    spec = spec or BootstrapSpec(kind="two_sided_rank")
    problem = build_ranking_problem(fit, dataset, debiased, new_covariates, donors, two_stage, refit)
    items = _check_items(items, problem.size)
    replicates = bootstrap_max_statistic(problem, dataset, items, spec, one_sided=False)
    critical = bootstrap_quantile(replicates, spec.alpha_level)

    intervals: List[RankInterval] = []
    pairwise: List[PairwiseInterval] = []
    for m in items:
        diff, half, others = _pairwise_bounds(problem, m, critical)
        lower_ci, upper_ci = diff - half, diff + half
        lower = 1 + int(np.count_nonzero((lower_ci > 0) & others))
        upper = problem.size - int(np.count_nonzero((upper_ci < 0) & others))
        intervals.append(RankInterval(item=m, lower=lower, upper=upper, kind="two_sided"))
        if include_pairwise:
            pairwise.extend(
                PairwiseInterval(
                    m=m, k=int(k), lower=float(lower_ci[k]), upper=float(upper_ci[k]),
                    sigma=float(problem.sigma[m, k]),
                )
                for k in np.flatnonzero(others)
            )
    logger.info("rank CI: %d items, critical value %.4f (%s)", len(items), critical,
                "two-stage" if two_stage else "one-stage")
    return RankCIResult(
        intervals=intervals,
        pairwise=pairwise,
        critical_value=critical,
        replicates=replicates,
        scores=problem.scores,
        stage="two_stage" if two_stage else "one_stage",
        kind="two_sided_rank",
    )


def one_sided_rank(
    fit: FitResult,
    debiased: Optional[DebiasedScores],
    dataset: ComparisonDataset,
    new_covariates: Optional[np.ndarray] = None,
    items: Optional[Sequence[int]] = None,
    spec: Optional[BootstrapSpec] = None,
    donors: Optional[Sequence[int]] = None,
    two_stage: bool = False,
    refit: Optional[Params] = None,
) -> RankCIResult:
    """单侧排名下界 [1 + #{k : θ̂_k − θ̂_m > ĉσ̂_{m,k}}, n']"""
    spec = spec or BootstrapSpec(kind="one_sided_rank")
    problem = build_ranking_problem(fit, dataset, debiased, new_covariates, donors, two_stage, refit)
    items = _check_items(items, problem.size)
    replicates = bootstrap_max_statistic(problem, dataset, items, spec, one_sided=True)
    critical = bootstrap_quantile(replicates, spec.alpha_level)
    intervals = [
        RankInterval(
            item=m,
            lower=_lower_rank(problem, m, critical),
            upper=problem.size,
            kind="one_sided_lower",
        )
        for m in items
    ]
    return RankCIResult(
        intervals=intervals,
        pairwise=[],
        critical_value=critical,
        replicates=replicates,
        scores=problem.scores,
        stage="two_stage" if two_stage else "one_stage",
        kind="one_sided_rank",
    )


def rank_threshold_test(
    m: int,
    K: int,
    fit: FitResult,
    debiased: Optional[DebiasedScores],
    dataset: ComparisonDataset,
    spec: Optional[BootstrapSpec] = None,
    **kwargs,
) -> RankThresholdDecision:
    """
    检验 H₀: r(m) ≤ K

    拒绝当且仅当 1 + #{k : θ̂_k − θ̂_m > ĉ_{3,1−α}σ̂_{m,k}} > K。
    """
    result = one_sided_rank(fit, debiased, dataset, items=[m], spec=spec, **kwargs)
    size = int(result.scores.shape[0])
    if not 1 <= K <= size:
        raise InvalidInputError(f"K must lie in [1, {size}]")
    lower = result.intervals[0].lower
    return RankThresholdDecision(
        item=m, K=K, reject=lower > K, lower_bound=lower, critical_value=result.critical_value
    )


def topk_screen(
    K: int,
    fit: FitResult,
    debiased: Optional[DebiasedScores],
    dataset: ComparisonDataset,
    spec: Optional[BootstrapSpec] = None,
    **kwargs,
) -> TopKSelection:
    """Î_K = { m : 1 + #{k : θ̂_k − θ̂_m > ĉσ̂_{m,k}} ≤ K }，ℳ 取全部物品"""
    result = one_sided_rank(fit, debiased, dataset, items=None, spec=spec, **kwargs)
    size = int(result.scores.shape[0])
    if not 1 <= K <= size:
        raise InvalidInputError(f"K must lie in [1, {size}]")
    lowers = [iv.lower for iv in result.intervals]
    selected = [iv.item for iv in result.intervals if iv.lower <= K]
    logger.info("top-%d screen selected %d of %d items", K, len(selected), size)
    return TopKSelection(K=K, selected=selected, lower_bounds=lowers, critical_value=result.critical_value)
