"""
近端梯度求解服务

求解 min ℒ(θ̃) + λ‖α‖₁ + (τ/2)‖θ̃‖₂²：
θ^{t+1} = SOFT_{ηλ}(θ^t − η∇ℒ_τ(θ^t))，软阈值只作用于 α 块。
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from sparse_btl.config import settings
from sparse_btl.errors import GraphError, IdentifiabilityError, InvalidInputError, SolverError
from sparse_btl.models.dataset import ComparisonDataset
from sparse_btl.models.fit import FitConfig, FitResult
from sparse_btl.models.params import Params, SparsityBudget
from sparse_btl.services.diagnostics import check_identifiability, compute_diagnostics
from sparse_btl.services.graph import is_connected
from sparse_btl.services.likelihood import BTLLikelihood

logger = logging.getLogger(__name__)


def soft_threshold_block(v: np.ndarray, gamma: float, n: int) -> np.ndarray:
    """
    块软阈值：前 n 个坐标施加 s(x, γ) = sign(x)·max(|x|−γ, 0)，其余坐标不变

    Args:
        v: 长度 n+d 的向量
        gamma: 阈值 γ ≥ 0
        n: α 块长度

    Returns:
        新向量；α 块中被截断的坐标是精确的 +0.0
    """
    if gamma < 0:
        raise InvalidInputError("soft-threshold level must be non-negative")
    out = np.array(v, dtype=np.float64, copy=True)
    a = out[:n]
    # + 0.0 把 -0.0 规范为 +0.0
    out[:n] = np.sign(a) * np.maximum(np.abs(a) - gamma, 0.0) + 0.0
    return out


def default_tuning(
    dataset: ComparisonDataset,
    p_hat: Optional[float] = None,
    L_ref: Optional[float] = None,
    kappa_estimates: Tuple[float, float, float] = (1.0, 0.0, 0.0),
    c_lambda: float = 0.1,
    c_tau: float = 1.0,
) -> Tuple[float, float]:
    """
    按理论公式给出 (λ, τ)

    λ = c_λ·κ₁·√((d+1)·n·p̂·log n / L)
    τ = c_τ·min(κ₁/κ₂, 1/(κ₃√(d+1)))·√(log n/(n·L))

    Args:
        dataset: 数据集
        p_hat: 边概率估计，缺省为 2|ℰ|/(n(n−1))
        L_ref: 参考试验次数，缺省取数据集的 L_ref
        kappa_estimates: (κ₁, κ₂, κ₃) 的估计
        c_lambda: 常数 c_λ
        c_tau: 常数 c_τ

    Returns:
        (lambda, tau)
    """
    n, d = dataset.n, dataset.d
    if p_hat is None:
        p_hat = 2.0 * dataset.num_edges / (n * (n - 1)) if n > 1 else 1.0
    if not 0.0 < p_hat <= 1.0:
        raise InvalidInputError(f"p_hat must lie in (0, 1], got {p_hat}")
    L = dataset.L_ref if L_ref is None else L_ref
    kappa1, kappa2, kappa3 = kappa_estimates
    log_n = math.log(n)
    lambda_ = c_lambda * kappa1 * math.sqrt((d + 1) * n * p_hat * log_n / L)
    ratios = []
    if kappa2 > 0:
        ratios.append(kappa1 / kappa2)
    if kappa3 > 0:
        ratios.append(1.0 / (kappa3 * math.sqrt(d + 1)))
    tau = c_tau * min(ratios) * math.sqrt(log_n / (n * L)) if ratios else 0.0
    return lambda_, tau


def estimate_kappas(dataset: ComparisonDataset, config: FitConfig) -> Tuple[float, float, float]:
    """以小 λ 试探拟合得到 (κ̂₁, κ̂₂, κ̂₃)"""
    pilot = config.model_copy(
        update={
            "lambda_": config.pilot_lambda,
            "tau": 0.0,
            "max_iter": min(config.max_iter, 2_000),
            "record_trace": False,
            "sparsity_budget": None,
        }
    )
    result = fit(dataset, pilot)
    diag = compute_diagnostics(result.params, dataset)
    logger.info(
        "pilot fit kappa estimates: kappa1=%.4g kappa2=%.4g kappa3=%.4g",
        diag.kappa1, diag.kappa2, diag.kappa3,
    )
    return diag.kappa1, diag.kappa2, diag.kappa3


def auto_step_size(model: BTLLikelihood, theta0: np.ndarray, tau: float) -> float:
    """η = 2/(2τ + c·λ_max(∇²ℒ(θ⁰)))"""
    lam_max = model.max_eigenvalue(theta0, settings.power_iter_tol, settings.power_iter_max)
    denom = 2.0 * tau + settings.step_safety * lam_max
    if denom <= 0:
        raise SolverError("cannot choose a step size for a flat objective", step_size=math.inf)
    return 2.0 / denom


def kkt_residual(
    params: Params, dataset: ComparisonDataset, lambda_: float, tau: float, eta: float
) -> float:
    """‖SOFT_{ηλ}(θ̂ − η∇ℒ_τ(θ̂)) − θ̂‖₂ / η"""
    model = BTLLikelihood(dataset)
    theta = params.theta_tilde
    step = soft_threshold_block(theta - eta * (model.gradient(theta) + tau * theta), eta * lambda_, dataset.n)
    return float(np.linalg.norm(step - theta)) / eta


def _objective(model: BTLLikelihood, theta: np.ndarray, lambda_: float, tau: float) -> float:
    return model.loss(theta) + lambda_ * float(np.sum(np.abs(theta[: model.n]))) + 0.5 * tau * float(theta @ theta)


def _check_preconditions(dataset: ComparisonDataset, config: FitConfig) -> None:
    if dataset.num_edges == 0:
        raise InvalidInputError("dataset has no comparisons")
    if config.require_connected and not is_connected(dataset):
        raise GraphError("comparison graph is disconnected; restrict to the largest component first")
    # 未给 k 时仍要求 [1 | X] 列满秩，否则 β 不可识别
    budget = SparsityBudget(k=config.sparsity_budget or 0)
    verdict = check_identifiability(dataset.n, dataset.d, budget, dataset.covariates)
    if config.sparsity_budget is None:
        if not verdict.rank_ok:
            raise IdentifiabilityError(f"covariate effect is not identifiable: {verdict.reason}")
    elif not verdict.passed:
        raise IdentifiabilityError(f"parameter space is not identifiable: {verdict.reason}")


def fit(dataset: ComparisonDataset, config: Optional[FitConfig] = None) -> FitResult:
    """
    近端梯度求解正则化 MLE

    Args:
        dataset: 数据集
        config: 求解配置，None 时使用默认值

    Returns:
        FitResult，α 中非支撑坐标为精确零

    Raises:
        GraphError: 比较图不连通且要求连通
        IdentifiabilityError: [1 | X] 列秩不足，或给定 sparsity_budget 且预算检查失败
        SolverError: 目标函数发散或回溯步长退化
    """
    config = config or FitConfig()
    _check_preconditions(dataset, config)

    lambda_, tau = config.lambda_, config.tau
    if lambda_ is None or tau is None:
        kappas = estimate_kappas(dataset, config)
        default_lambda, default_tau = default_tuning(
            dataset, kappa_estimates=kappas, c_lambda=config.c_lambda, c_tau=config.c_tau
        )
        lambda_ = default_lambda if lambda_ is None else lambda_
        tau = default_tau if tau is None else tau

    n = dataset.n
    model = BTLLikelihood(dataset)
    if config.init is not None:
        if config.init.n != n or config.init.d != dataset.d:
            raise InvalidInputError("warm start has the wrong dimensions")
        theta = config.init.theta_tilde.copy()
    else:
        theta = np.zeros(model.dim)

    eta0 = config.eta if config.eta is not None else auto_step_size(model, theta, tau)
    eta = eta0
    grad_tol = config.grad_tol
    if grad_tol is None:
        grad_tol = settings.grad_tol_scale * (1.0 + float(np.linalg.norm(model.gradient(theta))))

    obj = _objective(model, theta, lambda_, tau)
    trace: List[float] = [obj] if config.record_trace else []
    increases = 0
    residual = math.inf
    converged = False
    iterations = 0
    logger.debug("fit start: lambda=%.6g tau=%.6g eta=%.6g grad_tol=%.3g", lambda_, tau, eta, grad_tol)

    for iterations in range(1, config.max_iter + 1):
        grad = model.gradient(theta) + tau * theta
        candidate = soft_threshold_block(theta - eta * grad, eta * lambda_, n)
        cand_obj = _objective(model, candidate, lambda_, tau)
        # 绝对容差，外加目标值量级上的舍入余量
        rounding = 4.0 * np.finfo(np.float64).eps * abs(obj)
        if config.backtracking:
            if cand_obj > obj + settings.monotone_tol + rounding:
                eta *= 0.5
                if eta < settings.min_step_ratio * eta0:
                    raise SolverError("backtracking failed to find a descent step", step_size=eta)
                logger.debug("iteration %d: objective increased, halving step to %.6g", iterations, eta)
                continue
        elif cand_obj > obj + settings.divergence_tol + rounding:
            increases += 1
            if increases >= settings.divergence_patience:
                raise SolverError(
                    f"objective increased for {increases} consecutive iterations", step_size=eta
                )
        else:
            increases = 0
        residual = float(np.linalg.norm(candidate - theta)) / eta
        theta, obj = candidate, cand_obj
        if config.record_trace:
            trace.append(obj)
        if residual <= grad_tol:
            converged = True
            break

    params = Params.from_vector(theta, n)
    if converged:
        logger.info(
            "fit converged in %d iterations: objective=%.10g support=%d",
            iterations, obj, len(params.support()),
        )
    else:
        logger.warning(
            "fit did not converge in %d iterations (residual %.3g > %.3g)",
            config.max_iter, residual, grad_tol,
        )
    return FitResult(
        params=params,
        support=params.support(),
        iterations=iterations,
        residual=residual,
        converged=converged,
        step_size=eta,
        lambda_=lambda_,
        tau=tau,
        grad_tol=grad_tol,
        objective=obj,
        objective_trace=trace if config.record_trace else None,
        config=config.resolved(lambda_, tau),
    )


def fit_path(
    dataset: ComparisonDataset, lambdas: Sequence[float], config: Optional[FitConfig] = None
) -> List[FitResult]:
    """
    在 λ 网格上依次拟合，每个点用上一个解热启动

    Args:
        dataset: 数据集
        lambdas: λ 取值（按给定顺序求解）
        config: 其余求解配置

    Returns:
        与 lambdas 一一对应的 FitResult 列表
    """
    config = config or FitConfig()
    results: List[FitResult] = []
    warm = config.init
    for value in lambdas:
        result = fit(dataset, config.model_copy(update={"lambda_": float(value), "init": warm}))
        results.append(result)
        warm = result.params
    return results
