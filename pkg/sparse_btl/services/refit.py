"""
两阶段重拟合

在估计的支撑集上去掉惩罚重新求解：自由坐标为 (α_S, β)，α 的其余坐标固定为 0，
用带 Armijo 线搜索的阻尼牛顿法求解。
"""
import logging
from typing import Iterable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvalsh

from sparse_btl.config import settings
from sparse_btl.errors import InvalidInputError, RefitError
from sparse_btl.models.dataset import ComparisonDataset
from sparse_btl.models.params import Params
from sparse_btl.services.likelihood import BTLLikelihood

logger = logging.getLogger(__name__)

_ARMIJO = 1e-4


class _SingularHessian(Exception):
    pass


def _newton(model: BTLLikelihood, free: np.ndarray, ridge: float) -> np.ndarray:
    theta = np.zeros(model.dim)

    def objective(t: np.ndarray) -> float:
        return model.loss(t) + 0.5 * ridge * float(t[free] @ t[free])

    obj = objective(theta)
    for step in range(settings.refit_max_iter):
        grad = model.gradient(theta)[free] + ridge * theta[free]
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= settings.refit_tol:
            logger.debug("refit converged after %d Newton steps (|g|=%.3g)", step, grad_norm)
            return theta
        hess = model.hessian(theta)[np.ix_(free, free)] + ridge * np.eye(free.size)
        evals = eigvalsh(hess)
        if evals[0] <= settings.rank_rtol * max(evals[-1], 1.0):
            raise _SingularHessian()
        try:
            direction = cho_solve(cho_factor(hess), grad)
        except LinAlgError as exc:
            raise _SingularHessian() from exc
        slope = float(grad @ direction)
        t = 1.0
        while True:
            trial = theta.copy()
            trial[free] -= t * direction
            trial_obj = objective(trial)
            if trial_obj <= obj - _ARMIJO * t * slope or t < 1e-10:
                break
            t *= 0.5
        theta, obj = trial, trial_obj
    raise RefitError(
        f"Newton refit did not reach gradient norm {settings.refit_tol:g} "
        f"in {settings.refit_max_iter} steps"
    )


def two_stage_refit(dataset: ComparisonDataset, support: Iterable[int]) -> Params:
    """
    在给定支撑集上做无惩罚重拟合 γ̂

    Args:
        dataset: 数据集
        support: α 的支撑集 S

    Returns:
        全长 Params，支撑集外 α 为精确零

    Raises:
        RefitError: 限制后的 Hessian 奇异（加岭后重试仍失败）或牛顿法不收敛
    """
    support = sorted({int(i) for i in support})
    if any(i < 0 or i >= dataset.n for i in support):
        raise InvalidInputError(f"support items must lie in [0, {dataset.n})")
    if dataset.num_edges == 0:
        raise InvalidInputError("dataset has no comparisons")
    model = BTLLikelihood(dataset)
    free = np.concatenate([np.asarray(support, dtype=np.int64), dataset.n + np.arange(dataset.d)])
    if free.size == 0:
        return Params.zeros(dataset.n, dataset.d)
    try:
        theta = _newton(model, free, ridge=0.0)
    except _SingularHessian:
        logger.warning(
            "restricted Hessian is singular on %d coordinates; retrying with ridge %g",
            free.size, settings.refit_ridge,
        )
        try:
            theta = _newton(model, free, ridge=settings.refit_ridge)
        except _SingularHessian as exc:
            raise RefitError(
                "restricted Hessian is singular even with a ridge; shrink the support"
            ) from exc
    theta[: dataset.n] += 0.0
    logger.info("two-stage refit on %d support items", len(support))
    return Params.from_vector(theta, dataset.n)
