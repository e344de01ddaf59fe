"""
两阶段重拟合测试
"""
import logging

import numpy as np
import pytest
from scipy.optimize import minimize

from sparse_btl.errors import InvalidInputError
from sparse_btl.models import ComparisonDataset
from sparse_btl.services.likelihood import BTLLikelihood
from sparse_btl.services.refit import two_stage_refit


def _restricted_oracle(dataset, support):
    model = BTLLikelihood(dataset)
    free = np.concatenate([np.asarray(support, dtype=np.int64), dataset.n + np.arange(dataset.d)])

    def objective(z):
        theta = np.zeros(model.dim)
        theta[free] = z
        return model.loss(theta), model.gradient(theta)[free]

    res = minimize(objective, np.zeros(free.size), jac=True, method="BFGS", options={"gtol": 1e-10})
    theta = np.zeros(model.dim)
    theta[free] = res.x
    return theta


class TestTwoStageRefit:
    """测试支撑集上的无惩罚 MLE"""

    def test_empty_support_is_covariate_mle(self, dataset):
        """测试空支撑集时只拟合 β"""
        params = two_stage_refit(dataset, [])
        np.testing.assert_array_equal(params.alpha, 0.0)
        np.testing.assert_allclose(params.theta_tilde, _restricted_oracle(dataset, []), atol=1e-6)

    def test_matches_restricted_oracle(self, dataset, truth):
        """测试在真实支撑集上与 BFGS 结果一致"""
        support = truth.support
        params = two_stage_refit(dataset, support)
        off = np.setdiff1d(np.arange(dataset.n), support)
        assert np.all(params.alpha[off] == 0.0)
        assert not np.any(np.signbit(params.alpha[off]))
        np.testing.assert_allclose(params.theta_tilde, _restricted_oracle(dataset, support), atol=1e-5)

    def test_gradient_vanishes_on_free_coordinates(self, tiny_dataset):
        params = two_stage_refit(tiny_dataset, [1, 4])
        grad = BTLLikelihood(tiny_dataset).gradient(params.theta_tilde)
        n = tiny_dataset.n
        assert np.linalg.norm(grad[[1, 4]]) <= 1e-8
        assert np.linalg.norm(grad[n:]) <= 1e-8

    def test_nothing_free(self):
        """测试 d = 0 且支撑集为空时返回零参数"""
        ds = ComparisonDataset.from_arrays(np.zeros((3, 0)), [[1, 0], [2, 1]], [0, 1], [2, 2])
        params = two_stage_refit(ds, [])
        assert params.support() == []
        assert params.d == 0

    def test_singular_hessian_falls_back_to_ridge(self, caplog):
        """测试支撑集覆盖全部物品时退回带岭的牛顿法"""
        rows, cols = np.tril_indices(4, k=-1)
        edges = np.column_stack([rows, cols])
        # 胜场不均衡，θ = 0 处梯度非零，第一步牛顿迭代就会遇到奇异 Hessian
        ds = ComparisonDataset.from_arrays(np.zeros((4, 0)), edges, [1, 1, 3, 3, 2, 1], [4] * 6)
        assert np.linalg.norm(BTLLikelihood(ds).gradient(np.zeros(4))) > 0.1
        with caplog.at_level(logging.WARNING, logger="sparse_btl.services.refit"):
            params = two_stage_refit(ds, range(4))
        assert "singular" in caplog.text
        assert "retrying with ridge" in caplog.text
        assert np.linalg.norm(params.alpha) > 0.1
        assert np.all(np.isfinite(params.alpha))
        assert abs(params.alpha.sum()) <= 1e-6

    def test_support_out_of_range(self, tiny_dataset):
        with pytest.raises(InvalidInputError):
            two_stage_refit(tiny_dataset, [tiny_dataset.n])
