"""
排名推断测试

σ̂ 与稠密 Hessian 构造的 (u_m − u_k)ᵀ∇²ℒ(u_m − u_k)/L 逐项核对。
"""
import numpy as np
import pytest

from sparse_btl.errors import InferenceError, InvalidInputError
from sparse_btl.models import BootstrapSpec, Params
from sparse_btl.services.debias import debias_alpha
from sparse_btl.services.likelihood import hessian
from sparse_btl.services.ranking import (
    block_map_loadings,
    build_ranking_problem,
    one_sided_rank,
    pairwise_sigma,
    rank_ci,
    rank_threshold_test,
    sigma_hat,
    topk_screen,
)
from sparse_btl.services.refit import two_stage_refit


@pytest.fixture
def spec():
    return BootstrapSpec(B=50, seed=4)


def _dense_sigma(params, dataset, Z, donors, in_support):
    n, d = dataset.n, dataset.d
    H = hessian(params, dataset)
    hdiag = np.diag(H)[:n]
    A_inv = np.linalg.inv(H[n:, n:])
    U = np.zeros((n + d, len(donors)))
    for t, donor in enumerate(donors):
        if in_support[t]:
            U[donor, t] = 1.0 / hdiag[donor]
        U[n:, t] = A_inv @ Z[t]
    size = len(donors)
    sigma = np.zeros((size, size))
    for m in range(size):
        for k in range(size):
            diff = U[:, m] - U[:, k]
            sigma[m, k] = np.sqrt(max(diff @ H @ diff, 0.0) / dataset.L_ref)
    return sigma


class TestRankingProblem:
    """测试 θ̂ 与 σ̂ 的组装"""

    def test_scores_one_stage(self, dataset, fitted):
        """测试一阶段得分为 α̂^d + Xβ̂"""
        debiased = debias_alpha(fitted, dataset)
        problem = build_ranking_problem(fitted, dataset, debiased)
        np.testing.assert_allclose(problem.scores, debiased.alpha_debiased + dataset.covariates @ debiased.beta)

    def test_sigma_matches_dense(self, dataset, fitted):
        problem = build_ranking_problem(fitted, dataset)
        expected = _dense_sigma(fitted.params, dataset, dataset.covariates, range(dataset.n), [True] * dataset.n)
        np.testing.assert_allclose(problem.sigma, expected, rtol=1e-6, atol=1e-10)
        np.testing.assert_allclose(problem.sigma, problem.sigma.T, rtol=1e-10)
        assert np.all(np.diag(problem.sigma) == 0.0)

    def test_two_stage_sigma_matches_dense(self, dataset, fitted):
        """测试两阶段时支撑集外物品不含 α 载荷"""
        refit = two_stage_refit(dataset, fitted.support)
        problem = build_ranking_problem(fitted, dataset, two_stage=True, refit=refit)
        in_support = np.isin(np.arange(dataset.n), fitted.support)
        expected = _dense_sigma(refit, dataset, dataset.covariates, range(dataset.n), in_support)
        np.testing.assert_allclose(problem.sigma, expected, rtol=1e-6, atol=1e-10)
        np.testing.assert_allclose(problem.scores, refit.alpha + dataset.covariates @ refit.beta)

    def test_two_stage_exact_zero_refit_stays_in_support(self, dataset, fitted):
        """测试重拟合后恰为零的支撑集坐标仍保留 α 载荷"""
        assert len(fitted.support) > 0
        refit = two_stage_refit(dataset, fitted.support)
        alpha = refit.alpha.copy()
        alpha[fitted.support[0]] = 0.0
        zeroed = Params(alpha=alpha, beta=refit.beta)
        problem = build_ranking_problem(fitted, dataset, two_stage=True, refit=zeroed)
        in_support = np.isin(np.arange(dataset.n), fitted.support)
        expected = _dense_sigma(zeroed, dataset, dataset.covariates, range(dataset.n), in_support)
        np.testing.assert_allclose(problem.sigma, expected, rtol=1e-6, atol=1e-10)
        dropped = _dense_sigma(zeroed, dataset, dataset.covariates, range(dataset.n), zeroed.alpha != 0.0)
        assert not np.allclose(problem.sigma, dropped, rtol=1e-6, atol=1e-10)

    def test_donor_subset(self, dataset, fitted):
        """测试借用训练物品时等于全问题的子块"""
        donors = [2, 5, 7]
        full = build_ranking_problem(fitted, dataset)
        sub = build_ranking_problem(fitted, dataset, new_covariates=dataset.covariates[donors], donors=donors)
        np.testing.assert_allclose(sub.scores, full.scores[donors])
        np.testing.assert_allclose(sub.sigma, full.sigma[np.ix_(donors, donors)], rtol=1e-9, atol=1e-12)

    def test_sigma_hat_entry(self, dataset, fitted):
        full = build_ranking_problem(fitted, dataset)
        assert sigma_hat(fitted, dataset, 3, 8) == pytest.approx(full.sigma[3, 8])
        with pytest.raises(InvalidInputError):
            sigma_hat(fitted, dataset, 3, 3)

    def test_invalid_inputs(self, dataset, fitted):
        with pytest.raises(InvalidInputError):
            build_ranking_problem(fitted, dataset, new_covariates=np.zeros((4, dataset.d + 1)))
        with pytest.raises(InvalidInputError):
            build_ranking_problem(fitted, dataset, new_covariates=np.zeros((2, dataset.d)), donors=[0, dataset.n])


class TestSigmaFormula:
    """测试 Hessian 为 cI 时 σ̂ 的闭式值"""

    @pytest.mark.parametrize("c, L_ref", [(1.0, 1.0), (2.5, 4.0), (0.3, 160.0)])
    def test_identity_hessian(self, c, L_ref):
        """测试 d=1、donor 互异时 σ̂²_{m,k} = (2 + (z_m − z_k)²)/(cL)"""
        n = 6
        Z = np.array([[0.4], [-1.2], [0.0], [2.0]])
        donor = np.array([0, 2, 3, 5])
        U = block_map_loadings(np.full(n, c), np.array([[1.0 / c]]), Z, donor, np.ones(4, dtype=bool))
        sigma = pairwise_sigma(U.T @ (c * np.eye(n + 1)) @ U, L_ref)
        dz = Z[:, 0][:, None] - Z[:, 0][None, :]
        expected = np.sqrt((2.0 + dz ** 2) / (c * L_ref))
        np.fill_diagonal(expected, 0.0)
        np.testing.assert_allclose(sigma, expected, rtol=1e-12)

    def test_identity_hessian_partial_support(self):
        """测试一端不在支撑集时只剩一份 α 方差，同一 donor 时只剩协变量差"""
        c, L_ref = 2.0, 3.0
        Z = np.array([[1.0], [0.0], [0.5]])
        donor = np.array([1, 4, 1])
        in_support = np.array([True, False, True])
        U = block_map_loadings(np.full(5, c), np.array([[1.0 / c]]), Z, donor, in_support)
        sigma = pairwise_sigma(U.T @ (c * np.eye(6)) @ U, L_ref)
        assert sigma[0, 1] == pytest.approx(np.sqrt((1.0 + 1.0) / (c * L_ref)), rel=1e-12)
        assert sigma[0, 2] == pytest.approx(np.sqrt(0.25 / (c * L_ref)), rel=1e-12)

    def test_zero_hessian_diagonal(self):
        with pytest.raises(InferenceError):
            block_map_loadings(np.array([1.0, 0.0]), np.zeros((0, 0)), np.zeros((2, 0)),
                               np.array([0, 1]), np.ones(2, dtype=bool))


class TestRankCI:
    """测试双侧与单侧排名区间"""

    def test_intervals_follow_pairwise_bounds(self, dataset, fitted, spec):
        """测试 ℛ_L、ℛ_U 由逐对区间计数得到"""
        result = rank_ci(fitted, None, dataset, items=[0, 4, 9], spec=spec)
        assert [iv.item for iv in result.intervals] == [0, 4, 9]
        assert result.replicates.shape == (50,)
        for iv in result.intervals:
            rows = [p for p in result.pairwise if p.m == iv.item]
            assert len(rows) == dataset.n - 1
            assert iv.lower == 1 + sum(p.lower > 0 for p in rows)
            assert iv.upper == dataset.n - sum(p.upper < 0 for p in rows)
            assert 1 <= iv.lower <= iv.upper <= dataset.n

    def test_pairwise_width(self, dataset, fitted, spec):
        result = rank_ci(fitted, None, dataset, items=[1], spec=spec)
        for p in result.pairwise:
            assert p.upper - p.lower == pytest.approx(2.0 * result.critical_value * p.sigma)

    def test_one_sided_critical_below_two_sided(self, dataset, fitted, spec):
        """测试同一自助抽样下单侧临界值不超过双侧"""
        two = rank_ci(fitted, None, dataset, spec=spec, include_pairwise=False)
        one = one_sided_rank(fitted, None, dataset, spec=spec)
        assert np.all(one.replicates <= two.replicates + 1e-12)
        assert one.critical_value <= two.critical_value
        assert all(iv.upper == dataset.n for iv in one.intervals)
        assert one.kind == "one_sided_rank"

    def test_items_out_of_range(self, dataset, fitted, spec):
        with pytest.raises(InvalidInputError):
            rank_ci(fitted, None, dataset, items=[dataset.n], spec=spec)


class TestRankDecisions:
    """测试排名阈值检验与前 K 筛选"""

    def test_threshold_consistent_with_lower_bound(self, dataset, fitted, spec):
        decision = rank_threshold_test(0, 3, fitted, None, dataset, spec=spec)
        assert decision.reject == (decision.lower_bound > 3)

    def test_K_equal_n_never_rejects(self, dataset, fitted, spec):
        decision = rank_threshold_test(5, dataset.n, fitted, None, dataset, spec=spec)
        assert not decision.reject

    def test_topk_all(self, dataset, fitted, spec):
        """测试 K = n 时选出全部物品"""
        selection = topk_screen(dataset.n, fitted, None, dataset, spec=spec)
        assert selection.selected == list(range(dataset.n))

    def test_topk_matches_lower_bounds(self, dataset, fitted, spec):
        selection = topk_screen(3, fitted, None, dataset, spec=spec)
        assert selection.selected == [m for m, lb in enumerate(selection.lower_bounds) if lb <= 3]

    @pytest.mark.parametrize("K", [0, 31])
    def test_K_out_of_range(self, dataset, fitted, spec, K):
        with pytest.raises(InvalidInputError):
            topk_screen(K, fitted, None, dataset, spec=spec)
