"""
比较数据模型测试
"""
import math

import numpy as np
import pytest

from sparse_btl.models import ComparisonDataset, ComparisonGraph, DatasetSummary


class TestComparisonDataset:
    """测试 ComparisonDataset 的规范化与校验"""

    def test_from_arrays_flips_and_sorts_edges(self):
        """测试 i < j 的边被翻转且胜场互补"""
        cov = np.zeros((4, 1))
        ds = ComparisonDataset.from_arrays(cov, [[0, 1], [3, 2], [2, 0]], [3, 1, 4], [5, 2, 4], rescale=False)
        np.testing.assert_array_equal(ds.edges, [[1, 0], [2, 0], [3, 2]])
        # (0, 1) 上 1 赢 0 三次 -> (1, 0) 上 0 赢 1 两次
        np.testing.assert_array_equal(ds.wins, [2, 4, 1])
        np.testing.assert_array_equal(ds.trials, [5, 4, 2])

    def test_default_L_ref_is_mean_trials(self):
        """测试 L_ref 缺省为平均试验次数"""
        ds = ComparisonDataset.from_arrays(np.zeros((3, 0)), [[1, 0], [2, 1]], [1, 1], [2, 4])
        assert ds.L_ref == pytest.approx(3.0)
        np.testing.assert_allclose(ds.weights, [2 / 3, 4 / 3])
        assert not ds.homogeneous

    def test_sufficient_statistic(self):
        """测试 y 为 i 获胜的比例"""
        ds = ComparisonDataset.from_arrays(np.zeros((2, 0)), [[1, 0]], [1], [4])
        np.testing.assert_allclose(ds.y, [0.75])

    def test_rescales_covariates(self):
        """测试协变量缩放到 √((d+1)/n)"""
        rng = np.random.default_rng(0)
        ds = ComparisonDataset.from_arrays(rng.normal(size=(10, 3)) * 5, [[1, 0]], [0], [1])
        max_norm = np.max(np.linalg.norm(ds.covariates, axis=1))
        assert max_norm == pytest.approx(math.sqrt(4 / 10), abs=1e-12)
        assert ds.covariate_scale > 1.0

    def test_wins_out_of_range(self):
        """测试 wins > trials 被拒绝"""
        with pytest.raises(ValueError):
            ComparisonDataset.from_arrays(np.zeros((2, 0)), [[1, 0]], [3], [2])

    def test_duplicate_edges(self):
        """测试重复边被拒绝"""
        with pytest.raises(ValueError, match="duplicate"):
            ComparisonDataset.from_arrays(np.zeros((3, 0)), [[1, 0], [0, 1]], [0, 0], [1, 1])

    def test_self_pair(self):
        """测试自比较被拒绝"""
        with pytest.raises(ValueError, match="self-pairs"):
            ComparisonDataset.from_arrays(np.zeros((3, 0)), [[1, 1]], [0], [1])

    def test_dimension_must_be_below_n(self):
        """测试 d ≥ n 被拒绝"""
        with pytest.raises(ValueError, match="smaller than n"):
            ComparisonDataset.from_arrays(np.eye(3) * 0.1, [[1, 0]], [0], [1], rescale=False)

    def test_unscaled_covariates_rejected(self):
        """测试直接构造时未缩放的协变量被拒绝"""
        with pytest.raises(ValueError, match="not rescaled"):
            ComparisonDataset(
                n=3, d=1, covariates=[[10.0], [0.0], [0.0]], edges=[[1, 0]], wins=[0], trials=[1], L_ref=1.0
            )

    def test_arrays_are_read_only(self):
        """测试数组字段不可写"""
        ds = ComparisonDataset.from_arrays(np.zeros((2, 0)), [[1, 0]], [1], [2])
        with pytest.raises(ValueError):
            ds.wins[0] = 0

    def test_incident_mean_trials(self):
        """测试关联边平均试验次数，孤立点取 L_ref"""
        ds = ComparisonDataset.from_arrays(np.zeros((4, 0)), [[1, 0], [2, 1]], [0, 0], [2, 6])
        np.testing.assert_allclose(ds.incident_mean_trials(), [2.0, 4.0, 6.0, 4.0])

    def test_design_bar(self):
        """测试 X̄ = [1 | X]"""
        ds = ComparisonDataset.from_arrays([[0.1], [0.2], [-0.3]], [[1, 0]], [0], [1], rescale=False)
        np.testing.assert_allclose(ds.design_bar, [[1, 0.1], [1, 0.2], [1, -0.3]])

    def test_graph_view(self):
        """测试 graph() 共享边集"""
        ds = ComparisonDataset.from_arrays(np.zeros((3, 0)), [[2, 0], [1, 0]], [0, 0], [1, 1])
        graph = ds.graph()
        assert isinstance(graph, ComparisonGraph)
        assert graph.num_edges == 2
        np.testing.assert_array_equal(graph.edges, ds.edges)


class TestComparisonGraph:
    """测试 ComparisonGraph 校验"""

    def test_rejects_unsorted_edges(self):
        """测试未排序的边被拒绝"""
        with pytest.raises(ValueError, match="sorted"):
            ComparisonGraph(n=3, edges=[[2, 0], [1, 0]])

    def test_rejects_wrong_orientation(self):
        """测试 i < j 的边被拒绝"""
        with pytest.raises(ValueError, match="i > j"):
            ComparisonGraph(n=3, edges=[[0, 1]])

    def test_empty_graph(self):
        """测试空边集"""
        assert ComparisonGraph(n=3, edges=[]).num_edges == 0


class TestDatasetSummary:
    """测试数据集概要模型"""

    def test_fields(self):
        summary = DatasetSummary(
            n=3, d=0, num_edges=1, num_components=2, connected=False,
            largest_component_size=2, homogeneous_trials=True, L_ref=1.0, covariate_scale=1.0,
        )
        assert not summary.connected
