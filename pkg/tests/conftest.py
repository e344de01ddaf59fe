"""
共享测试夹具

小规模合成数据集：n=30, d=2, k=3，完全由种子决定。
"""
import numpy as np
import pytest

from sparse_btl.models import ComparisonDataset, FitConfig, Scenario
from sparse_btl.services.solver import fit
from sparse_btl.workflows.simulation import generate_truth, simulate_dataset


@pytest.fixture(scope="session")
def scenario():
    """小规模场景"""
    return Scenario(n=30, d=2, k=3, p=0.6, L=20, seed=3)


@pytest.fixture(scope="session")
def truth(scenario):
    return generate_truth(scenario)


@pytest.fixture(scope="session")
def dataset(scenario, truth):
    """第 0 次重复的比较数据"""
    return simulate_dataset(scenario, truth, 0)


@pytest.fixture(scope="session")
def fitted(dataset):
    """λ=1, τ=0 的拟合结果"""
    return fit(dataset, FitConfig(lambda_=1.0, tau=0.0))


@pytest.fixture
def tiny_dataset():
    """n=10, d=2 的随机实例，试验次数不同质"""
    rng = np.random.default_rng(11)
    n = 10
    rows, cols = np.tril_indices(n, k=-1)
    keep = rng.random(rows.size) < 0.7
    # 保证连通：补一条路径
    path = np.column_stack([np.arange(1, n), np.arange(n - 1)])
    edges = np.unique(np.vstack([np.column_stack([rows[keep], cols[keep]]), path]), axis=0)
    trials = rng.integers(1, 8, size=edges.shape[0])
    wins = rng.binomial(trials, 0.5)
    return ComparisonDataset.from_arrays(rng.normal(size=(n, 2)), edges, wins, trials)



@pytest.fixture
def random_instance():
    """
    随机小实例工厂：ER(p) 图加一条路径保证连通，每条边 L 次试验，
    胜场按随机得分的 BTL 概率抽取
    """

    def make(seed, n=10, d=2, p=0.6, L=5):
        rng = np.random.default_rng(seed)
        rows, cols = np.tril_indices(n, k=-1)
        keep = rng.random(rows.size) < p
        path = np.column_stack([np.arange(1, n), np.arange(n - 1)])
        edges = np.unique(np.vstack([np.column_stack([rows[keep], cols[keep]]), path]), axis=0)
        scores = rng.normal(scale=0.5, size=n)
        j_wins = 1.0 / (1.0 + np.exp(scores[edges[:, 0]] - scores[edges[:, 1]]))
        wins = rng.binomial(L, j_wins)
        return ComparisonDataset.from_arrays(rng.normal(size=(n, d)), edges, wins, np.full(len(edges), L))

    return make
