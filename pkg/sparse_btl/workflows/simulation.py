"""
合成数据生成

真值 (α*, β*, X) 只由场景种子决定；比较图与比较结果按 (种子, 重复序号) 派生独立随机流。
"""
import logging
import math
from typing import Optional, Union

import numpy as np
from scipy.special import expit

from sparse_btl.errors import InvalidInputError
from sparse_btl.models.dataset import ComparisonDataset, ComparisonGraph
from sparse_btl.models.params import Params
from sparse_btl.models.scenario import Scenario, ScenarioTruth
from sparse_btl.services.graph import STREAM_DATA, STREAM_GRAPH, STREAM_TRUTH, make_rng, sample_er_graph

logger = logging.getLogger(__name__)


def _covariates(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    if d == 0:
        return np.zeros((n, 0))
    raw = rng.uniform(-0.5, 0.5, size=(n, d))
    raw -= raw.mean(axis=0)
    max_norm = float(np.max(np.linalg.norm(raw, axis=1)))
    return raw * (math.sqrt((d + 1) / n) / max_norm)


def _sphere(rng: np.random.Generator, d: int, radius: float) -> np.ndarray:
    if d == 0:
        return np.zeros(0)
    g = rng.standard_normal(d)
    return radius * g / np.linalg.norm(g)


def _signed_uniform(rng: np.random.Generator, size: int, low: float, high: float) -> np.ndarray:
    magnitudes = rng.uniform(low, high, size=size)
    signs = rng.choice(np.array([-1.0, 1.0]), size=size)
    return signs * magnitudes


def generate_truth(scenario: Scenario) -> ScenarioTruth:
    """
    生成真实参数与协变量

    协变量 ~ U[−0.5, 0.5]，按列中心化后整体缩放使 max_i ‖x_i‖₂ = √((d+1)/n)；
    β* 均匀分布在半径 scenario.radius 的球面上；α* 按 alpha_law 生成。

    Args:
        scenario: 场景

    Returns:
        ScenarioTruth
    """
    rng = make_rng(scenario.seed, STREAM_TRUTH)
    n, d, k = scenario.n, scenario.d, scenario.k
    covariates = _covariates(rng, n, d)
    beta = _sphere(rng, d, scenario.radius)
    support = scenario.support_items
    alpha = np.zeros(n)
    if scenario.alpha_law == "uniform_sign":
        alpha[support] = _signed_uniform(rng, k, scenario.alpha_low, scenario.alpha_high)
    else:
        omega = _signed_uniform(rng, k, 1.0, math.log(5.0))
        alpha[support] = 3.0 * scenario.rho / 100.0 * omega
    alpha += 0.0
    params = Params(alpha=alpha, beta=beta)
    return ScenarioTruth(params=params, covariates=covariates, support=params.support())


def simulate_comparisons(
    truth: ScenarioTruth,
    graph: ComparisonGraph,
    trials: Union[int, np.ndarray],
    seed: Union[int, np.random.Generator],
    L_ref: Optional[float] = None,
) -> ComparisonDataset:
    """
    按 BTL 模型生成比较结果：wins_j ~ Binomial(trials, φ(θ_j − θ_i))

    Args:
        truth: 真实参数与协变量
        graph: 比较图
        trials: 每条边的试验次数（整数或逐边数组）
        seed: 整数种子或已派生的生成器
        L_ref: 参考试验次数，缺省为平均试验次数

    Returns:
        ComparisonDataset
    """
    if graph.n != truth.covariates.shape[0]:
        raise InvalidInputError("graph and truth disagree on the number of items")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, STREAM_DATA)
    m = graph.num_edges
    trials_arr = np.broadcast_to(np.asarray(trials, dtype=np.int64), (m,)).copy()
    if np.any(trials_arr < 1):
        raise InvalidInputError("trials must be positive")
    theta = truth.scores
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    wins = rng.binomial(trials_arr, expit(theta[j] - theta[i])) if m else np.zeros(0, dtype=np.int64)
    if L_ref is None:
        L_ref = float(np.mean(trials_arr)) if m else 1.0
    return ComparisonDataset(
        n=graph.n,
        d=truth.covariates.shape[1],
        covariates=truth.covariates,
        edges=graph.edges,
        wins=wins,
        trials=trials_arr,
        L_ref=L_ref,
    )


def simulate_dataset(scenario: Scenario, truth: ScenarioTruth, replicate: int) -> ComparisonDataset:
    """第 replicate 次重复：独立采样比较图与比较结果"""
    graph = sample_er_graph(scenario.n, scenario.p, make_rng(scenario.seed, STREAM_GRAPH, replicate))
    return simulate_comparisons(truth, graph, scenario.L, make_rng(scenario.seed, STREAM_DATA, replicate))
